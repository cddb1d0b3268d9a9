"""Evaluation: mean radial error, NoC/FR, and revision-curve reports.

NoC_a@b is the mean number of clicks (capped at a) needed to bring an
image's MRE under b; images that never get there count the full budget a.
FR_a@b is the fraction of images still above b after a clicks. The
simulated user always corrects the currently worst keypoint, clicking
exactly at its groundtruth position (ties broken by lowest index).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from interkey.keypoints import KeypointSet
from interkey.simulate import SessionState, refine, start_session

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConfig:
    alpha: int = 5                      # max clicks per image
    beta_list: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)  # target MRE thresholds, px
    policy: str = "worst_first"
    count_failures_as_alpha: bool = True

    def __post_init__(self) -> None:
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if any(b <= 0 for b in self.beta_list):
            raise ValueError("beta thresholds must be > 0")
        if self.policy != "worst_first":
            raise ValueError(f"unknown policy: {self.policy}")


@dataclass
class RevisionTrace:
    image_id: str
    mre_per_step: list[float]           # index 0 = automatic prediction
    clicks: list[tuple[int, float, float]]
    valid: bool = True

    def __post_init__(self) -> None:
        if self.valid and len(self.mre_per_step) != len(self.clicks) + 1:
            raise ValueError("mre_per_step must have one more entry than clicks")


def mre(pred: KeypointSet, gt: KeypointSet, scale: float = 1.0) -> float:
    """Mean Euclidean radial error over mutually visible keypoints.

    `scale` converts working-resolution pixels to evaluation pixels.
    """
    if pred.k != gt.k:
        raise ValueError("keypoint count mismatch")
    vis = pred.visibility & gt.visibility
    if not vis.any():
        raise ValueError("no visible keypoints to evaluate")
    err = np.linalg.norm(pred.coords[vis] - gt.coords[vis], axis=1)
    return float(err.mean() * scale)


def radial_errors(pred: KeypointSet, gt: KeypointSet) -> np.ndarray:
    err = np.linalg.norm(pred.coords - gt.coords, axis=1)
    err[~(pred.visibility & gt.visibility)] = -np.inf  # never selected as worst
    return err


def worst_keypoint(pred: KeypointSet, gt: KeypointSet) -> int:
    """Highest-error visible keypoint; ties broken by lowest index."""
    return int(np.argmax(radial_errors(pred, gt)))


def run_revision_trace(model, image, gt: KeypointSet, cfg: EvalConfig,
                       codec_cfg, image_id: str = "", scale: float = 1.0
                       ) -> RevisionTrace:
    """Simulate worst-first revision of one image, recording MRE per click."""
    try:
        session = start_session(model, image, codec_cfg)
        mres = [mre(session.keypoints, gt, scale)]
        clicks: list[tuple[int, float, float]] = []
        stop_at = min(cfg.beta_list)
        for _ in range(cfg.alpha):
            if mres[-1] <= stop_at:
                break
            idx = worst_keypoint(session.keypoints, gt)
            x, y = float(gt.coords[idx, 0]), float(gt.coords[idx, 1])
            refine(session, (idx, x, y), model)
            clicks.append((idx, x, y))
            mres.append(mre(session.keypoints, gt, scale))
        return RevisionTrace(image_id=image_id, mre_per_step=mres, clicks=clicks)
    except Exception:
        log.exception("revision trace failed for %s", image_id)
        return RevisionTrace(image_id=image_id, mre_per_step=[], clicks=[], valid=False)


def _clicks_to_target(trace: RevisionTrace, alpha: int, beta: float) -> int | None:
    """Smallest step with MRE <= beta, or None if never reached within alpha."""
    for s, m in enumerate(trace.mre_per_step[:alpha + 1]):
        if m <= beta:
            return s
    return None


def noc(traces: list[RevisionTrace], alpha: int, beta: float,
        count_failures_as_alpha: bool = True) -> float:
    vals = []
    for t in traces:
        if not t.valid:
            continue
        s = _clicks_to_target(t, alpha, beta)
        if s is None:
            if count_failures_as_alpha:
                vals.append(alpha)
        else:
            vals.append(s)
    if not vals:
        raise ValueError("no valid traces")
    return float(np.mean(vals))


def fr(traces: list[RevisionTrace], alpha: int, beta: float) -> float:
    valid = [t for t in traces if t.valid]
    if not valid:
        raise ValueError("no valid traces")
    fails = sum(1 for t in valid if _clicks_to_target(t, alpha, beta) is None)
    return fails / len(valid)


def manual_revision_curve(initial_pred: KeypointSet, gt: KeypointSet,
                          max_clicks: int, scale: float = 1.0) -> list[float]:
    """MRE curve when the user fixes worst keypoints by hand, no model help."""
    cur = initial_pred.copy()
    curve = [mre(cur, gt, scale)]
    for _ in range(max_clicks):
        idx = worst_keypoint(cur, gt)
        cur.coords[idx] = gt.coords[idx]
        curve.append(mre(cur, gt, scale))
    return curve


def mean_curve(curves: list[list[float]], length: int) -> list[float]:
    """Mean MRE per click count; traces that stopped early hold their last value."""
    padded = []
    for c in curves:
        c = list(c) + [c[-1]] * (length - len(c))
        padded.append(c[:length])
    return np.mean(padded, axis=0).tolist()


@dataclass
class EvalReport:
    alpha: int
    beta_list: list[float]
    noc_table: dict[str, float]
    noc_excluding_failures: dict[str, float]
    fr_table: dict[str, float]
    model_curve: list[float]
    manual_curve: list[float]
    num_images: int
    num_invalid: int
    worst_images: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def build_report(model_traces: list[RevisionTrace], manual_curves: list[list[float]],
                 cfg: EvalConfig) -> EvalReport:
    valid = [t for t in model_traces if t.valid]
    if not valid:
        raise ValueError("no valid traces to report on")
    noc_table, noc_excl, fr_table = {}, {}, {}
    for beta in cfg.beta_list:
        key = f"{cfg.alpha}@{beta:g}"
        noc_table[key] = noc(valid, cfg.alpha, beta, count_failures_as_alpha=True)
        try:
            noc_excl[key] = noc(valid, cfg.alpha, beta, count_failures_as_alpha=False)
        except ValueError:
            noc_excl[key] = float("nan")
        fr_table[key] = fr(valid, cfg.alpha, beta)
    length = cfg.alpha + 1
    model_curve = mean_curve([t.mre_per_step for t in valid], length)
    manual_mean = mean_curve(manual_curves, length)
    ranked = sorted(valid, key=lambda t: -t.mre_per_step[-1])
    worst = [{"image": t.image_id, "final_mre": t.mre_per_step[-1],
              "initial_mre": t.mre_per_step[0]} for t in ranked[:5]]
    return EvalReport(
        alpha=cfg.alpha, beta_list=list(cfg.beta_list),
        noc_table=noc_table, noc_excluding_failures=noc_excl, fr_table=fr_table,
        model_curve=model_curve, manual_curve=manual_mean,
        num_images=len(valid), num_invalid=len(model_traces) - len(valid),
        worst_images=worst,
    )


def save_report(report: EvalReport, out_dir: Path, make_plots: bool = True) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(report.to_json())
    if make_plots:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5, 4))
        xs = range(len(report.model_curve))
        ax.plot(xs, report.model_curve, marker="o", label="model revision")
        ax.plot(xs, report.manual_curve, marker="s", label="manual revision")
        ax.set_xlabel("clicks")
        ax.set_ylabel("mean MRE (px)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / "revision_curves.png", dpi=120)
        plt.close(fig)
    return path
