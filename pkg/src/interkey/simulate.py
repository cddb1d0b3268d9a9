"""User-click simulation and interactive revision sessions.

Training: draw a click count from a geometric-style distribution over
[0, K], pick that many keypoints uniformly without replacement, and place
the clicks exactly at groundtruth (simulated users click correctly).

Inference: a session tracks the active corrections for one image. Each
refinement rebuilds the interaction map from all corrections, feeds the
previous predicted heatmap restricted to user-modified channels, reruns
the model, decodes, and pins corrected keypoints exactly at their clicked
positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from interkey.codec import CodecConfig, decode_local_softargmax, encode_interaction
from interkey.keypoints import KeypointSet

MAX_SESSION_STEPS = 64


@dataclass(frozen=True)
class ClickBudgetDistribution:
    """P(n clicks) proportional to decay^n over n in [0, K]."""

    k: int
    decay: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must be in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def pmf(self) -> np.ndarray:
        p = self.decay ** np.arange(self.k + 1)
        return p / p.sum()


def sample_num_clicks(dist: ClickBudgetDistribution, rng: np.random.Generator) -> int:
    return int(rng.choice(dist.k + 1, p=dist.pmf()))


def sample_clicked_indices(n: int, k: int, rng: np.random.Generator) -> list[int]:
    if not 0 <= n <= k:
        raise ValueError(f"cannot sample {n} indices from {k} keypoints")
    return sorted(rng.choice(k, size=n, replace=False).tolist())


@dataclass
class TrainingExample:
    interaction: torch.Tensor   # (K, H, W)
    prev_pred: torch.Tensor     # (K, H, W)
    clicked: list[int]


def make_training_example(gt: KeypointSet, prev_pred: torch.Tensor | None,
                          dist: ClickBudgetDistribution, codec_cfg: CodecConfig,
                          width: int, height: int, rng: np.random.Generator,
                          click_noise_sigma: float = 0.0) -> TrainingExample:
    """Simulate one training-time interaction for an image.

    Clicks land on groundtruth coordinates (optionally Gaussian-perturbed
    when `click_noise_sigma` > 0, off by default). `prev_pred` is the
    model's earlier output for this image, or zeros on the first pass.
    """
    k = gt.k
    visible = np.flatnonzero(gt.visibility)
    n = sample_num_clicks(dist, rng)
    n = min(n, len(visible))
    clicked = sorted(rng.choice(visible, size=n, replace=False).tolist())
    mods = []
    for idx in clicked:
        x, y = gt.coords[idx]
        if click_noise_sigma > 0:
            x += rng.normal(0.0, click_noise_sigma)
            y += rng.normal(0.0, click_noise_sigma)
        x = float(np.clip(x, 0, width - 1e-3))
        y = float(np.clip(y, 0, height - 1e-3))
        mods.append((int(idx), x, y))
    interaction = encode_interaction(mods, codec_cfg, k, width, height)
    if prev_pred is None:
        prev_pred = torch.zeros(k, height, width)
    return TrainingExample(interaction=interaction, prev_pred=prev_pred.detach(),
                           clicked=clicked)


@dataclass
class SessionState:
    """One interactive revision session over a single image."""

    image: torch.Tensor                      # (C, H, W)
    codec_cfg: CodecConfig
    prediction_hm: torch.Tensor              # (K, H, W) current model output
    keypoints: KeypointSet                   # decoded + pinned coordinates
    corrections: dict[int, tuple[float, float]] = field(default_factory=dict)
    click_log: list[tuple[int, float, float]] = field(default_factory=list)
    step: int = 0
    history: list[tuple[torch.Tensor, KeypointSet, dict, int]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.prediction_hm.shape[0]


def start_session(model, image: torch.Tensor, codec_cfg: CodecConfig) -> SessionState:
    """Run the automatic (zero-interaction) pass and open a session."""
    k = model.cfg.k
    h, w = image.shape[-2:]
    zeros = torch.zeros(k, h, w)
    hm = model.predict(image, zeros, zeros)
    coords, _ = decode_local_softargmax(hm, codec_cfg)
    return SessionState(image=image, codec_cfg=codec_cfg, prediction_hm=hm,
                        keypoints=KeypointSet(coords.numpy()))


def pin_user_points(decoded: KeypointSet, corrections: dict[int, tuple[float, float]]
                    ) -> KeypointSet:
    """Force corrected keypoints exactly onto their clicked positions."""
    out = decoded.copy()
    for idx, (x, y) in corrections.items():
        out.coords[idx] = (x, y)
    return out


def refine(session: SessionState, click: tuple[int, float, float], model) -> SessionState:
    """Apply one user click and rerun the model. Mutates and returns `session`.

    The previous prediction is fed back only on user-modified channels so
    the model can tell corrected keypoints from untouched ones.
    """
    idx, x, y = click
    h, w = session.image.shape[-2:]
    if not 0 <= idx < session.k:
        raise ValueError(f"keypoint index {idx} out of range")
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"click ({x}, {y}) outside image")
    if session.step >= MAX_SESSION_STEPS:
        raise RuntimeError("session step limit reached")

    session.history.append((session.prediction_hm, session.keypoints.copy(),
                            dict(session.corrections), session.step))
    session.corrections[idx] = (float(x), float(y))
    session.click_log.append((idx, float(x), float(y)))

    mods = [(i, cx, cy) for i, (cx, cy) in sorted(session.corrections.items())]
    interaction = encode_interaction(mods, session.codec_cfg, session.k, w, h)
    prev = torch.zeros_like(session.prediction_hm)
    for i in session.corrections:
        prev[i] = session.prediction_hm[i]

    hm = model.predict(session.image, interaction, prev)
    coords, _ = decode_local_softargmax(hm, session.codec_cfg)
    session.prediction_hm = hm
    session.keypoints = pin_user_points(KeypointSet(coords.numpy()), session.corrections)
    session.step += 1
    return session


def undo(session: SessionState) -> bool:
    """Pop the last refinement; returns False on empty history."""
    if not session.history:
        return False
    hm, kps, corr, step = session.history.pop()
    session.prediction_hm = hm
    session.keypoints = kps
    session.corrections = corr
    session.step = step
    session.click_log.pop()
    return True


def session_trace(session: SessionState) -> list[dict]:
    """Ordered JSON-ready record of the applied clicks."""
    return [{"step": s + 1, "keypoint": idx, "x": x, "y": y}
            for s, (idx, x, y) in enumerate(session.click_log)]
