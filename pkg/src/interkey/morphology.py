"""Inter-keypoint shape statistics and the shape-prior loss.

Medical keypoints have low degrees of freedom: distances between some
keypoint pairs and angles at some keypoint triples barely vary across a
dataset. We measure that variability, select the low-variance relations,
and penalize predictions whose selected distances/angles deviate from the
groundtruth ones:

    L = L_dist + lambda_angle * L_angle

with an L1 penalty on normalized pair distances and a cosine penalty
(1 - u_pred . u_gt) on unit angle vectors. Angle dispersion uses the
circular std sqrt(-ln ||E[u]||^2).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from interkey.keypoints import KeypointSet

log = logging.getLogger(__name__)

Pair = tuple[int, int]          # (m, n), m < n
Triple = tuple[int, int, int]   # (m, n, l): vertex at n, endpoints m < l


@dataclass(frozen=True)
class MorphologyConfig:
    t_d: float = 0.02            # distance-std threshold, diagonal-normalized units
    t_a: float = 0.15            # angular-std threshold, circular-std units
    lambda_angle: float = 1.0    # weight of the angle term
    selection_mode: str = "threshold"  # threshold | top_k_low_variance | top_k_high_variance | adjacent_points
    top_k: int = 15
    triple_window: int | None = 8  # sliding index window bounding triple enumeration; None = exhaustive

    def __post_init__(self) -> None:
        modes = {"threshold", "top_k_low_variance", "top_k_high_variance", "adjacent_points"}
        if self.selection_mode not in modes:
            raise ValueError(f"selection_mode must be one of {sorted(modes)}")
        if self.selection_mode == "threshold" and (self.t_d <= 0 or self.t_a <= 0):
            raise ValueError("t_d and t_a must be > 0 in threshold mode")
        if self.selection_mode.startswith("top_k") and self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass
class RelationSets:
    pairs: list[Pair] = field(default_factory=list)
    triples: list[Triple] = field(default_factory=list)

    def validate(self, k: int) -> None:
        for m, n in self.pairs:
            if not (0 <= m < n < k):
                raise ValueError(f"bad pair ({m}, {n}) for K={k}")
        for m, n, l in self.triples:
            if len({m, n, l}) != 3 or not all(0 <= i < k for i in (m, n, l)):
                raise ValueError(f"bad triple ({m}, {n}, {l}) for K={k}")


@dataclass
class RelationStats:
    k: int
    pair_mean: dict[Pair, float]
    pair_std: dict[Pair, float]
    triple_std: dict[Triple, float]
    sample_count: int


def pair_distance(p_m, p_n, norm: float = 1.0) -> float:
    """Euclidean distance between two points divided by `norm`."""
    if norm <= 0:
        raise ValueError("norm must be > 0")
    p_m = np.asarray(p_m, dtype=np.float64)
    p_n = np.asarray(p_n, dtype=np.float64)
    return float(np.linalg.norm(p_m - p_n) / norm)


def angle_vector(p_m, p_n, p_l) -> np.ndarray:
    """Unit vector (cos t, sin t) of the signed angle at vertex p_n.

    t is the angle from ray n->m to ray n->l, in (-pi, pi].
    """
    a = np.asarray(p_m, dtype=np.float64) - np.asarray(p_n, dtype=np.float64)
    b = np.asarray(p_l, dtype=np.float64) - np.asarray(p_n, dtype=np.float64)
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        raise ValueError("degenerate triple: endpoint coincides with vertex")
    t = np.arctan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])
    return np.array([np.cos(t), np.sin(t)])


def all_pairs(k: int) -> list[Pair]:
    return [(m, n) for m in range(k) for n in range(m + 1, k)]


def all_triples(k: int, window: int | None = None) -> list[Triple]:
    """Vertex triples, deduplicated over endpoint order (endpoints m < l).

    With `window`, only triples whose index span fits inside a sliding
    window of that width are enumerated, bounding cost for large K.
    """
    out = []
    for n in range(k):
        for m in range(k):
            if m == n:
                continue
            for l in range(m + 1, k):
                if l == n:
                    continue
                if window is not None and max(m, n, l) - min(m, n, l) >= window:
                    continue
                out.append((m, n, l))
    return out


def compute_relation_stats(dataset: list[KeypointSet], norms: list[float],
                           pairs: list[Pair] | None = None,
                           triples: list[Triple] | None = None,
                           triple_window: int | None = 8) -> RelationStats:
    """Population distance/angle dispersion statistics over a dataset.

    Distances are normalized per-sample by `norms` (image diagonal).
    Samples in which any keypoint of a relation is invisible are skipped
    for that relation; relations with < 2 valid samples are dropped.
    """
    if len(dataset) < 2:
        raise ValueError("need at least 2 samples")
    if len(norms) != len(dataset):
        raise ValueError("norms must match dataset length")
    k = dataset[0].k
    if any(s.k != k for s in dataset):
        raise ValueError("inconsistent keypoint counts in dataset")
    if pairs is None:
        pairs = all_pairs(k)
    if triples is None:
        triples = all_triples(k, triple_window)

    coords = np.stack([s.coords for s in dataset])            # (N, K, 2)
    vis = np.stack([s.visibility for s in dataset])           # (N, K)
    norm_arr = np.asarray(norms, dtype=np.float64)

    pair_mean: dict[Pair, float] = {}
    pair_std: dict[Pair, float] = {}
    for m, n in pairs:
        ok = vis[:, m] & vis[:, n]
        if ok.sum() < 2:
            continue
        d = np.linalg.norm(coords[ok, m] - coords[ok, n], axis=1) / norm_arr[ok]
        pair_mean[(m, n)] = float(d.mean())
        pair_std[(m, n)] = float(d.std())  # population std

    triple_std: dict[Triple, float] = {}
    for m, n, l in triples:
        ok = vis[:, m] & vis[:, n] & vis[:, l]
        if ok.sum() < 2:
            continue
        a = coords[ok, m] - coords[ok, n]
        b = coords[ok, l] - coords[ok, n]
        t = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0],
                       (a * b).sum(axis=1))
        r2 = np.cos(t).mean() ** 2 + np.sin(t).mean() ** 2
        triple_std[(m, n, l)] = float(np.sqrt(-np.log(r2))) if r2 > 0 else float("inf")

    return RelationStats(k=k, pair_mean=pair_mean, pair_std=pair_std,
                         triple_std=triple_std, sample_count=len(dataset))


def select_relations(stats: RelationStats, cfg: MorphologyConfig,
                     topology: RelationSets | None = None) -> RelationSets:
    """Pick the relation subsets the shape-prior loss is applied to."""
    mode = cfg.selection_mode
    if mode == "threshold":
        pairs = [p for p, s in stats.pair_std.items() if s < cfg.t_d]
        triples = [t for t, s in stats.triple_std.items() if s < cfg.t_a]
    elif mode == "top_k_low_variance":
        pairs = sorted(stats.pair_std, key=lambda p: (stats.pair_std[p], p))[:cfg.top_k]
        triples = sorted(stats.triple_std, key=lambda t: (stats.triple_std[t], t))[:cfg.top_k]
    elif mode == "top_k_high_variance":
        pairs = sorted(stats.pair_std, key=lambda p: (-stats.pair_std[p], p))[:cfg.top_k]
        triples = sorted(stats.triple_std, key=lambda t: (-stats.triple_std[t], t))[:cfg.top_k]
    elif mode == "adjacent_points":
        if topology is None:
            raise ValueError("adjacent_points selection requires a topology")
        pairs = list(topology.pairs)
        triples = list(topology.triples)
    else:  # pragma: no cover - guarded by config validation
        raise ValueError(mode)
    rel = RelationSets(sorted(pairs), sorted(triples))
    rel.validate(stats.k)
    return rel


def morphology_loss(pred: torch.Tensor, gt: torch.Tensor, rel: RelationSets,
                    cfg: MorphologyConfig, norm: float = 1.0) -> torch.Tensor:
    """Shape-prior loss between predicted and groundtruth coordinates.

    `pred` and `gt` are (K, 2) tensors; gradients flow through `pred`.
    Distance term: mean L1 gap of normalized pair distances. Angle term:
    mean (1 - u_pred . u_gt) over triples. Empty relation sets give 0.
    """
    if not rel.pairs and not rel.triples:
        log.warning("morphology_loss called with empty relation sets; returning 0")
        return pred.sum() * 0.0

    loss_d = pred.new_zeros(())
    if rel.pairs:
        idx = torch.as_tensor(rel.pairs, dtype=torch.long)
        d_pred = (pred[idx[:, 0]] - pred[idx[:, 1]]).norm(dim=1) / norm
        d_gt = (gt[idx[:, 0]] - gt[idx[:, 1]]).norm(dim=1) / norm
        loss_d = (d_pred - d_gt).abs().mean()

    loss_a = pred.new_zeros(())
    if rel.triples:
        idx = torch.as_tensor(rel.triples, dtype=torch.long)
        loss_a = (1.0 - (_angle_vectors(pred, idx) * _angle_vectors(gt, idx)).sum(dim=1)).mean()

    return loss_d + cfg.lambda_angle * loss_a


def _angle_vectors(coords: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
    a = coords[idx[:, 0]] - coords[idx[:, 1]]
    b = coords[idx[:, 2]] - coords[idx[:, 1]]
    t = torch.atan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], (a * b).sum(dim=1))
    return torch.stack([torch.cos(t), torch.sin(t)], dim=1)
