"""Conversions between coordinate-space keypoints and heatmap space.

Three representations:
  * target heatmaps — per-keypoint Gaussian bumps used as training targets,
  * interaction maps — per-keypoint Gaussian bumps on user-corrected
    channels only, zeros elsewhere,
  * decoded coordinates — sub-pixel peaks recovered with a differentiable
    local soft-argmax (softmax-weighted centroid around the hard argmax).

Heatmap tensors are (K, H, W); entry [k, y, x] corresponds to pixel (x, y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from interkey.keypoints import KeypointSet

BCE_EPS = 1e-6


@dataclass(frozen=True)
class CodecConfig:
    sigma: float = 2.0          # Gaussian std in pixels
    window_radius: int = 5      # half-window for local soft-argmax
    temperature: float = 0.1    # soft-argmax sharpness (lower = sharper)

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


def _gaussian_channel(x: float, y: float, width: int, height: int, sigma: float,
                      dtype: torch.dtype) -> torch.Tensor:
    gy = torch.arange(height, dtype=dtype).unsqueeze(1)
    gx = torch.arange(width, dtype=dtype).unsqueeze(0)
    return torch.exp(-((gx - x) ** 2 + (gy - y) ** 2) / (2.0 * sigma ** 2))


def encode_keypoints(kps: KeypointSet, cfg: CodecConfig, width: int, height: int,
                     k: int | None = None, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Encode keypoints as a (K, H, W) stack of Gaussian bumps.

    Invisible keypoints produce all-zero channels.
    """
    if k is not None and kps.k != k:
        raise ValueError(f"expected {k} keypoints, got {kps.k}")
    hm = torch.zeros(kps.k, height, width, dtype=dtype)
    for n in range(kps.k):
        if not kps.visibility[n]:
            continue
        x, y = float(kps.coords[n, 0]), float(kps.coords[n, 1])
        if not (0 <= x < width and 0 <= y < height):
            raise ValueError(f"keypoint {n} at ({x}, {y}) outside [0,{width})x[0,{height})")
        hm[n] = _gaussian_channel(x, y, width, height, cfg.sigma, dtype)
    return hm


def encode_interaction(modified: list[tuple[int, float, float]], cfg: CodecConfig,
                       k: int, width: int, height: int,
                       dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Encode user corrections as a (K, H, W) interaction map.

    `modified` holds (keypoint_index, x, y) with 0-based distinct indices.
    Corrected channels carry a Gaussian bump peaking at 1 exactly at the
    clicked pixel; all other channels are zero.
    """
    indices = [m[0] for m in modified]
    if len(set(indices)) != len(indices):
        raise ValueError("duplicate keypoint index in modification list")
    u = torch.zeros(k, height, width, dtype=dtype)
    for idx, x, y in modified:
        if not 0 <= idx < k:
            raise ValueError(f"keypoint index {idx} out of range [0, {k})")
        if not (0 <= x < width and 0 <= y < height):
            raise ValueError(f"click ({x}, {y}) outside image")
        u[idx] = _gaussian_channel(float(x), float(y), width, height, cfg.sigma, dtype)
    return u


def decode_local_softargmax(hm: torch.Tensor, cfg: CodecConfig
                            ) -> tuple[torch.Tensor, torch.Tensor]:
    """Decode a (K, H, W) heatmap to sub-pixel (K, 2) coordinates.

    Per channel: locate the hard argmax, then take the softmax-weighted
    coordinate centroid over the (2w+1)^2 window around it (softmax of
    values / temperature, window clipped at image borders). Differentiable
    w.r.t. heatmap values; the argmax location is treated as constant.

    Returns (coords, low_confidence) where low_confidence marks channels
    whose peak value is (numerically) zero.
    """
    if not torch.isfinite(hm).all():
        raise ValueError("heatmap contains non-finite values")
    k, height, width = hm.shape
    w = cfg.window_radius
    coords = []
    low_conf = torch.zeros(k, dtype=torch.bool)
    for n in range(k):
        ch = hm[n]
        flat_idx = int(torch.argmax(ch.detach()).item())
        py, px = divmod(flat_idx, width)
        low_conf[n] = bool(ch.detach().max() <= 1e-12)
        y0, y1 = max(0, py - w), min(height, py + w + 1)
        x0, x1 = max(0, px - w), min(width, px + w + 1)
        win = ch[y0:y1, x0:x1]
        weights = torch.softmax((win / cfg.temperature).reshape(-1), dim=0).reshape(win.shape)
        gy = torch.arange(y0, y1, dtype=hm.dtype).unsqueeze(1)
        gx = torch.arange(x0, x1, dtype=hm.dtype).unsqueeze(0)
        coords.append(torch.stack([(weights * gx).sum(), (weights * gy).sum()]))
    return torch.stack(coords), low_conf


def decode_to_keypoints(hm: torch.Tensor, cfg: CodecConfig) -> KeypointSet:
    coords, _ = decode_local_softargmax(hm, cfg)
    return KeypointSet(coords.detach().cpu().numpy())


def heatmap_bce(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy between predicted and target heatmaps."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    if not (torch.isfinite(pred).all() and torch.isfinite(target).all()):
        raise ValueError("non-finite heatmap values")
    p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS)
    return -(target * torch.log(p) + (1.0 - target) * torch.log1p(-p)).mean()


def gaussian_peak_value(dist: float, sigma: float) -> float:
    """Closed-form bump value at radial distance `dist` from a keypoint."""
    return math.exp(-(dist ** 2) / (2.0 * sigma ** 2))
