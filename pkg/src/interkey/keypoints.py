"""Keypoint container shared across the package.

Coordinates are float pixels with origin at the top-left corner,
x rightward and y downward. Arrays of shape (K, 2) hold (x, y) rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class KeypointSet:
    """Ordered set of K 2D keypoints with per-point visibility."""

    coords: np.ndarray  # (K, 2) float64, (x, y)
    visibility: np.ndarray | None = None  # (K,) bool; None means all visible

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ValueError(f"coords must have shape (K, 2), got {self.coords.shape}")
        if self.visibility is None:
            self.visibility = np.ones(len(self.coords), dtype=bool)
        else:
            self.visibility = np.asarray(self.visibility, dtype=bool)
            if self.visibility.shape != (len(self.coords),):
                raise ValueError("visibility length must match coords")

    @property
    def k(self) -> int:
        return len(self.coords)

    def clamped(self, width: int, height: int) -> "KeypointSet":
        """Clamp visible coordinates into [0, W) x [0, H)."""
        c = self.coords.copy()
        c[:, 0] = np.clip(c[:, 0], 0.0, width - 1e-6)
        c[:, 1] = np.clip(c[:, 1], 0.0, height - 1e-6)
        return KeypointSet(c, self.visibility.copy())

    def copy(self) -> "KeypointSet":
        return KeypointSet(self.coords.copy(), self.visibility.copy())
