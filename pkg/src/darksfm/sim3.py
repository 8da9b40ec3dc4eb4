"""Similarity transforms and the closed-form weighted alignment solver.

Monocular reconstructions are defined only up to a global scale, rotation,
and translation, so both the coarse alignment stage and trajectory
evaluation reduce to the same weighted least-squares Sim(3) fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, InsufficientDataError
from .rotations import matrix_to_quat, quat_to_matrix


@dataclass
class Sim3:
    """scale * R @ x + t, with rotation stored as a unit quaternion (x, y, z, w)."""

    scale: float = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * (pts @ self.rotation_matrix().T) + self.translation

    def compose(self, other: "Sim3") -> "Sim3":
        """self after other: (self ∘ other)(x) = self(other(x))."""
        R1 = self.rotation_matrix()
        return Sim3(
            scale=self.scale * other.scale,
            rotation=matrix_to_quat(R1 @ other.rotation_matrix()),
            translation=self.scale * (R1 @ other.translation) + self.translation,
        )

    def inverse(self) -> "Sim3":
        R = self.rotation_matrix()
        return Sim3(
            scale=1.0 / self.scale,
            rotation=matrix_to_quat(R.T),
            translation=-(R.T @ self.translation) / self.scale,
        )

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.scale * self.rotation_matrix()
        T[:3, 3] = self.translation
        return T


def estimate_sim3_weighted(
    src: np.ndarray, dst: np.ndarray, weights: np.ndarray | None = None
) -> Sim3:
    """Closed-form weighted similarity fit minimizing sum w * ||s R src + t - dst||^2.

    Exact for noise-free similarity-related point sets. Reflections are
    ruled out by the determinant-sign correction on the SVD factors.
    Raises for fewer than 3 positively weighted points or a (near-)
    collinear configuration, where the rotation about the line is free.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ValueError("src and dst must both be (N, 3)")
    if weights is None:
        weights = np.ones(src.shape[0])
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if (weights < 0).any():
            raise ValueError("weights must be non-negative")
    live = weights > 0
    if live.sum() < 3:
        raise InsufficientDataError("need at least 3 positively weighted points")
    w = weights[live]
    x = src[live]
    y = dst[live]
    wsum = w.sum()
    mu_x = (w[:, None] * x).sum(axis=0) / wsum
    mu_y = (w[:, None] * y).sum(axis=0) / wsum
    xc = x - mu_x
    yc = y - mu_y
    cov = (yc * w[:, None]).T @ xc / wsum
    var_x = float((w * np.sum(xc * xc, axis=1)).sum() / wsum)
    if var_x == 0.0:
        raise DegenerateGeometryError("source points are coincident")
    u, d, vt = np.linalg.svd(cov)
    if d[1] <= 1e-12 * d[0]:
        raise DegenerateGeometryError("point configuration is (near-)collinear")
    sign = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    S = np.diag([1.0, 1.0, sign if sign != 0 else 1.0])
    R = u @ S @ vt
    scale = float(np.trace(np.diag(d) @ S)) / var_x
    if scale <= 0:
        raise DegenerateGeometryError("non-positive scale; sets are not similar")
    t = mu_y - scale * (R @ mu_x)
    return Sim3(scale=scale, rotation=matrix_to_quat(R), translation=t)
