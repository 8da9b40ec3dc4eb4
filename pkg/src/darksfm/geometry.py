"""Pinhole cameras, essential-matrix RANSAC, pose recovery, triangulation.

The two-view solver is a normalized eight-point estimator inside a seeded
RANSAC loop scored by symmetric epipolar distance in pixels. It backs the
feature-only bootstrap path (no external pointmaps) and the geometry
checks used throughout the tests. The minimal solver is isolated in
``eight_point``; a five-point variant could replace it behind the same
RANSAC loop.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousPoseError,
    DegenerateGeometryError,
    InsufficientDataError,
    LowParallaxError,
    ShapeMismatchError,
)
from .matching import Correspondence, corr_arrays, symmetric_epipolar_distances
from .rotations import matrix_to_quat, quat_to_matrix

RANSAC_CONFIDENCE = 0.999


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def normalize(self, pixels: np.ndarray) -> np.ndarray:
        """Map (N, 2) pixel coordinates to normalized camera coordinates."""
        p = np.asarray(pixels, dtype=np.float64)
        return (p - [self.cx, self.cy]) / [self.fx, self.fy]

    def warn_if_principal_point_outside(self, width: int, height: int) -> None:
        if not (0 <= self.cx < width and 0 <= self.cy < height):
            warnings.warn(
                f"principal point ({self.cx}, {self.cy}) outside {width}x{height} image",
                stacklevel=2,
            )


@dataclass
class Pose:
    """World-from-camera rigid transform: unit quaternion (x, y, z, w) + translation.

    ``translation`` is the camera center expressed in world coordinates.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        n = np.linalg.norm(self.rotation)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {n} deviates from 1 by more than 1e-9")

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "Pose":
        T = np.asarray(T, dtype=np.float64)
        return cls(rotation=matrix_to_quat(T[:3, :3]), translation=T[:3, 3].copy())

    @classmethod
    def from_rt(cls, R: np.ndarray, t: np.ndarray) -> "Pose":
        return cls(rotation=matrix_to_quat(R), translation=np.asarray(t, dtype=np.float64))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation_matrix()
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "Pose":
        R = self.rotation_matrix()
        return Pose.from_rt(R.T, -R.T @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """Return self @ other as transforms."""
        return Pose.from_matrix(self.matrix() @ other.matrix())

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply world-from-camera to (N, 3) camera-frame points."""
        return points @ self.rotation_matrix().T + self.translation

    def copy(self) -> "Pose":
        return Pose(rotation=self.rotation.copy(), translation=self.translation.copy())


@dataclass
class PointMap:
    """Dense per-pixel 3D points in the local camera frame, with confidences."""

    width: int
    height: int
    points: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        self.confidence = np.ascontiguousarray(self.confidence, dtype=np.float64)
        if self.points.shape != (self.height, self.width, 3):
            raise ShapeMismatchError("points shape must be (height, width, 3)")
        if self.confidence.shape != (self.height, self.width):
            raise ShapeMismatchError("confidence shape must be (height, width)")
        if (self.confidence < 0).any():
            raise ValueError("confidence must be non-negative")

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.points).all(axis=-1) & (self.confidence > 0)

    def lookup(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-pixel lookup for (N, 2) coordinates.

        Returns (points (N, 3), confidence (N,)); out-of-bounds coordinates
        get zero confidence.
        """
        xy = np.asarray(xy, dtype=np.float64)
        ix = np.rint(xy[:, 0]).astype(int)
        iy = np.rint(xy[:, 1]).astype(int)
        inside = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        pts = np.zeros((xy.shape[0], 3))
        conf = np.zeros(xy.shape[0])
        pts[inside] = self.points[iy[inside], ix[inside]]
        conf[inside] = self.confidence[iy[inside], ix[inside]]
        finite = np.isfinite(pts).all(axis=1)
        conf = np.where(finite, conf, 0.0)
        return pts, conf


def camera_projection_matrix(k: Intrinsics, pose: Pose) -> np.ndarray:
    """3x4 projection matrix mapping homogeneous world points to pixels."""
    R_cw = pose.rotation_matrix().T
    P = np.empty((3, 4))
    P[:, :3] = R_cw
    P[:, 3] = -R_cw @ pose.translation
    return k.matrix() @ P


def project_points(k: Intrinsics, pose: Pose, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (N, 3) world points; returns ((N, 2) pixels, (N,) depths)."""
    R_cw = pose.rotation_matrix().T
    x_cam = (np.asarray(points, dtype=np.float64) - pose.translation) @ R_cw.T
    depths = x_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = x_cam[:, :2] / depths[:, None]
    pixels = uv * [k.fx, k.fy] + [k.cx, k.cy]
    return pixels, depths


def _hartley_normalize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Translate centroid to origin, scale mean radius to sqrt(2)."""
    centroid = x.mean(axis=0)
    centered = x - centroid
    mean_dist = np.mean(np.linalg.norm(centered, axis=1))
    s = np.sqrt(2.0) / mean_dist if mean_dist > 0 else 1.0
    T = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return centered * s, T


def _epipolar_design_matrix(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    n = x1.shape[0]
    h1 = np.column_stack([x1, np.ones(n)])
    h2 = np.column_stack([x2, np.ones(n)])
    # row-major kron: constraint h2^T E h1 = 0
    return (h2[:, :, None] * h1[:, None, :]).reshape(n, 9)


def eight_point(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Normalized eight-point estimate of E with x2^T E x1 = 0.

    Inputs are (N >= 8, 2) points in normalized camera coordinates. The
    returned matrix is projected onto the essential manifold with singular
    values (1, 1, 0).
    """
    if x1.shape[0] < 8:
        raise InsufficientDataError("eight-point needs at least 8 correspondences")
    n1, T1 = _hartley_normalize(x1)
    n2, T2 = _hartley_normalize(x2)
    A = _epipolar_design_matrix(n1, n2)
    _, _, vt = np.linalg.svd(A)
    E = vt[-1].reshape(3, 3)
    E = T2.T @ E @ T1
    return project_to_essential(E)


def project_to_essential(E: np.ndarray) -> np.ndarray:
    """Nearest essential matrix: singular values forced to (1, 1, 0)."""
    u, s, vt = np.linalg.svd(E)
    if s[1] == 0:
        raise DegenerateGeometryError("rank-deficient epipolar estimate")
    return u @ np.diag([1.0, 1.0, 0.0]) @ vt


def fundamental_from_essential(E: np.ndarray, k1: Intrinsics, k2: Intrinsics) -> np.ndarray:
    K1i = np.linalg.inv(k1.matrix())
    K2i = np.linalg.inv(k2.matrix())
    return K2i.T @ E @ K1i


def _pure_rotation_nullity(x1: np.ndarray, x2: np.ndarray) -> int:
    """Count near-zero singular values of the epipolar design matrix.

    For correspondences explained by a pure rotation, every matrix of the
    form [t]x R satisfies the constraint, so the nullspace is at least
    three-dimensional.
    """
    A = _epipolar_design_matrix(x1, x2)
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s < 1e-9 * s[0]))


def estimate_essential_ransac(
    matches: list[Correspondence],
    k1: Intrinsics,
    k2: Intrinsics,
    threshold: float = 2.0,
    seed: int = 0,
    max_iters: int = 1000,
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded RANSAC over normalized eight-point minimal solves.

    Inliers are scored with symmetric epipolar distance (pixels) against
    F = K2^-T E K1^-1. The best model (most inliers; ties broken by lower
    inlier SED sum) is refit on its full inlier set and re-scored. Early
    exit once 99.9% confidence is reached. Deterministic for a fixed seed.

    Returns (E, boolean inlier mask).
    """
    n = len(matches)
    if n < 8:
        raise InsufficientDataError(f"RANSAC needs >= 8 matches, got {n}")
    p1, p2, _ = corr_arrays(matches)
    x1 = k1.normalize(p1)
    x2 = k2.normalize(p2)
    rng = np.random.Generator(np.random.PCG64(seed))
    best_count = -1
    best_sed_sum = np.inf
    best_mask = None
    needed = max_iters
    for it in range(max_iters):
        if it >= needed:
            break
        idx = rng.choice(n, size=8, replace=False)
        try:
            E = eight_point(x1[idx], x2[idx])
        except DegenerateGeometryError:
            continue
        F = fundamental_from_essential(E, k1, k2)
        sed = symmetric_epipolar_distances(p1, p2, F)
        mask = sed < threshold
        count = int(mask.sum())
        sed_sum = float(sed[mask].sum())
        if count > best_count or (count == best_count and sed_sum < best_sed_sum):
            best_count = count
            best_sed_sum = sed_sum
            best_mask = mask
            if count >= 8:
                w = count / n
                denom = np.log1p(-min(w**8, 1.0 - 1e-12))
                needed = min(
                    max_iters, int(np.ceil(np.log(1.0 - RANSAC_CONFIDENCE) / denom))
                )
    if best_mask is None or best_count < 8:
        raise DegenerateGeometryError("no valid essential model found")
    # refit on the winning inlier set, then re-score
    E = eight_point(x1[best_mask], x2[best_mask])
    F = fundamental_from_essential(E, k1, k2)
    sed = symmetric_epipolar_distances(p1, p2, F)
    mask = sed < threshold
    if mask.sum() >= 8 and _pure_rotation_nullity(x1[mask], x2[mask]) >= 3:
        raise DegenerateGeometryError(
            "matches consistent with a pure rotation; translation unobservable"
        )
    return E, mask


def _triangulate_batch_normalized(
    x1: np.ndarray, x2: np.ndarray, R: np.ndarray, t: np.ndarray
) -> np.ndarray:
    """DLT triangulation in normalized coordinates with P1 = [I|0], P2 = [R|t]."""
    n = x1.shape[0]
    P1 = np.hstack([np.eye(3), np.zeros((3, 1))])
    P2 = np.hstack([R, t[:, None]])
    A = np.empty((n, 4, 4))
    A[:, 0] = x1[:, 0, None] * P1[2] - P1[0]
    A[:, 1] = x1[:, 1, None] * P1[2] - P1[1]
    A[:, 2] = x2[:, 0, None] * P2[2] - P2[0]
    A[:, 3] = x2[:, 1, None] * P2[2] - P2[1]
    _, _, vt = np.linalg.svd(A)
    Xh = vt[:, -1, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        X = Xh[:, :3] / Xh[:, 3, None]
    return X


def recover_pose(
    E: np.ndarray,
    matches: list[Correspondence],
    k1: Intrinsics,
    k2: Intrinsics,
) -> tuple[Pose, np.ndarray]:
    """Disambiguate the four essential decompositions by cheirality.

    Returns the camera-2 pose expressed in camera 1's frame (world-from-
    camera with camera 1 as world) and the unit-norm translation of the
    camera-2-from-camera-1 transform. Raises when no candidate puts points
    in front of both cameras, when the winner leads by fewer than 2
    points, or when it still leaves more than a quarter of the points
    behind a camera (inconsistent or degenerate input).
    """
    if not matches:
        raise InsufficientDataError("pose recovery needs at least one match")
    p1, p2, _ = corr_arrays(matches)
    x1 = k1.normalize(p1)
    x2 = k2.normalize(p2)
    u, _, vt = np.linalg.svd(E)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    rotations = (u @ W @ vt, u @ W.T @ vt)
    t_unit = u[:, 2]
    counts = []
    candidates = []
    for R in rotations:
        for t in (t_unit, -t_unit):
            X = _triangulate_batch_normalized(x1, x2, R, t)
            finite = np.isfinite(X).all(axis=1)
            z1 = X[:, 2]
            z2 = (X @ R.T + t)[:, 2]
            counts.append(int(np.sum(finite & (z1 > 0) & (z2 > 0))))
            candidates.append((R, t))
    order = np.argsort(counts)[::-1]
    best, second = counts[order[0]], counts[order[1]]
    if best == 0:
        raise AmbiguousPoseError("no decomposition passes cheirality")
    if best - second <= 1:
        raise AmbiguousPoseError(
            f"cheirality tie: best candidate leads by {best - second} point(s)"
        )
    if best < 0.75 * len(matches):
        raise AmbiguousPoseError(
            f"best decomposition leaves {len(matches) - best} of {len(matches)} "
            "points behind a camera"
        )
    R, t = candidates[order[0]]
    pose = Pose.from_rt(R.T, -R.T @ t)
    return pose, t


def triangulate(
    p1: tuple[float, float] | np.ndarray,
    p2: tuple[float, float] | np.ndarray,
    pose1: Pose,
    pose2: Pose,
    k1: Intrinsics,
    k2: Intrinsics,
) -> np.ndarray:
    """Linear DLT triangulation of one correspondence into world coordinates."""
    baseline = np.linalg.norm(pose1.translation - pose2.translation)
    scale = 1.0 + max(
        np.linalg.norm(pose1.translation), np.linalg.norm(pose2.translation)
    )
    if baseline < 1e-12 * scale:
        raise LowParallaxError("camera centers coincide")
    d1 = pose1.rotation_matrix() @ np.append(k1.normalize(np.atleast_2d(p1))[0], 1.0)
    d2 = pose2.rotation_matrix() @ np.append(k2.normalize(np.atleast_2d(p2))[0], 1.0)
    d1 /= np.linalg.norm(d1)
    d2 /= np.linalg.norm(d2)
    angle = np.arccos(np.clip(abs(float(d1 @ d2)), -1.0, 1.0))
    if angle < 1e-8:
        raise LowParallaxError(f"ray parallax {angle:.2e} rad below 1e-8")
    P1 = camera_projection_matrix(k1, pose1)
    P2 = camera_projection_matrix(k2, pose2)
    A = np.empty((4, 4))
    A[0] = p1[0] * P1[2] - P1[0]
    A[1] = p1[1] * P1[2] - P1[1]
    A[2] = p2[0] * P2[2] - P2[0]
    A[3] = p2[1] * P2[2] - P2[1]
    _, _, vt = np.linalg.svd(A)
    Xh = vt[-1]
    if abs(Xh[3]) < 1e-14 * np.linalg.norm(Xh[:3]):
        raise LowParallaxError("triangulated point at infinity")
    return Xh[:3] / Xh[3]


def essential_from_pose(pose_21: Pose) -> np.ndarray:
    """Essential matrix [t]x R from the relative pose of camera 2 in camera 1.

    ``pose_21`` follows recover_pose's convention: world-from-camera-2 with
    camera 1 as the world frame.
    """
    R = pose_21.rotation_matrix().T
    t = -R @ pose_21.translation
    tx = np.array(
        [[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]]
    )
    return tx @ R


__all__ = [
    "Intrinsics",
    "Pose",
    "PointMap",
    "camera_projection_matrix",
    "project_points",
    "eight_point",
    "project_to_essential",
    "fundamental_from_essential",
    "estimate_essential_ransac",
    "recover_pose",
    "triangulate",
    "essential_from_pose",
]
