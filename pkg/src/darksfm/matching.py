"""Dense-descriptor correspondence extraction and epipolar scoring.

Matching is reciprocal nearest-neighbor under cosine similarity on a
subsampled pixel grid: a pair survives only if each endpoint is the
other's best match. A patch-intensity fallback descriptor lets the whole
pipeline run without any learned feature exporter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .raw_pipeline import LinearImage


@dataclass
class FeatureMap:
    """Per-pixel descriptor grid, shape (height, width, dim).

    ``confidence`` (height, width) is optional; ``normalized`` asserts each
    descriptor has unit L2 norm (zero-norm descriptors mark degenerate
    pixels and never match).
    """

    width: int
    height: int
    dim: int
    data: np.ndarray
    confidence: np.ndarray | None = None
    normalized: bool = False

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.shape != (self.height, self.width, self.dim):
            raise ShapeMismatchError(
                f"data shape {self.data.shape} != (height, width, dim)"
            )
        if not np.isfinite(self.data).all():
            raise ValueError("feature map contains non-finite values")
        if self.confidence is not None:
            self.confidence = np.ascontiguousarray(self.confidence, dtype=np.float64)
            if self.confidence.shape != (self.height, self.width):
                raise ShapeMismatchError("confidence plane shape mismatch")
        if self.normalized:
            norms = np.linalg.norm(self.data, axis=-1)
            live = norms > 0
            if live.any() and np.abs(norms[live] - 1.0).max() > 1e-5:
                raise ValueError("normalized flag set but descriptors are not unit norm")

    @classmethod
    def from_array(
        cls,
        data: np.ndarray,
        confidence: np.ndarray | None = None,
        normalized: bool = False,
    ) -> "FeatureMap":
        data = np.asarray(data, dtype=np.float64)
        h, w, d = data.shape
        return cls(
            width=w, height=h, dim=d, data=data, confidence=confidence, normalized=normalized
        )


@dataclass(frozen=True)
class Correspondence:
    """Matched pixel pair: p1 in image 1, p2 in image 2, as (x, y); sub-pixel allowed."""

    p1: tuple[float, float]
    p2: tuple[float, float]
    score: float = 0.0


def corr_arrays(matches: list[Correspondence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unzip a correspondence list into (N,2) p1, (N,2) p2 and (N,) scores."""
    if not matches:
        return np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0)
    p1 = np.array([m.p1 for m in matches], dtype=np.float64)
    p2 = np.array([m.p2 for m in matches], dtype=np.float64)
    s = np.array([m.score for m in matches], dtype=np.float64)
    return p1, p2, s


def _grid_descriptors(f: FeatureMap, subsample: int) -> tuple[np.ndarray, np.ndarray]:
    """Subsample the pixel grid and return unit descriptors plus (x, y) coords.

    Zero-norm descriptors mark degenerate pixels; they are not valid
    neighbors, so they are dropped from the candidate pool entirely.
    """
    off = subsample // 2
    ys = np.arange(off, f.height, subsample)
    xs = np.arange(off, f.width, subsample)
    d = f.data[np.ix_(ys, xs)].reshape(-1, f.dim)
    norms = np.linalg.norm(d, axis=1)
    live = norms > 0
    d = d[live] / norms[live, None]
    gx, gy = np.meshgrid(xs, ys)
    coords = np.stack([gx.ravel(), gy.ravel()], axis=1).astype(np.float64)
    return d, coords[live]


def reciprocal_match(
    f1: FeatureMap, f2: FeatureMap, subsample: int = 8
) -> list[Correspondence]:
    """Mutual nearest neighbors by cosine similarity over subsampled grids.

    Pair (i, j) is kept iff j is i's best match in image 2 and i is j's
    best match in image 1. Output is sorted by descending score, ties
    broken by image-1 grid index, so it is order-deterministic.
    """
    if f1.dim != f2.dim:
        raise ShapeMismatchError(f"descriptor dims differ: {f1.dim} vs {f2.dim}")
    if subsample < 1:
        raise ValueError("subsample must be >= 1")
    d1, c1 = _grid_descriptors(f1, subsample)
    d2, c2 = _grid_descriptors(f2, subsample)
    if d1.shape[0] == 0 or d2.shape[0] == 0:
        return []
    sims = d1 @ d2.T
    nn12 = np.argmax(sims, axis=1)
    nn21 = np.argmax(sims, axis=0)
    idx1 = np.arange(d1.shape[0])
    mutual = nn21[nn12[idx1]] == idx1
    keep = np.flatnonzero(mutual)
    scores = sims[keep, nn12[keep]]
    order = np.lexsort((keep, -scores))
    return [
        Correspondence(
            p1=(float(c1[i, 0]), float(c1[i, 1])),
            p2=(float(c2[nn12[i], 0]), float(c2[nn12[i], 1])),
            score=float(sims[i, nn12[i]]),
        )
        for i in keep[order]
    ]


def fallback_descriptors(img: LinearImage, patch: int = 7) -> FeatureMap:
    """Mean-subtracted, L2-normalized gray patch descriptors (zero-padded).

    A constant window has zero variance, which leaves a zero descriptor;
    such pixels are flagged degenerate through a zero confidence value.
    """
    if patch < 3 or patch % 2 == 0:
        raise ValueError("patch must be an odd integer >= 3")
    gray = img.data.mean(axis=0)
    r = patch // 2
    padded = np.pad(gray, r, mode="constant")
    h, w = gray.shape
    windows = np.empty((h, w, patch * patch))
    k = 0
    for dy in range(patch):
        for dx in range(patch):
            windows[:, :, k] = padded[dy : dy + h, dx : dx + w]
            k += 1
    windows -= windows.mean(axis=-1, keepdims=True)
    norms = np.linalg.norm(windows, axis=-1, keepdims=True)
    desc = np.where(norms > 0, windows / np.where(norms > 0, norms, 1.0), 0.0)
    confidence = (norms[..., 0] > 0).astype(np.float64)
    return FeatureMap.from_array(desc, confidence=confidence, normalized=True)


def _point_line_distance(point_h: np.ndarray, line: np.ndarray) -> float:
    norm = math.hypot(line[0], line[1])
    if norm == 0.0:
        return math.inf
    return abs(float(point_h @ line)) / norm


def symmetric_epipolar_distance(c: Correspondence, F: np.ndarray) -> float:
    """Mean of the two perpendicular point-to-epipolar-line distances, in pixels.

    Degenerate epipolar lines (zero normal) yield +inf.
    """
    F = np.asarray(F, dtype=np.float64)
    if not F.any():
        raise ValueError("fundamental matrix must be non-zero")
    p1 = np.array([c.p1[0], c.p1[1], 1.0])
    p2 = np.array([c.p2[0], c.p2[1], 1.0])
    d2 = _point_line_distance(p2, F @ p1)
    d1 = _point_line_distance(p1, F.T @ p2)
    return 0.5 * (d1 + d2)


def symmetric_epipolar_distances(
    p1: np.ndarray, p2: np.ndarray, F: np.ndarray
) -> np.ndarray:
    """Vectorized SED for (N, 2) pixel arrays; used by the RANSAC scorer."""
    F = np.asarray(F, dtype=np.float64)
    n = p1.shape[0]
    h1 = np.column_stack([p1, np.ones(n)])
    h2 = np.column_stack([p2, np.ones(n)])
    l2 = h1 @ F.T  # epipolar lines in image 2
    l1 = h2 @ F  # epipolar lines in image 1
    n2 = np.hypot(l2[:, 0], l2[:, 1])
    n1 = np.hypot(l1[:, 0], l1[:, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = np.abs(np.sum(h2 * l2, axis=1)) / n2
        d1 = np.abs(np.sum(h1 * l1, axis=1)) / n1
    d2 = np.where(n2 == 0, np.inf, d2)
    d1 = np.where(n1 == 0, np.inf, d1)
    return 0.5 * (d1 + d2)
