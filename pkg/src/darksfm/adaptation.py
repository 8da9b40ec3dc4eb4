"""Teacher-student feature consistency arithmetic and low-rank weight merging.

Operates on plain tensors loaded from interchange files; no training loop
or network inference lives here. The consistency objective compares a
reference (teacher) feature bundle against two student bundles, one from
degraded inputs and one from clean inputs, the latter acting as a
regularizer whose strength is a scalar multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ShapeMismatchError

TENSOR_NAMES = ("encoder", "decoder", "correspondence")


@dataclass
class FeatureBundle:
    """Per-view-pair tensors: encoder, decoder, and correspondence features.

    Each tensor is (2, height, width, depth); the leading (2, H, W) shape
    must agree across the three.
    """

    encoder: np.ndarray
    decoder: np.ndarray
    correspondence: np.ndarray

    def __post_init__(self):
        tensors = []
        for name in TENSOR_NAMES:
            t = np.asarray(getattr(self, name), dtype=np.float64)
            if t.ndim != 4 or t.shape[0] != 2:
                raise ShapeMismatchError(f"{name} tensor must be (2, H, W, D)")
            if not np.isfinite(t).all():
                raise ValueError(f"{name} tensor contains non-finite values")
            tensors.append(t)
            setattr(self, name, t)
        lead = {t.shape[:3] for t in tensors}
        if len(lead) != 1:
            raise ShapeMismatchError(f"leading (2, H, W) shapes differ: {sorted(lead)}")

    def tensors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.encoder, self.decoder, self.correspondence


class DistillLoss(NamedTuple):
    total: float
    noisy: float
    clean: float


def _bundle_sq_distance(a: FeatureBundle, b: FeatureBundle, per_tensor_mean: bool) -> float:
    acc = 0.0
    for name, ta, tb in zip(TENSOR_NAMES, a.tensors(), b.tensors()):
        if ta.shape != tb.shape:
            raise ShapeMismatchError(
                f"{name} tensor shapes differ: {ta.shape} vs {tb.shape}"
            )
        d = ta - tb
        term = float(np.sum(d * d))
        acc += term / d.size if per_tensor_mean else term
    return acc


def distill_loss(
    teacher: FeatureBundle,
    student_noisy: FeatureBundle,
    student_clean: FeatureBundle,
    lambda_clean: float = 0.3,
    per_tensor_mean: bool = False,
) -> DistillLoss:
    """Sum of squared feature differences, with a weighted clean-input term.

    loss_noisy and loss_clean are squared Frobenius distances between the
    teacher bundle and each student bundle, summed over all three tensors;
    total = loss_noisy + lambda_clean * loss_clean. ``per_tensor_mean``
    switches each tensor's contribution to a mean over its elements,
    equalizing tensors of different depth.
    """
    l_noisy = _bundle_sq_distance(teacher, student_noisy, per_tensor_mean)
    l_clean = _bundle_sq_distance(teacher, student_clean, per_tensor_mean)
    return DistillLoss(
        total=l_noisy + lambda_clean * l_clean, noisy=l_noisy, clean=l_clean
    )


@dataclass
class LoraDelta:
    """Frozen base matrix plus a rank-r update: W + (alpha / r) * up @ down."""

    base: np.ndarray
    down: np.ndarray
    up: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=np.float64)
        self.down = np.asarray(self.down, dtype=np.float64)
        self.up = np.asarray(self.up, dtype=np.float64)
        m, n = self.base.shape
        r = self.down.shape[0]
        if r > min(m, n):
            raise ShapeMismatchError(f"rank {r} exceeds min(m, n) = {min(m, n)}")
        if self.down.shape != (r, n):
            raise ShapeMismatchError(f"down must be (r, n) = ({r}, {n})")
        if self.up.shape != (m, r):
            raise ShapeMismatchError(f"up must be (m, r) = ({m}, {r})")

    @property
    def rank(self) -> int:
        return self.down.shape[0]


def lora_merge(delta: LoraDelta) -> np.ndarray:
    """Fold the scaled low-rank update into the base matrix."""
    return delta.base + (delta.alpha / delta.rank) * (delta.up @ delta.down)
