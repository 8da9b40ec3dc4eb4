"""Trajectory, depth, and photometric evaluation.

Estimated trajectories are registered to the reference with a closed-form
Sim(3) fit on camera centers before computing the absolute error; relative
errors cancel any global alignment by construction. Depth metrics follow
the usual scale-aware conventions, and photometric comparison optionally
applies a median-based per-channel affine alignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ShapeMismatchError
from .geometry import Pose
from .raw_pipeline import LinearImage
from .rotations import rotation_angle
from .sim3 import Sim3, estimate_sim3_weighted


@dataclass
class Trajectory:
    """Ordered list of named camera poses (world-from-camera)."""

    names: list[str]
    poses: list[Pose]

    def __post_init__(self):
        if len(self.names) != len(self.poses):
            raise ValueError("names and poses must align")
        if len(set(self.names)) != len(self.names):
            raise ValueError("trajectory names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def centers(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)

    def lookup(self) -> dict[str, Pose]:
        return dict(zip(self.names, self.poses))

    def transformed(self, sim: Sim3) -> "Trajectory":
        R = sim.rotation_matrix()
        poses = [
            Pose.from_rt(R @ p.rotation_matrix(), sim.apply(p.translation))
            for p in self.poses
        ]
        return Trajectory(names=list(self.names), poses=poses)


def _common_names(est: Trajectory, ref: Trajectory) -> list[str]:
    est_set = set(est.names)
    return [n for n in ref.names if n in est_set]


def align_sim3(est: Trajectory, ref: Trajectory) -> tuple[Sim3, Trajectory]:
    """Fit est -> ref on camera centers (unit weights); returns the transform
    and the transformed estimate."""
    common = _common_names(est, ref)
    if len(common) < 3:
        raise InsufficientDataError(
            f"Sim(3) alignment needs >= 3 common cameras, got {len(common)}"
        )
    est_lut, ref_lut = est.lookup(), ref.lookup()
    src = np.array([est_lut[n].translation for n in common])
    dst = np.array([ref_lut[n].translation for n in common])
    sim = estimate_sim3_weighted(src, dst)
    return sim, est.transformed(sim)


def ate(est_aligned: Trajectory, ref: Trajectory) -> float:
    """RMSE of camera-center distances over common names, in world units."""
    common = _common_names(est_aligned, ref)
    if not common:
        raise InsufficientDataError("no common camera names")
    est_lut, ref_lut = est_aligned.lookup(), ref.lookup()
    d2 = [
        float(np.sum((est_lut[n].translation - ref_lut[n].translation) ** 2))
        for n in common
    ]
    return math.sqrt(sum(d2) / len(d2))


def rpe(
    est_aligned: Trajectory,
    ref: Trajectory,
    stride: int = 1,
    reduction: str = "rmse",
) -> tuple[float, float]:
    """Relative pose error over consecutive common frames.

    For frames i and i+stride (in reference order), the error transform is
    delta = (ref_i^-1 ref_{i+stride})^-1 (est_i^-1 est_{i+stride}).
    Returns (translational component in world units, rotational component
    in degrees), reduced by RMSE (default) or mean.
    """
    if reduction not in ("rmse", "mean"):
        raise ValueError(f"unknown reduction {reduction!r}")
    common = _common_names(est_aligned, ref)
    if len(common) < stride + 1:
        raise InsufficientDataError("need at least two common frames per step")
    est_lut, ref_lut = est_aligned.lookup(), ref.lookup()
    t_errs, r_errs = [], []
    for a, b in zip(common[:-stride], common[stride:]):
        d_ref = np.linalg.inv(ref_lut[a].matrix()) @ ref_lut[b].matrix()
        d_est = np.linalg.inv(est_lut[a].matrix()) @ est_lut[b].matrix()
        delta = np.linalg.inv(d_ref) @ d_est
        t_errs.append(float(np.linalg.norm(delta[:3, 3])))
        r_errs.append(math.degrees(rotation_angle(delta[:3, :3])))
    t = np.array(t_errs)
    r = np.array(r_errs)
    if reduction == "rmse":
        return float(np.sqrt(np.mean(t**2))), float(np.sqrt(np.mean(r**2)))
    return float(t.mean()), float(r.mean())


@dataclass
class DepthPair:
    """Predicted and reference depth maps with a shared validity mask."""

    predicted: np.ndarray
    reference: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted, dtype=np.float64)
        self.reference = np.asarray(self.reference, dtype=np.float64)
        if self.predicted.shape != self.reference.shape:
            raise ShapeMismatchError("depth maps must share a shape")
        if self.mask is None:
            self.mask = np.ones(self.predicted.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.predicted.shape:
                raise ShapeMismatchError("mask shape must match depth maps")
        if self.mask.any():
            if (self.reference[self.mask] <= 0).any() or (
                self.predicted[self.mask] <= 0
            ).any():
                raise ValueError("valid depths must be positive")


def depth_metrics(pair: DepthPair) -> tuple[float, float]:
    """(AbsRel, fraction of depths within a strict 1.25x of the reference)."""
    if not pair.mask.any():
        raise InsufficientDataError("empty validity mask")
    pred = pair.predicted[pair.mask]
    ref = pair.reference[pair.mask]
    absrel = float(np.mean(np.abs(pred - ref) / ref))
    ratio = np.maximum(pred / ref, ref / pred)
    delta125 = float(np.mean(ratio < 1.25))
    return absrel, delta125


def align_channels_median(pred: LinearImage, ref: LinearImage) -> LinearImage:
    """Per-channel scale and shift alignment using medians.

    The scale is the median ratio of absolute deviations from each
    channel's median (a MAD-ratio estimator, robust to sparse outliers);
    the shift then matches the medians. A channel with no spread in the
    prediction falls back to shift-only alignment with scale 1.
    """
    if pred.data.shape != ref.data.shape:
        raise ShapeMismatchError("images must share a shape")
    out = np.empty_like(pred.data)
    for c in range(pred.channels):
        p = pred.data[c]
        r = ref.data[c]
        mp = np.median(p)
        mr = np.median(r)
        dp = np.abs(p - mp)
        usable = dp > 1e-12
        if usable.any():
            s = float(np.median(np.abs(r[usable] - mr) / dp[usable]))
            if s <= 0:
                s = 1.0
        else:
            s = 1.0
        shift = mr - s * mp
        out[c] = s * p + shift
    return LinearImage.from_array(out, no_clip=pred.no_clip)


def psnr(pred: LinearImage, ref: LinearImage, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the images are identical."""
    if pred.data.shape != ref.data.shape:
        raise ShapeMismatchError("images must share a shape")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((pred.data - ref.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
