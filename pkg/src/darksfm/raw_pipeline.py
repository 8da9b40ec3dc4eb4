"""Raw Bayer ingestion and the minimal ISP.

The preprocessing chain mirrors a mosaicked low-light capture workflow:
demosaic by strict subsampling (no interpolation), optional area
downsampling, normalization by a fixed 14-bit scale, and a display ISP of
black-level subtraction, clipping, white balance, and power-law gamma.
Skipping the clip step keeps negative, noise-dominated samples intact for
reconstruction; only display rendering clips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ShapeMismatchError, UnsupportedFormatError

# Default sensor bit depth; samples are normalized by 1 / (2**14 - 1).
BIT_DEPTH = 14
FULL_SCALE = float(2**BIT_DEPTH - 1)

# 2x2 quad layout per pattern, row-major: which color sits at each site.
CFA_LAYOUTS: dict[str, tuple[str, str, str, str]] = {
    "RGGB": ("R", "G", "G", "B"),
    "BGGR": ("B", "G", "G", "R"),
    "GRBG": ("G", "R", "B", "G"),
    "GBRG": ("G", "B", "R", "G"),
}


@dataclass
class RawImage:
    """Single mosaicked sensor frame plus the metadata needed to linearize it.

    ``data`` holds 16-bit unsigned samples, row-major, shape (height, width).
    ``black_level`` is one DN value per CFA site in quad order (matching
    ``CFA_LAYOUTS[cfa_pattern]``).
    """

    width: int
    height: int
    cfa_pattern: str
    data: np.ndarray
    black_level: np.ndarray
    white_level: float
    exposure_time: float = 0.0
    iso: float = 0.0

    def __post_init__(self):
        if self.cfa_pattern not in CFA_LAYOUTS:
            raise UnsupportedFormatError(f"unknown CFA pattern {self.cfa_pattern!r}")
        if self.width % 2 or self.height % 2:
            raise DimensionError(
                f"Bayer frames need even dimensions, got {self.width}x{self.height}"
            )
        self.data = np.ascontiguousarray(self.data, dtype=np.uint16)
        if self.data.shape != (self.height, self.width):
            raise ShapeMismatchError(
                f"data shape {self.data.shape} != (height, width) ({self.height}, {self.width})"
            )
        self.black_level = np.broadcast_to(
            np.asarray(self.black_level, dtype=np.float64), (4,)
        ).copy()
        if not self.black_level.max() < self.white_level:
            raise ValueError("black level must be below white level")
        if self.data.max(initial=0) > self.white_level:
            raise ValueError("samples above white level")


@dataclass
class LinearImage:
    """Linear-domain planar image, shape (channels, height, width).

    Samples normally live in [0, 1]; ``no_clip`` marks images whose black
    level was subtracted without clipping, so negatives are legitimate.
    """

    width: int
    height: int
    channels: int
    data: np.ndarray
    no_clip: bool = False

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.shape != (self.channels, self.height, self.width):
            raise ShapeMismatchError(
                f"data shape {self.data.shape} != (channels, height, width) "
                f"({self.channels}, {self.height}, {self.width})"
            )
        if not np.isfinite(self.data).all():
            raise ValueError("linear image contains non-finite samples")

    @classmethod
    def from_array(cls, data: np.ndarray, no_clip: bool = False) -> "LinearImage":
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 2:
            data = data[None]
        c, h, w = data.shape
        return cls(width=w, height=h, channels=c, data=data, no_clip=no_clip)


@dataclass
class IspConfig:
    """Display-rendering parameters.

    Levels are expressed in the same units as the image being processed
    (DN for raw-domain images, normalized units after the fixed scale).
    """

    black_level: np.ndarray = field(default_factory=lambda: np.zeros(3))
    white_level: float = 1.0
    white_balance_gains: np.ndarray = field(default_factory=lambda: np.ones(3))
    gamma: float = 1.0 / 2.2
    clip: bool = True

    def __post_init__(self):
        self.black_level = np.broadcast_to(
            np.asarray(self.black_level, dtype=np.float64), (3,)
        ).copy()
        self.white_balance_gains = np.broadcast_to(
            np.asarray(self.white_balance_gains, dtype=np.float64), (3,)
        ).copy()
        if not (self.white_balance_gains > 0).all():
            raise ValueError("white balance gains must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")


def demosaic_subsample(raw: RawImage, scale: float | None = None) -> LinearImage:
    """Demosaic by subsampling: R and B straight from their sites, G averaged.

    Each 2x2 quad collapses to one RGB pixel, halving both dimensions.
    Samples are normalized by ``scale`` (default: the fixed 14-bit scale
    1 / (2**14 - 1)). No black-level handling happens here.
    """
    if scale is None:
        scale = 1.0 / FULL_SCALE
    layout = CFA_LAYOUTS[raw.cfa_pattern]
    d = raw.data.astype(np.float64)
    sites = (d[0::2, 0::2], d[0::2, 1::2], d[1::2, 0::2], d[1::2, 1::2])
    planes: dict[str, list[np.ndarray]] = {"R": [], "G": [], "B": []}
    for color, site in zip(layout, sites):
        planes[color].append(site)
    rgb = np.stack(
        [
            planes["R"][0],
            0.5 * (planes["G"][0] + planes["G"][1]),
            planes["B"][0],
        ]
    )
    return LinearImage.from_array(rgb * scale)


def downsample_area(img: LinearImage, factor: int) -> LinearImage:
    """Area downsampling: each output sample is the mean of a factor x factor block."""
    if factor < 1:
        raise ValueError("factor must be a positive integer")
    if img.width % factor or img.height % factor:
        raise DimensionError(
            f"{img.width}x{img.height} not divisible by factor {factor}"
        )
    c, h, w = img.data.shape
    blocks = img.data.reshape(c, h // factor, factor, w // factor, factor)
    return LinearImage.from_array(blocks.mean(axis=(2, 4)), no_clip=img.no_clip)


def apply_isp(img: LinearImage, cfg: IspConfig) -> LinearImage:
    """Minimal ISP: black subtract, clip, scale, white balance, clamp, gamma.

    With ``cfg.clip`` off, neither the lower clip after black-level
    subtraction nor the final [0, 1] clamp is applied, the output is
    flagged ``no_clip``, and gamma acts only on positive samples (the
    whole map is affine when gamma is 1). Noise-dominated low-light frames
    keep their negative excursions this way.
    """
    bl = cfg.black_level[:, None, None]
    gains = cfg.white_balance_gains[:, None, None]
    span = cfg.white_level - cfg.black_level
    if not (span > 0).all():
        raise ValueError("white level must exceed every black level")
    x = img.data - bl
    if cfg.clip:
        x = np.maximum(x, 0.0)
    x = x / span[:, None, None]
    x = x * gains
    if cfg.clip:
        x = np.clip(x, 0.0, 1.0)
        out = x**cfg.gamma
    else:
        # out-of-range samples survive; gamma acts on the positive part only
        out = np.where(x > 0.0, np.maximum(x, 0.0) ** cfg.gamma, x)
    return LinearImage.from_array(out, no_clip=not cfg.clip)


def measure_snr(
    noisy: LinearImage,
    clean: LinearImage,
    black_level: float | np.ndarray = 0.0,
) -> float:
    """Whole-image SNR in dB with the clean frame as reference.

    Returns 10*log10(sum(clean**2) / sum((noisy - clean)**2)) after
    subtracting ``black_level`` from both images. +inf when the residual
    energy is zero, -inf when the signal energy is zero.
    """
    if noisy.data.shape != clean.data.shape:
        raise ShapeMismatchError(
            f"noisy {noisy.data.shape} vs clean {clean.data.shape}"
        )
    bl = np.asarray(black_level, dtype=np.float64)
    if bl.ndim == 1:
        bl = bl[:, None, None]
    s = clean.data - bl
    n = noisy.data - clean.data
    signal = float(np.sum(s * s))
    noise = float(np.sum(n * n))
    if signal == 0.0:
        return -math.inf
    if noise == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)
