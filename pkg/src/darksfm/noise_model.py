"""Per-channel affine sensor noise model: var = a * mean + b.

Calibration fits the slope (shot noise) and intercept (read noise) per
color channel from mean-variance pairs measured on homogeneous patches.
Synthesis scales a clean DN-domain image to hit a target whole-image SNR
and adds heteroscedastic noise from the fitted model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, UnreachableSnrError
from .raw_pipeline import LinearImage

# Log10-scale search window for the brightness scale.
_LOG_S_MIN = -6.0
_LOG_S_MAX = 6.0
_SNR_TOL_DB = 1e-3


@dataclass
class NoiseParams:
    """Fitted (a, b) per color channel; a in DN/DN, b in DN^2."""

    a: np.ndarray
    b: np.ndarray
    clamped: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=np.float64))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        if self.a.shape != self.b.shape:
            raise ValueError("a and b must have one value per channel")
        if (self.a < 0).any() or (self.b < 0).any():
            raise ValueError("negative noise parameters")
        if self.clamped is None:
            self.clamped = np.zeros(self.a.shape, dtype=bool)
        else:
            self.clamped = np.asarray(self.clamped, dtype=bool)

    @property
    def n_channels(self) -> int:
        return self.a.shape[0]

    def for_channels(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Broadcast (a, b) to n channels; single-channel params apply to all."""
        if self.n_channels == n:
            return self.a, self.b
        if self.n_channels == 1:
            return np.full(n, self.a[0]), np.full(n, self.b[0])
        raise ValueError(f"model has {self.n_channels} channels, image has {n}")


@dataclass(frozen=True)
class MeanVarSample:
    """One homogeneous-patch measurement: channel index, mean DN, variance DN^2."""

    channel: int
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be non-negative")


def calibrate(samples: list[MeanVarSample]) -> NoiseParams:
    """Least-squares line fit variance = a * mean + b, per channel.

    Needs at least two distinct means per channel. Negative fitted values
    are clamped to zero and flagged (with a warning), since a physical
    model cannot have negative shot or read noise.
    """
    if not samples:
        raise InsufficientDataError("no samples")
    n_channels = max(s.channel for s in samples) + 1
    a = np.zeros(n_channels)
    b = np.zeros(n_channels)
    clamped = np.zeros(n_channels, dtype=bool)
    for c in range(n_channels):
        means = np.array([s.mean for s in samples if s.channel == c])
        variances = np.array([s.variance for s in samples if s.channel == c])
        if np.unique(means).size < 2:
            raise InsufficientDataError(
                f"channel {c}: need >= 2 samples with distinct means"
            )
        # normal equations for the straight-line fit
        A = np.stack([means, np.ones_like(means)], axis=1)
        (slope, intercept), *_ = np.linalg.lstsq(A, variances, rcond=None)
        if slope < 0 or intercept < 0:
            clamped[c] = True
            warnings.warn(
                f"channel {c}: clamped negative fit (a={slope:.3g}, b={intercept:.3g})",
                stacklevel=2,
            )
        a[c] = max(slope, 0.0)
        b[c] = max(intercept, 0.0)
    return NoiseParams(a=a, b=b, clamped=clamped)


def _energy_terms(clean: LinearImage, params: NoiseParams) -> tuple[float, float, float]:
    """Return (sum mu^2, sum a*mu, sum b) over all samples."""
    a, b = params.for_channels(clean.channels)
    mu = clean.data
    sig2 = float(np.sum(mu * mu))
    lin = float(np.sum(a[:, None, None] * mu))
    const = float(b.sum()) * clean.height * clean.width
    return sig2, lin, const


def predicted_snr(clean: LinearImage, params: NoiseParams, scale: float) -> float:
    """Model-predicted SNR of ``scale * clean`` plus model noise, in dB.

    10*log10( sum((s*mu)^2) / sum(a*s*mu + b) ); -inf for an all-zero image.
    Strictly increasing in ``scale`` whenever b > 0 somewhere and the image
    is not all zero.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    sig2, lin, const = _energy_terms(clean, params)
    if sig2 == 0.0:
        return -math.inf
    denom = scale * lin + const
    if denom <= 0.0:
        return math.inf
    return 10.0 * math.log10(scale * scale * sig2 / denom)


def attainable_snr_range(clean: LinearImage, params: NoiseParams) -> tuple[float, float]:
    """SNR range reachable by scales within the solver's search window."""
    lo = predicted_snr(clean, params, 10.0**_LOG_S_MIN)
    hi = predicted_snr(clean, params, 10.0**_LOG_S_MAX)
    return lo, hi


def solve_scale_for_snr(
    clean: LinearImage, params: NoiseParams, target_snr_db: float
) -> float:
    """Bisection on log10(scale) until the predicted SNR is within 1e-3 dB."""
    lo, hi = attainable_snr_range(clean, params)
    if math.isinf(lo) or math.isinf(hi):
        raise UnreachableSnrError(
            "noise model predicts infinite SNR; no scale maps to a finite target",
            (lo, hi),
        )
    if not lo <= target_snr_db <= hi:
        raise UnreachableSnrError(
            f"target {target_snr_db:.2f} dB outside attainable "
            f"[{lo:.2f}, {hi:.2f}] dB",
            (lo, hi),
        )
    sig2, lin, const = _energy_terms(clean, params)

    def snr_at(log_s: float) -> float:
        s = 10.0**log_s
        return 10.0 * math.log10(s * s * sig2 / (s * lin + const))

    log_lo, log_hi = _LOG_S_MIN, _LOG_S_MAX
    for _ in range(200):
        mid = 0.5 * (log_lo + log_hi)
        snr = snr_at(mid)
        if abs(snr - target_snr_db) <= _SNR_TOL_DB:
            return 10.0**mid
        if snr < target_snr_db:
            log_lo = mid
        else:
            log_hi = mid
    return 10.0 ** (0.5 * (log_lo + log_hi))


def synthesize(
    clean: LinearImage,
    params: NoiseParams,
    target_snr_db: float,
    seed: int,
    mode: str = "gaussian",
    clip: bool = False,
    white_level: float | None = None,
) -> tuple[LinearImage, float]:
    """Scale a clean DN-domain image to a target SNR and add model noise.

    The brightness scale s solves predicted_snr(clean, params, s) ==
    target_snr_db; the output is s*clean plus noise with per-pixel variance
    a*(s*mu) + b. ``mode`` selects the sampling scheme:

    - "gaussian" (default): heteroscedastic Gaussian N(s*mu, a*s*mu + b).
    - "poisson-gaussian": exact a*Poisson(s*mu/a) + N(0, sqrt(b)).

    Sampling uses a counter-based Philox stream keyed by ``seed`` and
    drawn in pixel order, so results depend only on (seed, pixel index).
    Output samples are unclipped by default; pass ``clip=True`` with a
    ``white_level`` to clamp into [0, white_level].

    Returns (noisy image, applied scale).
    """
    if mode not in ("gaussian", "poisson-gaussian"):
        raise ValueError(f"unknown mode {mode!r}")
    a, b = params.for_channels(clean.channels)
    if (a == 0).all() and (b == 0).all():
        # noise-free model: SNR is infinite for every scale, leave brightness alone
        return LinearImage.from_array(clean.data.copy(), no_clip=clean.no_clip), 1.0
    s = solve_scale_for_snr(clean, params, target_snr_db)
    mu = s * clean.data
    rng = np.random.Generator(np.random.Philox(key=seed))
    av = a[:, None, None]
    bv = b[:, None, None]
    if mode == "gaussian":
        var = np.maximum(av * mu, 0.0) + bv
        noisy = mu + np.sqrt(var) * rng.standard_normal(mu.shape)
    else:
        shot = np.where(av > 0, av * rng.poisson(np.maximum(mu, 0.0) / np.where(av > 0, av, 1.0)), mu)
        noisy = shot + np.sqrt(bv) * rng.standard_normal(mu.shape)
    if clip:
        top = white_level if white_level is not None else float(noisy.max())
        noisy = np.clip(noisy, 0.0, top)
    return LinearImage.from_array(noisy, no_clip=not clip), s
