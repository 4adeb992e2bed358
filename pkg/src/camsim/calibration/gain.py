"""Conversion gain from the mean and variance of a bright uniform patch.

With photo-electrons O = S * P, S ~ Poisson(mu) and P ~ 1 + N(0, s^2),
the digital value DV = alpha * O has

    E(DV) = alpha * mu
    V(DV) = E(DV)^2 s^2 + alpha E(DV) (1 + s^2)

which is solved for alpha.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EstimationError, ValidationError

SATURATION_FRACTION = 0.95
MIN_SAMPLES = 100


@dataclass(frozen=True)
class GainEstimate:
    alpha: float
    mean_dv: float
    var_dv: float
    n_samples: int
    electrons: np.ndarray

    def electron_histogram(self, bins=50):
        return np.histogram(self.electrons, bins=bins)


def conversion_gain_from_moments(mean_dv: float, var_dv: float, prnu_sigma: float) -> float:
    num = var_dv - mean_dv**2 * prnu_sigma**2
    if mean_dv <= 0:
        raise EstimationError("mean signal must be positive")
    if num <= 0:
        raise EstimationError(
            "nonpositive gain numerator; PRNU is too large for the observed variance or the data are saturated"
        )
    return float(num / (mean_dv * (1.0 + prnu_sigma**2)))


def estimate_conversion_gain(dv_samples, prnu_sigma: float, black_level: float,
                             max_dv: float = 1023) -> GainEstimate:
    """Conversion gain (dv/e-) from raw digital values of a uniform patch.

    Samples at or above 95% of ``max_dv`` count as saturated and are
    refused. Variance is the unbiased (n - 1) estimate.
    """
    raw = np.asarray(dv_samples, dtype=float).ravel()
    if raw.size < MIN_SAMPLES:
        raise ValidationError(f"need at least {MIN_SAMPLES} samples, got {raw.size}")
    if prnu_sigma < 0:
        raise ValidationError("prnu_sigma must be nonnegative")
    if np.any(raw >= SATURATION_FRACTION * max_dv):
        raise EstimationError("saturated samples present")
    x = raw - black_level
    mean, var = float(x.mean()), float(x.var(ddof=1))
    alpha = conversion_gain_from_moments(mean, var, prnu_sigma)
    return GainEstimate(alpha, mean, var, raw.size, x / alpha)


def center_crop(a, size: int = 10):
    a = np.asarray(a)
    h, w = a.shape[-2:]
    if h < size or w < size:
        raise ValidationError(f"image {h}x{w} smaller than crop {size}")
    r0, c0 = (h - size) // 2, (w - size) // 2
    return a[..., r0 : r0 + size, c0 : c0 + size]


def gain_samples(frames, crop: int = 10, channel: str | None = None) -> np.ndarray:
    """Center-crop values pooled over frames, optionally one CFA channel only."""
    out = []
    for f in frames:
        vals = center_crop(f.data, crop)
        if channel is not None:
            vals = vals[center_crop(f.mask(channel), crop)]
        out.append(np.ravel(vals))
    return np.concatenate(out)
