"""Noise parameters (dark voltage, DSNU, read noise, PRNU) from exposure series.

All statistics are formed in digital values and converted to mV with
``volts_per_electron / (alpha * analog_gain)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EstimationError, ValidationError
from .gain import SATURATION_FRACTION

MIN_EXPOSURES = 3
MIN_FRAMES = 10
PARAMETERS = ("dsnu_mV", "prnu_percent", "dark_voltage_mV_per_s", "read_noise_mV")


@dataclass(frozen=True)
class NoiseEstimate:
    dsnu_mV: float
    prnu_percent: float
    dark_voltage_mV_per_s: float
    read_noise_mV: float
    bounds: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in PARAMETERS}


def _series(stacks, label):
    """(exposures, list of (n, H, W) black-subtracted float arrays), sorted by exposure."""
    if len(stacks) < MIN_EXPOSURES:
        raise ValidationError(f"{label} series needs >= {MIN_EXPOSURES} exposures, got {len(stacks)}")
    items = []
    for stack in stacks:
        if len(stack) < MIN_FRAMES:
            raise ValidationError(f"{label} stacks need >= {MIN_FRAMES} frames, got {len(stack)}")
        t = {f.exposure_s for f in stack}
        if len(t) != 1:
            raise ValidationError(f"{label} stack mixes exposure times {sorted(t)}")
        arr = np.array([f.data for f in stack], dtype=float)
        if np.any(arr >= SATURATION_FRACTION * (2 ** stack[0].bit_depth - 1)):
            raise EstimationError(f"saturated {label} stack at exposure {t.pop()} s")
        items.append((stack[0].exposure_s, arr - stack[0].black_level_dv))
    items.sort(key=lambda it: it[0])
    times = np.array([t for t, _ in items])
    if len(np.unique(times)) < MIN_EXPOSURES:
        raise ValidationError(f"{label} series needs >= {MIN_EXPOSURES} distinct exposure times")
    return times, [a for _, a in items]


def _slope(x, y):
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc * xc))


def _moments(stack, counts=None):
    """Temporal-mean frame, mean per-pixel temporal variance, effective frame count.

    ``counts`` gives how often each frame was drawn by a bootstrap resample;
    the temporal variance is taken over the distinct frames so duplicates
    do not shrink it.
    """
    if counts is None:
        return stack.mean(axis=0), stack.var(axis=0, ddof=1).mean(), stack.shape[0]
    used = counts > 0
    mean = np.tensordot(counts, stack, axes=1) / counts.sum()
    temporal = stack[used].var(axis=0, ddof=1).mean() if used.sum() > 1 else 0.0
    return mean, temporal, counts.sum() ** 2 / np.sum(counts * counts)


def _dark_terms(times, moments, dv_per_e):
    means = np.array([m[0].mean() for m in moments])
    dark_dv_per_s = _slope(times, means)
    mean_frame, temporal, n = moments[0]
    dsnu_var = mean_frame.var(ddof=1) - temporal / n
    dark_shot = max(dark_dv_per_s, 0.0) * times[0] * dv_per_e  # dv^2 from Poisson dark electrons
    read_var = temporal - dark_shot - 1.0 / 12.0
    return dark_dv_per_s, np.sqrt(max(dsnu_var, 0.0)), np.sqrt(max(read_var, 0.0))


def _prnu(moments):
    means = np.array([m[0] for m in moments])  # (k, H, W)
    level = means.reshape(len(moments), -1).mean(axis=1)
    lc = level - level.mean()
    sxx = np.sum(lc * lc)
    if sxx <= 0:
        raise EstimationError("bright series has no signal range")
    slopes = np.tensordot(lc, means - means.mean(axis=0), axes=1) / sxx
    # temporal noise leaks into every per-pixel slope; remove its variance
    noise = sum(c * c * m[1] / m[2] for c, m in zip(lc, moments)) / sxx**2
    var = slopes.var(ddof=1) - noise
    return np.sqrt(max(var, 0.0)) / slopes.mean()


def _estimate(dark_t, dark_m, bright_m, mv_per_dv, dv_per_e):
    slope, dsnu, read = _dark_terms(dark_t, dark_m, dv_per_e)
    return np.array([dsnu * mv_per_dv, 100.0 * _prnu(bright_m), slope * mv_per_dv, read * mv_per_dv])


def estimate_noise_parameters(
    dark_stacks,
    bright_stacks,
    conversion_gain: float,
    volts_per_electron: float,
    analog_gain: float = 1.0,
    n_bootstrap: int = 0,
    seed: int = 0,
) -> NoiseEstimate:
    """Estimate the four noise parameters from dark and bright exposure series.

    ``dark_stacks`` and ``bright_stacks`` are lists of frame stacks (lists of
    :class:`RawImage`), one stack per exposure time.

    * dark voltage: slope of the mean dark signal against exposure time
    * DSNU: spatial std of the temporal-mean dark frame at the shortest
      exposure, less the temporal noise that survives averaging
    * read noise: temporal std in the dark at the shortest exposure with
      dark shot noise and 1/12 dv^2 quantization noise removed
    * PRNU: relative spread of per-pixel response slopes across the bright
      series, less the slope noise caused by temporal noise

    With ``n_bootstrap > 0`` frames are resampled with replacement within
    each stack and 95% percentile bounds are stored in ``bounds``.
    """
    dv_per_e = conversion_gain * analog_gain
    mv_per_dv = volts_per_electron * 1e3 / dv_per_e
    dark_t, dark = _series(dark_stacks, "dark")
    _, bright = _series(bright_stacks, "bright")
    point = _estimate(dark_t, [_moments(s) for s in dark], [_moments(s) for s in bright],
                      mv_per_dv, dv_per_e)
    bounds = {}
    if n_bootstrap > 0:
        rng = np.random.default_rng(seed)

        def resample(stacks):
            return [_moments(s, rng.multinomial(s.shape[0], np.full(s.shape[0], 1.0 / s.shape[0])))
                    for s in stacks]

        draws = np.array([_estimate(dark_t, resample(dark), resample(bright), mv_per_dv, dv_per_e)
                          for _ in range(n_bootstrap)])
        lo, hi = np.percentile(draws, [2.5, 97.5], axis=0)
        bounds = {k: (float(a), float(b)) for k, a, b in zip(PARAMETERS, lo, hi)}
    return NoiseEstimate(*map(float, point), bounds=bounds)
