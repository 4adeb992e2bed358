"""Relative illumination measured from a capture of a uniform scene."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EstimationError, ValidationError
from ..sensor import RawImage, cfa_mask
from ..calibration.gain import SATURATION_FRACTION


@dataclass(frozen=True)
class RadialCurve:
    """Mean channel signal per radial bin, normalized to the innermost bin.

    ``radius`` is the mean radius of the sites in each bin, in pixels or
    in mm when a pixel pitch was given.
    """

    radius: np.ndarray
    value: np.ndarray
    counts: np.ndarray

    def at(self, r):
        return np.interp(r, self.radius, self.value)


def measure_relative_illumination(
    img,
    channel: str | None = "G",
    n_bins: int = 20,
    pixel_pitch_um: float | None = None,
    cfa_pattern: str = "RGGB",
    black_level: float = 0.0,
    max_dv: float | None = None,
) -> RadialCurve:
    """Radially binned, black-subtracted channel means about the image center."""
    if isinstance(img, RawImage):
        data = img.black_subtracted()
        raw = img.data
        cfa_pattern = img.cfa_pattern
        max_dv = 2**img.bit_depth - 1 if max_dv is None else max_dv
    else:
        raw = np.asarray(img, dtype=float)
        data = raw - black_level
    if data.ndim != 2:
        raise ValidationError("image must be 2-D")
    if n_bins < 1:
        raise ValidationError("n_bins must be >= 1")
    mask = np.ones(data.shape, bool) if channel is None else cfa_mask(cfa_pattern, data.shape, channel)
    rr, cc = np.nonzero(mask)
    cy, cx = (data.shape[0] - 1) / 2.0, (data.shape[1] - 1) / 2.0
    radius = np.hypot(rr - cy, cc - cx)
    edges = np.linspace(0.0, radius.max() * (1 + 1e-12), n_bins + 1)
    idx = np.clip(np.digitize(radius, edges) - 1, 0, n_bins - 1)
    vals = data[rr, cc]
    counts = np.bincount(idx, minlength=n_bins)
    if counts[0] == 0:
        raise ValidationError("innermost bin is empty; use fewer bins")
    if max_dv is not None and np.any(raw[rr, cc][idx == 0] >= SATURATION_FRACTION * max_dv):
        raise EstimationError("image center is saturated")
    sums = np.bincount(idx, weights=vals, minlength=n_bins)
    rsum = np.bincount(idx, weights=radius, minlength=n_bins)
    used = counts > 0
    mean = sums[used] / counts[used]
    if mean[0] <= 0:
        raise EstimationError("no signal at the image center")
    r = rsum[used] / counts[used]
    if pixel_pitch_um is not None:
        r = r * pixel_pitch_um * 1e-3
    return RadialCurve(r, mean / mean[0], counts[used])


def flatten(img_values, curve: RadialCurve, pixel_pitch_um: float | None = None, black_level: float = 0.0):
    """Divide a uniform-scene image by its relative-illumination curve."""
    data = np.asarray(img_values, dtype=float) - black_level
    r, c = np.mgrid[0 : data.shape[0], 0 : data.shape[1]]
    radius = np.hypot(r - (data.shape[0] - 1) / 2.0, c - (data.shape[1] - 1) / 2.0)
    if pixel_pitch_um is not None:
        radius = radius * pixel_pitch_um * 1e-3
    return data / curve.at(radius)
