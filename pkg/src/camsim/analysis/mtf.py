"""Slanted-edge edge spread, line spread and MTF.

The edge is located row by row from the centroid of the absolute gradient,
a straight line is fit through the row centroids, and every pixel is
projected onto the edge normal. Averaging projected values in sub-pixel
bins gives a supersampled edge spread function.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EdgeNotFoundError, ValidationError
from ..sensor import RawImage, cfa_mask

MIN_ROWS = 20
# estimated tilt must fall inside this range (degrees from vertical)
TILT_RANGE = (1.0, 15.0)
_MIN_CORRECTION = 0.1


@dataclass(frozen=True)
class EdgeProfile:
    """Supersampled ESF/LSF (x in pixels across the edge) and the MTF."""

    x: np.ndarray
    esf: np.ndarray
    lsf: np.ndarray
    bin_fraction: float
    frequencies: np.ndarray  # cycles/pixel
    mtf: np.ndarray
    angle_deg: float

    def mtf_at(self, f):
        return np.interp(f, self.frequencies, self.mtf)

    @property
    def mtf50(self) -> float:
        """Lowest frequency where the MTF falls to 0.5 (linear interpolation)."""
        below = np.flatnonzero(self.mtf < 0.5)
        if below.size == 0:
            return float(self.frequencies[-1])
        k = below[0]
        f0, f1 = self.frequencies[k - 1], self.frequencies[k]
        m0, m1 = self.mtf[k - 1], self.mtf[k]
        return float(f0 + (m0 - 0.5) * (f1 - f0) / (m0 - m1))


def _sites(img, channel, cfa_pattern, black_level):
    if isinstance(img, RawImage):
        data = img.black_subtracted()
        cfa_pattern = img.cfa_pattern
    else:
        data = np.asarray(img, dtype=float) - black_level
    if data.ndim != 2:
        raise ValidationError("edge image must be 2-D")
    mask = np.ones(data.shape, bool) if channel is None else cfa_mask(cfa_pattern, data.shape, channel)
    return data, mask


def _row_centroids(data, mask, guess=None, half_window=None):
    rows, cents = [], []
    for r in range(data.shape[0]):
        cols = np.flatnonzero(mask[r])
        if cols.size < 3:
            continue
        v = data[r, cols]
        g = np.abs(np.diff(v))
        mid = 0.5 * (cols[1:] + cols[:-1])
        if guess is not None:
            g = np.where(np.abs(mid - guess(r)) <= half_window, g, 0.0)
        if g.sum() <= 0:
            continue
        rows.append(r)
        cents.append(np.sum(g * mid) / g.sum())
    return np.array(rows, float), np.array(cents)


def _edge_line(data, mask):
    rows, cents = _row_centroids(data, mask)
    if rows.size < MIN_ROWS:
        raise EdgeNotFoundError(f"edge found in {rows.size} rows; need at least {MIN_ROWS}")
    b, a = np.polyfit(rows, cents, 1)
    half = max(4.0, min(16.0, data.shape[1] / 4.0))
    rows, cents = _row_centroids(data, mask, lambda r: a + b * r, half)
    if rows.size < MIN_ROWS:
        raise EdgeNotFoundError(f"edge found in {rows.size} rows; need at least {MIN_ROWS}")
    b, a = np.polyfit(rows, cents, 1)
    return a, b


def slanted_edge_mtf(
    img,
    channel: str | None = None,
    bin_fraction: float = 0.25,
    cfa_pattern: str = "RGGB",
    black_level: float = 0.0,
) -> EdgeProfile:
    """ESF, LSF and MTF of a near-vertical edge.

    ``img`` is a RawImage or 2-D array; with ``channel`` set only that CFA
    channel's sites are used, at their true pixel positions. The LSF is the
    central-difference derivative of the ESF, windowed with a Hann window;
    the MTF is its DFT magnitude normalized at zero frequency and divided by
    the transfer functions of the bin averaging and the central difference.
    """
    if not 0 < bin_fraction <= 1:
        raise ValidationError("bin_fraction must be in (0, 1]")
    data, mask = _sites(img, channel, cfa_pattern, black_level)
    if data.shape[0] < MIN_ROWS:
        raise ValidationError(f"edge region needs at least {MIN_ROWS} rows")
    if np.ptp(data[mask]) <= 0:
        raise EdgeNotFoundError("image has no contrast")
    a, b = _edge_line(data, mask)
    angle = np.degrees(np.arctan(b))
    if not TILT_RANGE[0] <= abs(angle) <= TILT_RANGE[1]:
        raise ValidationError(
            f"edge tilt {angle:.2f} deg outside {TILT_RANGE} deg; slanted-edge analysis needs a small tilt"
        )
    cos_t = np.cos(np.arctan(b))
    rr, cc = np.nonzero(mask)
    edge_col = a + b * rr
    dist = (cc - edge_col) * cos_t
    # symmetric support as wide as the samples allow; a narrow Hann window
    # would visibly smooth the MTF
    reach = min(dist.max(), -dist.min())
    n_half = int(np.floor(reach / bin_fraction))
    if n_half < 4:
        raise EdgeNotFoundError("edge too close to the image border")
    idx = np.floor(dist / bin_fraction).astype(np.int64) + n_half
    keep = (idx >= 0) & (idx < 2 * n_half)
    sums = np.bincount(idx[keep], weights=data[rr[keep], cc[keep]], minlength=2 * n_half)
    counts = np.bincount(idx[keep], minlength=2 * n_half)
    # samples rarely sit symmetrically inside a bin; place each bin mean at
    # the mean distance of its samples and resample onto the bin centers
    where = np.bincount(idx[keep], weights=dist[keep], minlength=2 * n_half)
    x = (np.arange(2 * n_half) - n_half + 0.5) * bin_fraction
    filled = counts > 0
    if filled.sum() < 0.5 * filled.size:
        raise EdgeNotFoundError("too few samples per ESF bin; edge tilt too small?")
    esf = np.interp(x, where[filled] / counts[filled], sums[filled] / counts[filled])
    lsf = np.gradient(esf, bin_fraction)
    windowed = lsf * np.hanning(lsf.size)
    spectrum = np.abs(np.fft.rfft(windowed))
    if spectrum[0] <= 0:
        raise EdgeNotFoundError("edge has no net step")
    freqs = np.fft.rfftfreq(lsf.size, d=bin_fraction)
    correction = np.sinc(2 * freqs * bin_fraction) * np.sinc(freqs * bin_fraction)
    mtf = spectrum / spectrum[0] / np.maximum(correction, _MIN_CORRECTION)
    return EdgeProfile(x, esf, lsf, bin_fraction, freqs, mtf, float(angle))


def pixel_aperture_mtf(f, fill: float = 1.0):
    """|sinc| transfer of a square pixel aperture of width ``fill`` pixels."""
    return np.abs(np.sinc(np.asarray(f) * fill))


def gaussian_mtf(f, sigma_px: float):
    return np.exp(-2.0 * np.pi**2 * sigma_px**2 * np.asarray(f) ** 2)


def synthetic_edge(shape=(80, 64), tilt_deg=5.0, sigma_px=0.0, low=0.05, high=0.9,
                   center_col=None, supersample=16) -> np.ndarray:
    """Pixel-integrated image of a straight edge, optionally Gaussian blurred.

    The edge passes through ``(row 0, center_col)`` and leans ``tilt_deg``
    from vertical; the bright side is to the right. Each pixel averages a
    ``supersample`` x ``supersample`` grid of point samples of
    ``low + (high - low) * Phi(d / sigma)``, d being the signed distance to
    the edge.
    """
    from math import erf, sqrt

    h, w = shape
    b = np.tan(np.radians(tilt_deg))
    c0 = w / 2.0 if center_col is None else center_col
    off = (np.arange(supersample) + 0.5) / supersample - 0.5
    rows, cols = np.mgrid[0:h, 0:w].astype(float)
    phi = np.vectorize(lambda z: 0.5 * (1.0 + erf(z / sqrt(2.0))))
    acc = np.zeros(shape)
    for dy in off:
        for dx in off:
            d = ((cols + dx) - c0 - b * (rows + dy)) * np.cos(np.arctan(b))
            acc += phi(d / sigma_px) if sigma_px > 0 else (d >= 0)
    return low + (high - low) * acc / supersample**2
