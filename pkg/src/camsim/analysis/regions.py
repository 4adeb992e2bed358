"""Selection of uniform image regions for noise measurements, and noise curves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoRegionsError, ValidationError
from ..sensor import RawImage, cfa_mask

REGION_SIZE = 10
SIGMA_LIMIT = 3.0
RMSE_RATIO = 1.02
HOLDOUT_FOLDS = 5  # 20% held out per fold
HOLDOUT_REPEATS = 10


@dataclass(frozen=True)
class Region:
    """A square crop and the values of one CFA channel inside it.

    ``rows``/``cols`` are the image coordinates of the channel sites.
    """

    origin: tuple[int, int]
    size: int
    channel: str
    values: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    black_level: float = 0.0

    @property
    def signal(self) -> np.ndarray:
        return self.values - self.black_level


def _as_image(img, cfa_pattern, black_level):
    if isinstance(img, RawImage):
        return img.data.astype(float), img.cfa_pattern, img.black_level_dv
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2:
        raise ValidationError("image must be 2-D")
    return arr, cfa_pattern, black_level


def extract_region(img, origin, size=REGION_SIZE, channel="G", cfa_pattern="RGGB", black_level=0.0) -> Region:
    data, cfa, black = _as_image(img, cfa_pattern, black_level)
    r0, c0 = origin
    if r0 < 0 or c0 < 0 or r0 + size > data.shape[0] or c0 + size > data.shape[1]:
        raise ValidationError(f"region at {origin} size {size} leaves the image")
    mask = cfa_mask(cfa, data.shape, channel)[r0 : r0 + size, c0 : c0 + size]
    rr, cc = np.nonzero(mask)
    return Region((int(r0), int(c0)), size, channel, data[r0 + rr, c0 + cc], rr + r0, cc + c0, black)


def outlier_free(electrons, k: float = SIGMA_LIMIT) -> bool:
    """No value further than ``k`` sample standard deviations from the mean."""
    e = np.asarray(electrons, dtype=float)
    s = e.std(ddof=1)
    return not np.any(np.abs(e - e.mean()) > k * s)


def _quadratic_basis(rows, cols):
    r = rows - rows.mean()
    c = cols - cols.mean()
    return np.column_stack([np.ones_like(r), r, c, r * r, r * c, c * c])


def flat_not_worse(values, rows, cols, rng, ratio: float = RMSE_RATIO,
                   folds: int = HOLDOUT_FOLDS, repeats: int = HOLDOUT_REPEATS) -> bool:
    """Held-out comparison of a constant against a quadratic surface.

    Values are split into ``folds`` parts (20% each for 5); every part is
    predicted by a quadratic fit to the rest and by the mean of all values.
    Squared errors are pooled over every fold of ``repeats`` random splits.
    Returns False (non-uniform) when the constant's RMSE exceeds ``ratio``
    times the quadratic's.
    """
    v = np.asarray(values, dtype=float)
    X = _quadratic_basis(np.asarray(rows, float), np.asarray(cols, float))
    n = len(v)
    const = v.mean()
    se_poly = se_const = 0.0
    for _ in range(repeats):
        perm = rng.permutation(n)
        for held in np.array_split(perm, folds):
            train = np.setdiff1d(perm, held)
            coef = np.linalg.lstsq(X[train], v[train], rcond=None)[0]
            se_poly += np.sum((X[held] @ coef - v[held]) ** 2)
            se_const += np.sum((const - v[held]) ** 2)
    return se_const <= ratio**2 * se_poly


def is_uniform(region: Region, conversion_gain: float, rng) -> bool:
    """Both acceptance tests on a region's channel values, in electrons."""
    if conversion_gain <= 0:
        raise ValidationError("conversion_gain must be positive")
    electrons = region.signal / conversion_gain
    return outlier_free(electrons) and flat_not_worse(electrons, region.rows, region.cols, rng)


def find_uniform_regions(
    img,
    n_target: int,
    conversion_gain: float,
    seed: int = 0,
    size: int = REGION_SIZE,
    channel: str = "G",
    max_candidates: int | None = None,
    cfa_pattern: str = "RGGB",
    black_level: float = 0.0,
) -> list[Region]:
    """Randomly placed regions that pass :func:`is_uniform`, up to ``n_target``.

    Origins are even so each crop starts on the same CFA phase (50 green
    sites in a 10x10 Bayer crop). Regions may overlap.
    """
    data, cfa, black = _as_image(img, cfa_pattern, black_level)
    h, w = data.shape
    if h < size or w < size:
        raise ValidationError(f"image {h}x{w} smaller than region size {size}")
    rng = np.random.default_rng(seed)
    max_candidates = 20 * n_target if max_candidates is None else max_candidates
    n_r, n_c = (h - size) // 2 + 1, (w - size) // 2 + 1
    accepted = []
    for _ in range(max_candidates):
        r0, c0 = 2 * int(rng.integers(n_r)), 2 * int(rng.integers(n_c))
        region = extract_region(data, (r0, c0), size, channel, cfa, black)
        if is_uniform(region, conversion_gain, rng):
            accepted.append(region)
            if len(accepted) >= n_target:
                break
    if not accepted:
        raise NoRegionsError(f"no uniform regions among {max_candidates} candidates")
    return accepted


def noise_curve(regions) -> tuple[np.ndarray, np.ndarray]:
    """Per-region mean and sample std of black-subtracted values, sorted by mean."""
    if not regions:
        raise ValidationError("noise_curve needs at least one region")
    mean = np.array([r.signal.mean() for r in regions])
    std = np.array([r.signal.std(ddof=1) for r in regions])
    order = np.argsort(mean, kind="stable")
    return mean[order], std[order]


def photon_transfer_variance(mean_dv, conversion_gain: float, prnu_sigma: float):
    """Predicted ``V(DV) = E^2 s^2 + alpha E (1 + s^2)`` for black-subtracted mean E."""
    e = np.asarray(mean_dv, dtype=float)
    return e**2 * prnu_sigma**2 + conversion_gain * e * (1.0 + prnu_sigma**2)
