"""QE correction matrix: fit predicted channel responses to measured ones."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataFileError, RankDeficientError, ValidationError
from ..radiometry import Spectrum, band_widths, energy_to_photons
from .nnls import DEFAULT_TOL, nnls

OBSERVATION_COLUMNS = ("illuminant", "patch", "meas_r", "meas_g", "meas_b", "pred_r", "pred_g", "pred_b")


@dataclass(frozen=True)
class PatchObservation:
    """Black-subtracted mean RGB of one chart patch, measured and predicted."""

    measured_rgb: np.ndarray
    predicted_rgb: np.ndarray
    patch: int = 0
    illuminant: str = ""

    def __post_init__(self):
        for name in ("measured_rgb", "predicted_rgb"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValidationError(f"{name} must have 3 entries")
            if np.any(v < 0):
                raise ValidationError(f"{name} must be nonnegative")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class QeCorrection:
    M: np.ndarray
    residual: float


def _stack(observations):
    if not observations:
        raise ValidationError("no observations")
    R = np.array([o.predicted_rgb for o in observations])
    Rp = np.array([o.measured_rgb for o in observations])
    return R, Rp


def relative_rms(R, Rp, M) -> float:
    """``||R' - R M|| / ||R'||`` (Frobenius norms)."""
    denom = np.linalg.norm(Rp)
    if denom == 0:
        return 0.0 if np.linalg.norm(R @ M) == 0 else np.inf
    return float(np.linalg.norm(Rp - R @ M) / denom)


def fit_qe_matrix(observations, tol: float = DEFAULT_TOL) -> QeCorrection:
    """Nonnegative 3x3 M minimizing ``||R' - R M||``, one NNLS per column."""
    R, Rp = _stack(observations)
    if np.linalg.matrix_rank(R) < 3:
        raise RankDeficientError("predicted responses span fewer than 3 dimensions")
    M = np.column_stack([nnls(R, Rp[:, j], tol)[0] for j in range(3)])
    return QeCorrection(M, relative_rms(R, Rp, M))


def evaluate_qe_matrix(observations, M) -> float:
    """Relative RMS of a given M on (possibly held-out) observations."""
    R, Rp = _stack(observations)
    return relative_rms(R, Rp, np.asarray(M, dtype=float))


def apply_qe_matrix(qe_rgb, M) -> tuple[Spectrum, Spectrum, Spectrum]:
    """Corrected curves ``QE'_j = sum_i QE_i M[i, j]``, clipped at 0."""
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValidationError("M must be 3x3")
    grid = qe_rgb[0].wavelengths_nm
    if any(not np.array_equal(q.wavelengths_nm, grid) for q in qe_rgb[1:]):
        raise ValidationError("QE curves must share a wavelength grid")
    Q = np.column_stack([q.values for q in qe_rgb]) @ M
    return tuple(Spectrum(grid, np.clip(Q[:, j], 0.0, None), "qe") for j in range(3))


def channel_responses(qe_rgb, illuminant: Spectrum, reflectances, grid) -> np.ndarray:
    """Relative RGB response of Lambertian patches: ``sum(refl * illum / pi * QE_c)`` in photons.

    Returns shape (n_patches, 3). Geometry and exposure are a common scale
    factor and are left out.
    """
    grid = np.asarray(grid, dtype=float)
    dl = band_widths(grid)
    L = energy_to_photons(illuminant(grid) / np.pi, grid)
    Q = np.column_stack([q(grid) for q in qe_rgb])
    refl = np.stack([r(grid) for r in reflectances])
    return (refl * L * dl) @ Q


def read_observations(path) -> list[PatchObservation]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError as exc:
        raise DataFileError(f"no such file: {path}") from exc
    if rows and set(OBSERVATION_COLUMNS) - set(rows[0]):
        raise DataFileError(f"{path}: expected columns {','.join(OBSERVATION_COLUMNS)}")
    try:
        return [
            PatchObservation(
                [float(r["meas_r"]), float(r["meas_g"]), float(r["meas_b"])],
                [float(r["pred_r"]), float(r["pred_g"]), float(r["pred_b"])],
                int(r["patch"]),
                r["illuminant"],
            )
            for r in rows
        ]
    except (ValueError, ValidationError) as exc:
        raise DataFileError(f"{path}: {exc}") from exc


def write_observations(observations, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(OBSERVATION_COLUMNS)
        for o in observations:
            w.writerow([o.illuminant, o.patch] + [repr(float(v)) for v in o.measured_rgb]
                       + [repr(float(v)) for v in o.predicted_rgb])
