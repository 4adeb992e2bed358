"""Simulated-versus-measured channel means."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import DataFileError, ValidationError

CHANNEL_NAMES = ("R", "G", "B")


@dataclass(frozen=True)
class ScatterReport:
    relative_rms: float
    bias: np.ndarray  # per channel, sum(sim) / sum(meas) - 1
    simulated: np.ndarray
    measured: np.ndarray

    def rows(self):
        """``(channel, measured, simulated)`` rows for plotting against the identity line."""
        out = []
        for j, name in enumerate(CHANNEL_NAMES):
            out += [(name, float(m), float(s)) for m, s in zip(self.measured[:, j], self.simulated[:, j])]
        return out


def compare_scatter(simulated, measured) -> ScatterReport:
    sim = np.atleast_2d(np.asarray(simulated, dtype=float))
    meas = np.atleast_2d(np.asarray(measured, dtype=float))
    if sim.shape != meas.shape:
        raise ValidationError(f"simulated {sim.shape} and measured {meas.shape} differ in shape")
    if sim.shape[1] != 3:
        raise ValidationError("expected RGB triples")
    denom = np.linalg.norm(meas)
    err = np.linalg.norm(sim - meas) / denom if denom > 0 else 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        bias = sim.sum(axis=0) / meas.sum(axis=0) - 1.0
    return ScatterReport(float(err), bias, sim, meas)


def write_scatter_csv(report: ScatterReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("channel", "measured", "simulated"))
        for ch, m, s in report.rows():
            w.writerow((ch, repr(m), repr(s)))


def read_rgb_csv(path) -> np.ndarray:
    """RGB means from a CSV with ``r,g,b`` columns (extra columns ignored)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except FileNotFoundError as exc:
        raise DataFileError(f"no such file: {path}") from exc
    if not rows:
        raise DataFileError(f"{path}: no rows")
    keys = {k.lower(): k for k in rows[0]}
    if not {"r", "g", "b"} <= set(keys):
        raise DataFileError(f"{path}: expected r,g,b columns")
    try:
        return np.array([[float(r[keys[c]]) for c in "rgb"] for r in rows])
    except ValueError as exc:
        raise DataFileError(f"{path}: {exc}") from exc
