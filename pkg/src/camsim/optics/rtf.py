"""Polynomial ray-transfer functions.

A ray is ``(x, y, u, v)``: position in a plane normal to the optical axis
(mm) and the first two components of its unit direction. Light travels
toward +z (scene -> sensor), so the third direction component is always
``+sqrt(1 - u**2 - v**2)``.

The forward map takes rays on the entrance plane to rays on the exit plane,
one polynomial per output coordinate over the full 4-D monomial basis up to
a total degree. The inverse map (exit -> entrance) is fit from the same
pairs and is what sensor-to-scene rendering uses.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .. import _io
from ..errors import DataFileError, RankDeficientError, ValidationError, WavelengthError

MAX_DEGREE = 6
DEFAULT_DEGREE = 5


class Ray4(NamedTuple):
    x: float
    y: float
    u: float
    v: float


class _Vignetted:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "VIGNETTED"

    def __bool__(self):
        return False


VIGNETTED = _Vignetted()


class RayPair(NamedTuple):
    input: Ray4
    output: Ray4
    wavelength_nm: float


@dataclass(frozen=True)
class RayPairs:
    """Array form of a ray-pair dataset: ``inputs``/``outputs`` are (N, 4)."""

    inputs: np.ndarray
    outputs: np.ndarray
    wavelengths_nm: np.ndarray

    def __post_init__(self):
        inp = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        out = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        wl = np.broadcast_to(np.asarray(self.wavelengths_nm, dtype=float), (inp.shape[0],)).copy()
        if inp.shape != out.shape or inp.shape[1] != 4:
            raise ValidationError(f"ray pair arrays must both be (N, 4), got {inp.shape}, {out.shape}")
        for name, arr in (("input", inp), ("output", out)):
            if np.any(arr[:, 2] ** 2 + arr[:, 3] ** 2 > 1.0 + 1e-12):
                raise ValidationError(f"{name} ray direction has u^2 + v^2 > 1")
        object.__setattr__(self, "inputs", inp)
        object.__setattr__(self, "outputs", out)
        object.__setattr__(self, "wavelengths_nm", wl)

    def __len__(self):
        return self.inputs.shape[0]

    @classmethod
    def from_pairs(cls, pairs) -> "RayPairs":
        pairs = list(pairs)
        if not pairs:
            raise ValidationError("no ray pairs")
        return cls(
            np.array([p.input for p in pairs], dtype=float),
            np.array([p.output for p in pairs], dtype=float),
            np.array([p.wavelength_nm for p in pairs], dtype=float),
        )

    def __iter__(self):
        for i, o, w in zip(self.inputs, self.outputs, self.wavelengths_nm):
            yield RayPair(Ray4(*i), Ray4(*o), float(w))

    def concat(self, other: "RayPairs") -> "RayPairs":
        return RayPairs(
            np.vstack([self.inputs, other.inputs]),
            np.vstack([self.outputs, other.outputs]),
            np.concatenate([self.wavelengths_nm, other.wavelengths_nm]),
        )


def monomial_exponents(degree: int) -> np.ndarray:
    """Exponent tuples of all monomials in (x, y, u, v) with total degree <= degree.

    Ordered by total degree, then lexicographically (descending x power), so
    the constant term is first and the four linear terms follow.
    """
    exps = [e for e in itertools.product(range(degree + 1), repeat=4) if sum(e) <= degree]
    exps.sort(key=lambda e: (sum(e), tuple(-k for k in e)))
    return np.array(exps, dtype=np.int64).reshape(-1, 4)


def design_matrix(rays: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    rays = np.atleast_2d(rays)
    degree = int(exponents.max()) if exponents.size else 0
    # powers[k][:, d] = rays[:, k] ** d
    powers = [np.cumprod(np.column_stack([np.ones(len(rays))] + [rays[:, k]] * degree), axis=1)
              for k in range(4)]
    cols = np.empty((len(rays), len(exponents)))
    for j, (a, b, c, d) in enumerate(exponents):
        cols[:, j] = powers[0][:, a] * powers[1][:, b] * powers[2][:, c] * powers[3][:, d]
    return cols


def rotate_rays(rays: np.ndarray, angle) -> np.ndarray:
    """Rotate rays about the optical axis by ``angle`` (radians, scalar or per-ray)."""
    rays = np.atleast_2d(rays)
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty_like(rays, dtype=float)
    out[:, 0] = c * rays[:, 0] - s * rays[:, 1]
    out[:, 1] = s * rays[:, 0] + c * rays[:, 1]
    out[:, 2] = c * rays[:, 2] - s * rays[:, 3]
    out[:, 3] = s * rays[:, 2] + c * rays[:, 3]
    return out


def _lstsq(A: np.ndarray, B: np.ndarray):
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    coef, _, rank, sv = np.linalg.lstsq(A / scale, B, rcond=None)
    if rank < A.shape[1] or sv[-1] <= sv[0] * 1e-13:
        raise RankDeficientError(
            f"design matrix is rank deficient (rank {rank} of {A.shape[1]} monomials)"
        )
    return coef / scale[:, None]


@dataclass(frozen=True)
class RtfModel:
    """Fitted ray-transfer function, one coefficient set per wavelength.

    ``forward[k]`` and ``inverse[k]`` have shape (n_monomials, 4) and hold
    the coefficients of the four output polynomials at ``wavelengths_nm[k]``.
    """

    exponents: np.ndarray
    wavelengths_nm: np.ndarray
    forward: np.ndarray
    inverse: np.ndarray | None
    entrance_pupil_radius_mm: float
    exit_pupil_radius_mm: float
    exit_plane_offset_mm: float = 0.0
    symmetric: bool = False
    rms_forward: np.ndarray | None = None
    rms_inverse: np.ndarray | None = None

    @property
    def degree(self) -> int:
        return int(self.exponents.sum(axis=1).max())

    def wavelength_index(self, wavelength_nm: float, nearest: bool = False) -> int:
        d = np.abs(self.wavelengths_nm - float(wavelength_nm))
        k = int(np.argmin(d))
        if d[k] > 1e-9 and not nearest:
            raise WavelengthError(
                f"{wavelength_nm} nm is not a fitted wavelength "
                f"({self.wavelengths_nm.tolist()}); pass nearest=True to use the closest"
            )
        return k

    def trace(self, rays, wavelength_nm: float, nearest: bool = False):
        """Forward map. Returns ``(out_rays, valid)``; invalid rows are vignetted."""
        k = self.wavelength_index(wavelength_nm, nearest)
        return _apply(self.forward[k], self.exponents, rays,
                      self.entrance_pupil_radius_mm, self.exit_pupil_radius_mm, clip_out=False)

    def trace_inverse(self, rays, wavelength_nm: float, nearest: bool = False):
        """Exit-plane rays -> entrance-plane rays, for sensor-to-scene tracing."""
        if self.inverse is None:
            raise ValidationError("model was fit without an inverse map")
        k = self.wavelength_index(wavelength_nm, nearest)
        return _apply(self.inverse[k], self.exponents, rays,
                      self.exit_pupil_radius_mm, self.entrance_pupil_radius_mm, clip_out=True)

    @property
    def back_focal_distance_mm(self) -> float:
        """Exit-plane-to-focus distance for collimated on-axis light (paraxial)."""
        lin = self.forward[len(self.forward) // 2]
        a = lin[_linear_row(self.exponents, 0), 0]  # d x_o / d x_i
        c = lin[_linear_row(self.exponents, 0), 2]  # d u_o / d x_i
        if c >= 0:
            raise ValidationError("model is not converging; no back focal distance")
        return float(-a / c)


def _linear_row(exponents, axis):
    target = np.zeros(4, dtype=np.int64)
    target[axis] = 1
    return int(np.flatnonzero((exponents == target).all(axis=1))[0])


def _apply(coef, exponents, rays, r_in, r_out, clip_out):
    rays = np.atleast_2d(np.asarray(rays, dtype=float))
    out = design_matrix(rays, exponents) @ coef
    valid = (rays[:, 0] ** 2 + rays[:, 1] ** 2 <= r_in**2)
    valid &= rays[:, 2] ** 2 + rays[:, 3] ** 2 < 1.0
    valid &= out[:, 2] ** 2 + out[:, 3] ** 2 < 1.0
    if clip_out:
        valid &= out[:, 0] ** 2 + out[:, 1] ** 2 <= r_out**2
    valid &= np.isfinite(out).all(axis=1)
    return out, valid


def fit_rtf(
    pairs,
    degree: int = DEFAULT_DEGREE,
    symmetric: bool = False,
    n_rotations: int = 8,
    seed: int = 0,
    fit_inverse: bool = True,
    entrance_pupil_radius_mm: float | None = None,
    exit_pupil_radius_mm: float | None = None,
    exit_plane_offset_mm: float = 0.0,
) -> RtfModel:
    """Least-squares fit of the four output polynomials at each wavelength.

    With ``symmetric=True`` every pair is replicated at ``n_rotations``
    random rotations about the optical axis before fitting, which makes a
    rotationally symmetric lens's fit commute with rotation. Pupil radii
    default to the largest radius seen in the data.
    """
    if not isinstance(pairs, RayPairs):
        pairs = RayPairs.from_pairs(pairs)
    if not 1 <= degree <= MAX_DEGREE:
        raise ValidationError(f"degree must be in 1..{MAX_DEGREE}, got {degree}")
    exps = monomial_exponents(degree)
    rng = np.random.default_rng(seed)
    wls = np.unique(pairs.wavelengths_nm)
    fwd, inv, rms_f, rms_i = [], [], [], []
    for wl in wls:
        sel = pairs.wavelengths_nm == wl
        inp, out = pairs.inputs[sel], pairs.outputs[sel]
        if len(inp) < len(exps):
            raise RankDeficientError(
                f"{len(inp)} pairs at {wl} nm; degree {degree} needs at least {len(exps)}"
            )
        if symmetric:
            angles = rng.uniform(0.0, 2 * np.pi, size=(n_rotations, len(inp)))
            inp = np.vstack([inp] + [rotate_rays(inp, a) for a in angles])
            out = np.vstack([out] + [rotate_rays(out, a) for a in angles])
        A = design_matrix(inp, exps)
        cf = _lstsq(A, out)
        fwd.append(cf)
        rms_f.append(np.sqrt(np.mean((A @ cf - out) ** 2, axis=0)))
        if fit_inverse:
            B = design_matrix(out, exps)
            ci = _lstsq(B, inp)
            inv.append(ci)
            rms_i.append(np.sqrt(np.mean((B @ ci - inp) ** 2, axis=0)))
    r_in = entrance_pupil_radius_mm
    if r_in is None:
        r_in = float(np.sqrt(pairs.inputs[:, 0] ** 2 + pairs.inputs[:, 1] ** 2).max())
    r_out = exit_pupil_radius_mm
    if r_out is None:
        r_out = float(np.sqrt(pairs.outputs[:, 0] ** 2 + pairs.outputs[:, 1] ** 2).max())
    if r_in <= 0 or r_out <= 0:
        raise ValidationError("pupil radii must be positive")
    return RtfModel(
        exponents=exps,
        wavelengths_nm=wls,
        forward=np.array(fwd),
        inverse=np.array(inv) if fit_inverse else None,
        entrance_pupil_radius_mm=float(r_in),
        exit_pupil_radius_mm=float(r_out),
        exit_plane_offset_mm=float(exit_plane_offset_mm),
        symmetric=symmetric,
        rms_forward=np.array(rms_f),
        rms_inverse=np.array(rms_i) if fit_inverse else None,
    )


def eval_rtf(model, ray, wavelength_nm: float, nearest: bool = False):
    """Trace a single ray; returns a :class:`Ray4` or ``VIGNETTED``."""
    out, valid = model.trace(np.asarray(ray, dtype=float)[None, :], wavelength_nm, nearest)
    if not valid[0]:
        return VIGNETTED
    return Ray4(*map(float, out[0]))


def rotation_commutation_error(model, rays, wavelength_nm: float, angles, nearest: bool = False) -> float:
    """Max |F(R r) - R F(r)| over rays and angles, relative to max |F(r)|."""
    rays = np.atleast_2d(rays)
    base, ok = model.trace(rays, wavelength_nm, nearest)
    scale = np.abs(base[ok]).max()
    worst = 0.0
    for a in np.atleast_1d(angles):
        rotated, ok_r = model.trace(rotate_rays(rays, a), wavelength_nm, nearest)
        both = ok & ok_r
        diff = np.abs(rotated[both] - rotate_rays(base[both], a)).max()
        worst = max(worst, float(diff))
    return worst / scale


# -- file formats ---------------------------------------------------------

def read_ray_pairs(path) -> RayPairs:
    """Read ``# wavelength_nm <value>`` blocks of ``x_i y_i u_i v_i x_o y_o u_o v_o`` rows."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError as exc:
        raise DataFileError(f"no such ray-pair file: {path}") from exc
    wl = None
    rows, wls = [], []
    for n, line in enumerate(lines, start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            parts = s[1:].split()
            if len(parts) == 2 and parts[0] == "wavelength_nm":
                try:
                    wl = float(parts[1])
                except ValueError:
                    raise DataFileError(f"{path}:{n}: bad wavelength header") from None
            continue
        if wl is None:
            raise DataFileError(f"{path}:{n}: data row before '# wavelength_nm' header")
        try:
            vals = [float(v) for v in s.split()]
        except ValueError:
            raise DataFileError(f"{path}:{n}: non-numeric value") from None
        if len(vals) != 8:
            raise DataFileError(f"{path}:{n}: expected 8 columns, got {len(vals)}")
        rows.append(vals)
        wls.append(wl)
    if not rows:
        raise DataFileError(f"{path}: no ray pairs")
    arr = np.array(rows)
    try:
        return RayPairs(arr[:, :4], arr[:, 4:], np.array(wls))
    except ValidationError as exc:
        raise DataFileError(f"{path}: {exc}") from exc


def write_ray_pairs(pairs: RayPairs, path) -> None:
    with open(path, "w") as fh:
        for wl in np.unique(pairs.wavelengths_nm):
            sel = pairs.wavelengths_nm == wl
            fh.write(f"# wavelength_nm {float(wl)!r}\n")
            np.savetxt(fh, np.hstack([pairs.inputs[sel], pairs.outputs[sel]]), fmt="%.17g")


def save_rtf(model: RtfModel, path, provenance: dict | None = None) -> None:
    doc = {
        "format": "camsim-rtf",
        "degree": model.degree,
        "symmetric": model.symmetric,
        "entrance_pupil_radius_mm": model.entrance_pupil_radius_mm,
        "exit_pupil_radius_mm": model.exit_pupil_radius_mm,
        "exit_plane_offset_mm": model.exit_plane_offset_mm,
        "exponents": model.exponents,
        "wavelength": [],
    }
    for k, wl in enumerate(model.wavelengths_nm):
        entry = {"wavelength_nm": float(wl), "forward": model.forward[k]}
        if model.inverse is not None:
            entry["inverse"] = model.inverse[k]
        if model.rms_forward is not None:
            entry["rms_forward"] = model.rms_forward[k]
        if model.rms_inverse is not None:
            entry["rms_inverse"] = model.rms_inverse[k]
        doc["wavelength"].append(entry)
    if provenance:
        doc["provenance"] = provenance
    _io.dump_toml(doc, path)


def load_rtf(path) -> RtfModel:
    doc = _io.load_toml(path)
    if doc.get("format") != "camsim-rtf":
        raise DataFileError(f"{path}: not a camsim-rtf model file")
    try:
        entries = doc["wavelength"]
        has_inv = all("inverse" in e for e in entries)
        model = RtfModel(
            exponents=np.array(doc["exponents"], dtype=np.int64),
            wavelengths_nm=np.array([e["wavelength_nm"] for e in entries], dtype=float),
            forward=np.array([e["forward"] for e in entries], dtype=float),
            inverse=np.array([e["inverse"] for e in entries], dtype=float) if has_inv else None,
            entrance_pupil_radius_mm=float(doc["entrance_pupil_radius_mm"]),
            exit_pupil_radius_mm=float(doc["exit_pupil_radius_mm"]),
            exit_plane_offset_mm=float(doc.get("exit_plane_offset_mm", 0.0)),
            symmetric=bool(doc.get("symmetric", False)),
            rms_forward=np.array([e["rms_forward"] for e in entries]) if all("rms_forward" in e for e in entries) else None,
            rms_inverse=np.array([e["rms_inverse"] for e in entries]) if all("rms_inverse" in e for e in entries) else None,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise DataFileError(f"{path}: malformed RTF model ({exc})") from exc
    if model.forward.shape[1:] != (len(model.exponents), 4):
        raise DataFileError(f"{path}: coefficient table does not match exponent list")
    return model
