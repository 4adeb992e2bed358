"""Spectra and synthetic planar scene targets.

Every spectral quantity in camsim is a :class:`Spectrum` sampled on an
ascending wavelength grid. Scenes are stacks of Lambertian planar targets
lit by a single illuminant; radiance is ``reflectance * illuminant / pi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _io
from .errors import DataFileError, ValidationError

PLANCK = 6.62607015e-34  # J s
LIGHT_SPEED = 2.99792458e8  # m/s

DEFAULT_GRID = np.arange(400.0, 701.0, 10.0)

MCC_ROWS, MCC_COLS = 4, 6
N_MCC_PATCHES = MCC_ROWS * MCC_COLS

ILLUMINANT_ALIASES = {
    "a": "a_like",
    "a_like": "a_like",
    "cwf": "cwf_like",
    "cwf_like": "cwf_like",
    "day": "daylight_like",
    "daylight": "daylight_like",
    "daylight_like": "daylight_like",
}

_BOUNDED_KINDS = ("reflectance", "qe")


@dataclass(frozen=True)
class Spectrum:
    """Nonnegative function of wavelength.

    ``kind`` is informational except that ``"reflectance"`` and ``"qe"``
    spectra must also stay at or below 1.
    """

    wavelengths_nm: np.ndarray
    values: np.ndarray
    kind: str = "spd"

    def __post_init__(self):
        wl = np.atleast_1d(np.asarray(self.wavelengths_nm, dtype=float))
        val = np.atleast_1d(np.asarray(self.values, dtype=float))
        if wl.size == 0:
            raise ValidationError("empty spectrum")
        if wl.shape != val.shape or wl.ndim != 1:
            raise ValidationError(
                f"wavelengths and values differ in shape: {wl.shape} vs {val.shape}"
            )
        if np.any(np.diff(wl) <= 0):
            raise ValidationError("wavelengths must be strictly ascending")
        if not np.all(np.isfinite(val)) or np.any(val < 0):
            raise ValidationError("spectrum values must be finite and >= 0")
        if self.kind in _BOUNDED_KINDS and np.any(val > 1.0 + 1e-12):
            raise ValidationError(f"{self.kind} values must be <= 1")
        wl.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "values", val)

    @classmethod
    def constant(cls, value: float, grid=DEFAULT_GRID, kind: str = "spd") -> "Spectrum":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.full(grid.shape, float(value)), kind)

    def __len__(self):
        return self.wavelengths_nm.size

    def __call__(self, wavelength_nm):
        """Linear interpolation, zero outside the sampled support."""
        return np.interp(wavelength_nm, self.wavelengths_nm, self.values, left=0.0, right=0.0)

    def scaled(self, k: float) -> "Spectrum":
        return Spectrum(self.wavelengths_nm, self.values * float(k), self.kind)


def resample(s: Spectrum, grid) -> Spectrum:
    """Linearly interpolate ``s`` onto ``grid``; zero outside its support."""
    if len(s) == 0:
        raise ValidationError("empty spectrum")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValidationError("resampling grid must be non-empty and strictly ascending")
    return Spectrum(grid, s(grid), s.kind)


def band_widths(grid) -> np.ndarray:
    """Per-sample integration width (nm); 1 nm for a single-sample grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 1:
        return np.ones(1)
    return np.gradient(grid)


def energy_to_photons(values, wavelengths_nm):
    """Convert W-based spectral quantities to photons/s per the same units."""
    return np.asarray(values) * np.asarray(wavelengths_nm) * 1e-9 / (PLANCK * LIGHT_SPEED)


# -- spectral file IO -----------------------------------------------------

def read_spectrum(path, kind: str = "spd") -> Spectrum:
    """Read a two-column ``wavelength_nm value`` text file (``#`` comments)."""
    path = Path(path)
    try:
        arr = np.loadtxt(path, comments="#", ndmin=2)
    except FileNotFoundError as exc:
        raise DataFileError(f"no such spectral file: {path}") from exc
    except ValueError as exc:
        raise DataFileError(f"{path}: malformed spectral file ({exc})") from exc
    if arr.shape[1] != 2 or arr.shape[0] == 0:
        raise DataFileError(f"{path}: expected two columns, got shape {arr.shape}")
    try:
        return Spectrum(arr[:, 0], arr[:, 1], kind)
    except ValidationError as exc:
        raise DataFileError(f"{path}: {exc}") from exc


def write_spectrum(s: Spectrum, path, comment: str | None = None) -> None:
    lines = [f"# {comment}"] if comment else []
    lines += [f"{w!r} {v!r}" for w, v in zip(s.wavelengths_nm.tolist(), s.values.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_illuminant(name_or_path) -> Spectrum:
    """Bundled illuminant by name (``A``, ``CWF``, ``daylight``...) or a file path."""
    key = str(name_or_path).lower()
    if key in ILLUMINANT_ALIASES:
        return read_spectrum(_io.data_path("illuminants", ILLUMINANT_ALIASES[key] + ".txt"))
    return read_spectrum(name_or_path)


def load_mcc_reflectances(directory=None) -> list[Spectrum]:
    """The 24 MCC patch reflectances in chart order (row-major, top-left first)."""
    directory = Path(directory) if directory else _io.data_path("mcc")
    out = []
    for i in range(1, N_MCC_PATCHES + 1):
        path = directory / f"patch_{i:02d}.txt"
        if not path.exists():
            raise DataFileError(f"missing MCC reflectance file: {path}")
        out.append(read_spectrum(path, "reflectance"))
    return out


# -- targets --------------------------------------------------------------

TARGET_KINDS = ("uniform", "mcc_chart", "slanted_edge", "bar_pattern")


@dataclass(frozen=True)
class PlanarTarget:
    """A flat Lambertian target facing the camera.

    Target-plane coordinates are meters, measured from the point where the
    optical axis pierces the plane. The target center sits at
    ``(field_offset_mm / 1000, 0)``. Reflectance is piecewise constant:
    ``material_index`` maps coordinates to rows of ``materials`` (-1 outside
    the target extent, which reflects nothing).
    """

    kind: str
    materials: tuple[Spectrum, ...]
    depth_m: float
    field_offset_mm: float = 0.0
    tilt_deg: float = 0.0
    extent_m: tuple[float, float] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ValidationError(f"unknown target kind {self.kind!r}")
        if not self.depth_m > 0:
            raise ValidationError("target depth_m must be > 0")
        if self.kind == "mcc_chart" and len(self.materials) != N_MCC_PATCHES + 1:
            raise ValidationError("mcc_chart needs 24 patch reflectances plus the separator")

    def _local(self, x_m, y_m):
        return np.asarray(x_m, dtype=float) - self.field_offset_mm * 1e-3, np.asarray(y_m, dtype=float)

    def material_index(self, x_m, y_m) -> np.ndarray:
        x, y = self._local(x_m, y_m)
        x, y = np.broadcast_arrays(x, y)
        if self.kind == "uniform":
            idx = np.zeros(x.shape, dtype=np.int64)
        elif self.kind == "slanted_edge":
            t = np.deg2rad(self.tilt_deg)
            # edge through the center, tilted from vertical; ties go bright (index 1)
            idx = (x * np.cos(t) - y * np.sin(t) >= 0.0).astype(np.int64)
        elif self.kind == "bar_pattern":
            period = self.params["period_m"]
            idx = (np.floor(x / (period / 2.0)).astype(np.int64) % 2 == 0).astype(np.int64)
        else:
            idx = self._mcc_index(x, y)
        if self.extent_m is not None:
            w, h = self.extent_m
            outside = (np.abs(x) > w / 2.0) | (np.abs(y) > h / 2.0)
            idx = np.where(outside, -1, idx)
        return idx

    def _mcc_index(self, x, y):
        pitch = self.params["patch_pitch_m"]
        border = self.params["separator_fraction"] * pitch / 2.0
        u = x + MCC_COLS * pitch / 2.0
        v = y + MCC_ROWS * pitch / 2.0
        col = np.floor(u / pitch).astype(np.int64)
        row = np.floor(v / pitch).astype(np.int64)
        fu = u - col * pitch
        fv = v - row * pitch
        inside = (col >= 0) & (col < MCC_COLS) & (row >= 0) & (row < MCC_ROWS)
        on_patch = (fu >= border) & (fu < pitch - border) & (fv >= border) & (fv < pitch - border)
        idx = np.where(inside & on_patch, row * MCC_COLS + col, N_MCC_PATCHES)
        return idx

    def reflectance_at(self, x_m: float, y_m: float) -> Spectrum | None:
        i = int(self.material_index(x_m, y_m))
        return None if i < 0 else self.materials[i]


def patch_center(target: PlanarTarget, patch: int) -> tuple[float, float]:
    """Target-plane center (m) of MCC patch ``patch`` (0-based, row-major)."""
    pitch = target.params["patch_pitch_m"]
    row, col = divmod(patch, MCC_COLS)
    x = (col + 0.5 - MCC_COLS / 2.0) * pitch + target.field_offset_mm * 1e-3
    y = (row + 0.5 - MCC_ROWS / 2.0) * pitch
    return x, y


@dataclass(frozen=True)
class SceneRadiance:
    """Illuminant plus one or more planar targets, on a common wavelength grid.

    Targets are kept sorted by depth; a ray is assigned the first target it
    hits (nearest plane whose extent contains the intersection).
    """

    illuminant: Spectrum
    targets: tuple[PlanarTarget, ...]
    wavelengths_nm: np.ndarray = field(default_factory=lambda: DEFAULT_GRID.copy())

    def __post_init__(self):
        if np.any(self.illuminant.values < 0):
            raise ValidationError("illuminant must be nonnegative")
        if not self.targets:
            raise ValidationError("scene needs at least one target")
        grid = np.asarray(self.wavelengths_nm, dtype=float)
        object.__setattr__(self, "wavelengths_nm", grid)
        object.__setattr__(self, "targets", tuple(sorted(self.targets, key=lambda t: t.depth_m)))

    @property
    def target(self) -> PlanarTarget:
        return self.targets[0]

    def material_radiance(self, target: PlanarTarget | int = 0) -> np.ndarray:
        """Radiance table, shape (n_materials, n_wavelengths), W sr^-1 m^-2 nm^-1."""
        if isinstance(target, int):
            target = self.targets[target]
        illum = self.illuminant(self.wavelengths_nm)
        refl = np.stack([m(self.wavelengths_nm) for m in target.materials])
        return refl * illum[None, :] / np.pi

    def radiance(self, x_m, y_m, target: int = 0) -> np.ndarray:
        """Spectral radiance at target-plane points; zero outside the target."""
        t = self.targets[target]
        idx = np.asarray(t.material_index(x_m, y_m))
        table = self.material_radiance(t)
        out = np.zeros(idx.shape + (self.wavelengths_nm.size,))
        hit = idx >= 0
        out[hit] = table[idx[hit]]
        return out

    def scaled(self, k: float) -> "SceneRadiance":
        return SceneRadiance(self.illuminant.scaled(k), self.targets, self.wavelengths_nm)


def compose(*scenes: SceneRadiance) -> SceneRadiance:
    """Merge the targets of several scenes lit by the same illuminant."""
    first = scenes[0]
    for s in scenes[1:]:
        same = np.array_equal(s.wavelengths_nm, first.wavelengths_nm) and np.allclose(
            s.illuminant(first.wavelengths_nm), first.illuminant(first.wavelengths_nm)
        )
        if not same:
            raise ValidationError("composed scenes must share illuminant and wavelength grid")
    targets = tuple(t for s in scenes for t in s.targets)
    return SceneRadiance(first.illuminant, targets, first.wavelengths_nm)


def _flat(value):
    return Spectrum.constant(value, DEFAULT_GRID, "reflectance")


def make_uniform(
    illuminant: Spectrum,
    reflectance: float | Spectrum = 0.9,
    depth_m: float = 1.0,
    extent_m=None,
    grid=DEFAULT_GRID,
) -> SceneRadiance:
    refl = reflectance if isinstance(reflectance, Spectrum) else _flat(reflectance)
    target = PlanarTarget("uniform", (refl,), depth_m, extent_m=extent_m)
    return SceneRadiance(illuminant, (target,), np.asarray(grid, float))


def make_mcc(
    illuminant: Spectrum,
    depth_m: float = 1.0,
    field_offset_mm: float = 0.0,
    patch_pitch_m: float = 0.04,
    separator_fraction: float = 0.15,
    separator_reflectance: float = 0.04,
    reflectance_dir=None,
    grid=DEFAULT_GRID,
) -> SceneRadiance:
    """Macbeth ColorChecker: 6x4 patches separated by dark lines.

    The separator lines default to 4% reflectance; real chart borders are
    not perfectly black.
    """
    patches = load_mcc_reflectances(reflectance_dir)
    materials = tuple(patches) + (_flat(separator_reflectance),)
    extent = (MCC_COLS * patch_pitch_m, MCC_ROWS * patch_pitch_m)
    target = PlanarTarget(
        "mcc_chart",
        materials,
        depth_m,
        field_offset_mm,
        extent_m=extent,
        params={"patch_pitch_m": patch_pitch_m, "separator_fraction": separator_fraction},
    )
    return SceneRadiance(illuminant, (target,), np.asarray(grid, float))


def make_slanted_edge(
    depth_m: float,
    field_offset_mm: float = 0.0,
    tilt_deg: float = 5.0,
    illuminant: Spectrum | None = None,
    dark: float = 0.05,
    light: float = 0.9,
    extent_m=None,
    grid=DEFAULT_GRID,
) -> SceneRadiance:
    """Dark/light step across a line tilted ``tilt_deg`` from vertical.

    Points exactly on the edge line belong to the bright side.
    """
    if not 0.0 < tilt_deg < 45.0:
        raise ValidationError(f"slanted-edge tilt must be in (0, 45) degrees, got {tilt_deg}")
    if illuminant is None:
        illuminant = Spectrum.constant(1.0, grid)
    target = PlanarTarget(
        "slanted_edge", (_flat(dark), _flat(light)), depth_m, field_offset_mm, tilt_deg, extent_m
    )
    return SceneRadiance(illuminant, (target,), np.asarray(grid, float))


def make_bar_pattern(
    depth_m: float,
    period_m: float,
    field_offset_mm: float = 0.0,
    illuminant: Spectrum | None = None,
    dark: float = 0.05,
    light: float = 0.9,
    extent_m=None,
    grid=DEFAULT_GRID,
) -> SceneRadiance:
    if illuminant is None:
        illuminant = Spectrum.constant(1.0, grid)
    target = PlanarTarget(
        "bar_pattern",
        (_flat(dark), _flat(light)),
        depth_m,
        field_offset_mm,
        extent_m=extent_m,
        params={"period_m": period_m},
    )
    return SceneRadiance(illuminant, (target,), np.asarray(grid, float))
