"""CMOS sensor model: irradiance -> electrons -> volts -> raw digital values.

Electrons and volts are linked by ``voltage_swing / well_capacity`` volts
per electron, which puts the mV-denominated noise terms (DSNU, read noise,
dark voltage) on the same scale as the conversion gain in dv/e-.
"""
from __future__ import annotations

import dataclasses
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _io
from .errors import DataFileError, ValidationError
from .optics.render import IrradianceImage
from .radiometry import Spectrum, band_widths, read_spectrum

CHANNELS = ("R", "G", "B")
BIT_DEPTHS = (8, 10, 12, 14, 16)
# full well may overshoot the code range by this fraction (6000 e- x 0.1707 = 1024.2)
_FULL_WELL_SLACK = 1e-3


@dataclass(frozen=True)
class SensorConfig:
    """Sensor parameters. Defaults are the bundled ``imx363`` profile values."""

    qe: tuple[Spectrum, Spectrum, Spectrum] | None = None
    pixel_size_um: tuple[float, float] = (1.4, 1.4)
    fill_factor: float = 1.0
    well_capacity_e: float = 6000.0
    voltage_swing_V: float = 0.4591
    conversion_gain_dv_per_e: float = 0.1707
    analog_gain: float = 1.0
    black_level_dv: float = 64.0
    bit_depth: int = 10
    dsnu_mV: float = 0.038
    prnu_percent: float = 0.54
    dark_voltage_mV_per_s: float = 0.02
    read_noise_mV: float = 0.226
    cfa_pattern: str = "RGGB"
    exposure_s: float = 0.01
    shot_noise: bool = True
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "pixel_size_um", tuple(float(p) for p in self.pixel_size_um))
        object.__setattr__(self, "cfa_pattern", self.cfa_pattern.upper())
        numeric = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if isinstance(getattr(self, f.name), (int, float)) and not isinstance(getattr(self, f.name), bool)
        }
        bad = [k for k, v in numeric.items() if not np.isfinite(v) or v < 0]
        if bad or min(self.pixel_size_um) <= 0:
            raise ValidationError(f"sensor parameters must be finite and nonnegative: {bad or 'pixel_size_um'}")
        if not 0 < self.fill_factor <= 1:
            raise ValidationError("fill_factor must be in (0, 1]")
        if self.bit_depth not in BIT_DEPTHS:
            raise ValidationError(f"bit_depth must be one of {BIT_DEPTHS}")
        if self.well_capacity_e <= 0 or self.voltage_swing_V <= 0:
            raise ValidationError("well capacity and voltage swing must be positive")
        if len(self.cfa_pattern) != 4 or set(self.cfa_pattern) - set(CHANNELS):
            raise ValidationError(f"cfa_pattern must be four of R/G/B, got {self.cfa_pattern!r}")
        if self.well_capacity_e * self.conversion_gain_dv_per_e > 2**self.bit_depth * (1 + _FULL_WELL_SLACK):
            raise ValidationError("full well maps outside the digital code range")
        if self.qe is not None and len(self.qe) != 3:
            raise ValidationError("qe needs one spectrum per channel (R, G, B)")

    @property
    def volts_per_electron(self) -> float:
        return self.voltage_swing_V / self.well_capacity_e

    @property
    def dv_per_electron(self) -> float:
        return self.conversion_gain_dv_per_e * self.analog_gain

    @property
    def max_dv(self) -> int:
        return 2**self.bit_depth - 1

    @property
    def pixel_area_m2(self) -> float:
        return self.pixel_size_um[0] * self.pixel_size_um[1] * 1e-12

    @property
    def prnu_sigma(self) -> float:
        return self.prnu_percent / 100.0

    def mv_to_electrons(self, mv):
        return np.asarray(mv) * 1e-3 / self.volts_per_electron

    def dark_electrons(self, exposure_s=None) -> float:
        t = self.exposure_s if exposure_s is None else exposure_s
        return float(self.mv_to_electrons(self.dark_voltage_mV_per_s * t))

    def replace(self, **changes) -> "SensorConfig":
        return dataclasses.replace(self, **changes)

    def noiseless(self) -> "SensorConfig":
        """Same sensor with every noise source switched off."""
        return self.replace(shot_noise=False, dsnu_mV=0.0, prnu_percent=0.0,
                            dark_voltage_mV_per_s=0.0, read_noise_mV=0.0)

    def without_temporal_noise(self) -> "SensorConfig":
        """Keep fixed-pattern noise, drop shot, dark and read noise."""
        return self.replace(shot_noise=False, dark_voltage_mV_per_s=0.0, read_noise_mV=0.0)

    def channel_map(self, shape) -> np.ndarray:
        """Channel index (0=R, 1=G, 2=B) of every pixel for the CFA tiling."""
        tile = np.array([CHANNELS.index(c) for c in self.cfa_pattern]).reshape(2, 2)
        rows, cols = shape
        return np.tile(tile, ((rows + 1) // 2, (cols + 1) // 2))[:rows, :cols]

    def to_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "qe"}
        doc["pixel_size_um"] = list(self.pixel_size_um)
        return doc


def cfa_mask(cfa_pattern: str, shape, channel: str) -> np.ndarray:
    tile = np.array(list(cfa_pattern.upper())).reshape(2, 2) == channel.upper()
    rows, cols = shape
    return np.tile(tile, ((rows + 1) // 2, (cols + 1) // 2))[:rows, :cols]


def load_profile(name_or_path="imx363") -> SensorConfig:
    """Sensor profile from TOML; bare names resolve to bundled profiles.

    Relative QE paths are looked up next to the profile, then in the data
    directory.
    """
    path = Path(name_or_path)
    if not path.suffix:
        path = _io.data_path("profiles", f"{name_or_path}.toml")
    doc = _io.load_toml(path)
    sec = dict(doc.get("sensor", doc))
    qe_paths = sec.pop("qe", None)
    known = {f.name for f in dataclasses.fields(SensorConfig)}
    unknown = set(sec) - known
    if unknown:
        raise DataFileError(f"{path}: unknown sensor keys {sorted(unknown)}")
    qe = None
    if qe_paths is not None:
        qe = tuple(_resolve_qe(qe_paths[c], path.parent) for c in CHANNELS)
    try:
        return SensorConfig(qe=qe, **sec)
    except (TypeError, ValidationError) as exc:
        raise DataFileError(f"{path}: {exc}") from exc


def _resolve_qe(rel, base: Path) -> Spectrum:
    for cand in (base / rel, _io.data_dir() / rel):
        if cand.exists():
            return read_spectrum(cand, "qe")
    raise DataFileError(f"QE file not found: {rel}")


@dataclass(frozen=True)
class FixedPatternMaps:
    """Per-pixel PRNU gains and DSNU offsets; fixed across exposures."""

    prnu_gain: np.ndarray
    dsnu_offset_mV: np.ndarray
    seed: int = 0

    @classmethod
    def generate(cls, cfg: SensorConfig, shape, seed: int = 0) -> "FixedPatternMaps":
        rng = np.random.default_rng([int(seed), 0x465042])
        gain = 1.0 + rng.normal(0.0, 1.0, shape) * cfg.prnu_sigma
        offset = rng.normal(0.0, 1.0, shape) * cfg.dsnu_mV
        return cls(gain, offset, int(seed))

    @classmethod
    def none(cls, shape) -> "FixedPatternMaps":
        return cls(np.ones(shape), np.zeros(shape), 0)

    @property
    def shape(self):
        return self.prnu_gain.shape


@dataclass(frozen=True)
class RawImage:
    """Mosaicked digital values plus the capture metadata needed downstream."""

    data: np.ndarray
    cfa_pattern: str = "RGGB"
    exposure_s: float = 0.01
    analog_gain: float = 1.0
    seed: int = 0
    black_level_dv: float = 64.0
    bit_depth: int = 10
    frame: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValidationError("raw image must be 2-D")
        if data.size and (data.min() < 0 or data.max() > 2**self.bit_depth - 1):
            raise ValidationError("raw values outside the code range")
        object.__setattr__(self, "data", data.astype(np.uint16))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def mask(self, channel: str) -> np.ndarray:
        return cfa_mask(self.cfa_pattern, self.data.shape, channel)

    def black_subtracted(self) -> np.ndarray:
        return self.data.astype(float) - self.black_level_dv

    def metadata(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "cfa_pattern": self.cfa_pattern,
            "exposure_s": self.exposure_s,
            "analog_gain": self.analog_gain,
            "seed": self.seed,
            "frame": self.frame,
            "black_level_dv": self.black_level_dv,
            "bit_depth": self.bit_depth,
        }


def expected_electrons(irr: IrradianceImage, cfg: SensorConfig, exposure_s: float | None = None) -> np.ndarray:
    """Mean photo-electrons per pixel: ``t * A * ff * sum(E * QE_c * dlambda)``."""
    if cfg.qe is None:
        raise ValidationError("sensor config has no QE curves")
    if abs(irr.pixel_pitch_um - cfg.pixel_size_um[0]) > 1e-9 * cfg.pixel_size_um[0]:
        raise ValidationError(
            f"irradiance pitch {irr.pixel_pitch_um} um does not match sensor pixel {cfg.pixel_size_um[0]} um"
        )
    t = cfg.exposure_s if exposure_s is None else exposure_s
    grid = irr.wavelengths_nm
    dl = band_widths(grid)
    per_channel = np.stack(
        [irr.data @ (q(grid) * dl) for q in cfg.qe], axis=-1
    )  # (rows, cols, 3)
    chan = cfg.channel_map(irr.shape)
    flux = np.take_along_axis(per_channel, chan[..., None], axis=-1)[..., 0]
    return t * cfg.pixel_area_m2 * cfg.fill_factor * flux


def _row_rng(seed, frame, row):
    return np.random.default_rng([int(seed), int(frame), int(row)])


def _capture_rows(mu, cfg, fpn, seed, frame, rows, exposure_s):
    dark_mean = cfg.dark_electrons(exposure_s)
    vpe_mv = cfg.volts_per_electron * 1e3
    out = np.empty((len(rows), mu.shape[1]))
    for i, r in enumerate(rows):
        rng = _row_rng(seed, frame, r)
        sig = rng.poisson(mu[r]).astype(float) if cfg.shot_noise else mu[r].astype(float)
        dark = rng.poisson(dark_mean, mu.shape[1]) if dark_mean > 0 else 0.0
        read = rng.normal(0.0, 1.0, mu.shape[1]) * cfg.read_noise_mV
        e = np.minimum(sig * fpn.prnu_gain[r] + dark, cfg.well_capacity_e)
        mv = e * vpe_mv + fpn.dsnu_offset_mV[r] + read
        out[i] = mv / vpe_mv * cfg.dv_per_electron + cfg.black_level_dv
    return np.clip(np.floor(out + 0.5), 0, cfg.max_dv)


def simulate_capture(
    mu,
    cfg: SensorConfig,
    fpn: FixedPatternMaps | None = None,
    seed: int = 0,
    frame: int = 0,
    threads: int = 1,
    exposure_s: float | None = None,
) -> RawImage:
    """One raw frame from a mean photo-electron map.

    Temporal noise for row r of frame k comes from its own stream keyed by
    ``(seed, k, r)``, so any split of rows across threads gives the same frame.
    ``exposure_s`` only sets the dark-current integration time and the
    recorded metadata; ``mu`` already includes the exposure.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 2:
        raise ValidationError("electron map must be 2-D")
    if np.any(mu < 0) or not np.all(np.isfinite(mu)):
        raise ValidationError("electron map must be finite and nonnegative")
    if fpn is None:
        fpn = FixedPatternMaps.none(mu.shape)
    if fpn.shape != mu.shape:
        raise ValidationError(f"fixed-pattern maps {fpn.shape} do not match image {mu.shape}")
    t = cfg.exposure_s if exposure_s is None else exposure_s
    rows = np.arange(mu.shape[0])
    if threads > 1:
        blocks = np.array_split(rows, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _capture_rows(mu, cfg, fpn, seed, frame, b, t), blocks))
        dv = np.vstack(parts)
    else:
        dv = _capture_rows(mu, cfg, fpn, seed, frame, rows, t)
    return RawImage(dv.astype(np.uint16), cfg.cfa_pattern, t, cfg.analog_gain, int(seed),
                    cfg.black_level_dv, cfg.bit_depth, int(frame))


def capture_stack(mu, cfg, fpn=None, n_frames: int = 1, seed: int = 0, threads: int = 1,
                  exposure_s=None) -> list[RawImage]:
    """``n_frames`` captures sharing the fixed pattern, each with fresh temporal noise."""
    if n_frames < 1:
        raise ValidationError("n_frames must be >= 1")
    return [simulate_capture(mu, cfg, fpn, seed, k, threads, exposure_s) for k in range(n_frames)]


# -- PGM + sidecar --------------------------------------------------------

def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".toml")


def write_pgm(raw: RawImage, path, provenance: dict | None = None) -> None:
    """Binary PGM (P5), maxval ``2**bit_depth - 1``, big-endian 16-bit samples.

    8-bit images use single-byte samples as the PGM format requires for
    maxval < 256. A TOML sidecar next to the file stores the metadata.
    """
    maxval = 2**raw.bit_depth - 1
    header = f"P5\n{raw.width} {raw.height}\n{maxval}\n".encode("ascii")
    body = raw.data.astype(">u2" if maxval > 255 else "u1").tobytes()
    Path(path).write_bytes(header + body)
    doc = {"image": raw.metadata()}
    if provenance:
        doc["provenance"] = provenance
    _io.dump_toml(doc, sidecar_path(path))


_PGM_TOKEN = re.compile(rb"(?:\s+|#[^\n]*\n)*([0-9]+|P5)")


def read_pgm(path) -> RawImage:
    """Read a P5 PGM; metadata comes from the sidecar when present."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError as exc:
        raise DataFileError(f"no such image: {path}") from exc
    pos, tokens = 0, []
    for _ in range(4):
        m = _PGM_TOKEN.match(blob, pos)
        if not m:
            raise DataFileError(f"{path}: malformed PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise DataFileError(f"{path}: not a binary PGM (P5)")
    width, height, maxval = (int(t) for t in tokens[1:])
    pos += 1  # single whitespace after maxval
    dtype = ">u2" if maxval > 255 else "u1"
    n = width * height
    if len(blob) - pos < n * np.dtype(dtype).itemsize:
        raise DataFileError(f"{path}: truncated PGM data")
    data = np.frombuffer(blob, dtype=dtype, count=n, offset=pos).reshape(height, width)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = _io.load_toml(side).get("image", {})
    bit_depth = int(meta.get("bit_depth", int(np.ceil(np.log2(maxval + 1)))))
    return RawImage(
        data,
        cfa_pattern=meta.get("cfa_pattern", "RGGB"),
        exposure_s=float(meta.get("exposure_s", 0.0)),
        analog_gain=float(meta.get("analog_gain", 1.0)),
        seed=int(meta.get("seed", 0)),
        black_level_dv=float(meta.get("black_level_dv", 0.0)),
        bit_depth=bit_depth,
        frame=int(meta.get("frame", 0)),
    )
