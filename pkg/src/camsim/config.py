"""Run configuration for ``camsim simulate``: scene, optics, sensor and output.

A run config is a TOML document::

    seed = 1
    frames = 1

    [scene]
    illuminant = "daylight"       # bundled name or spectral file
    illuminant_scale = 0.015

    [[scene.targets]]
    kind = "slanted_edge"
    depth_m = 0.3
    field_height_mm = 0.7         # where the target center lands on the sensor

    [optics]
    kind = "thin_lens"            # or model = "lens.toml" (a fitted RTF)
    focal_length_mm = 4.38
    pupil_radius_mm = 1.265
    focus_m = 0.3

    [sensor]
    profile = "imx363"
    rows = 96
    cols = 96

Relative paths resolve against the config file's directory.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _io
from .errors import CamsimError, ConfigError, DataFileError
from .optics import IdealThinLens, SensorGeometry, best_focus_distance, load_rtf, object_height_for_field
from .radiometry import (
    DEFAULT_GRID,
    PlanarTarget,
    SceneRadiance,
    compose,
    load_illuminant,
    make_bar_pattern,
    make_mcc,
    make_slanted_edge,
    make_uniform,
)
from .sensor import SensorConfig, load_profile

_TOP_KEYS = {"seed", "frames", "threads", "out", "scene", "optics", "sensor"}
_SCENE_KEYS = {"illuminant", "illuminant_scale", "wavelengths_nm", "targets"}
_TARGET_KEYS = {
    "kind", "depth_m", "field_height_mm", "field_offset_mm", "tilt_deg", "extent_m",
    "reflectance", "period_m", "dark", "light", "patch_pitch_m", "separator_reflectance",
}
_OPTICS_KEYS = {
    "kind", "model", "focal_length_mm", "pupil_radius_mm", "focus_m", "sensor_distance_mm",
    "samples_per_pixel", "nearest_wavelength", "wavelength_nm", "shared_samples",
}
_SENSOR_KEYS = {"profile", "rows", "cols", "center_mm", "exposure_s", "noiseless", "fpn_seed"}


@dataclass
class RunConfig:
    scene: SceneRadiance
    model: object
    geometry: SensorGeometry
    sensor: SensorConfig
    samples_per_pixel: int = 16
    nearest_wavelength: bool = True
    shared_samples: bool = False
    seed: int = 0
    frames: int = 1
    threads: int = 1
    out: Path = Path("out")
    fpn_seed: int = 0
    config_hash: str = ""
    source: dict = field(default_factory=dict)


def _check_keys(section: dict, allowed: set, where: str):
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)} (allowed: {sorted(allowed)})")


def _resolve(base: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _need(section, key, where):
    if key not in section:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return section[key]


def build_optics(sec: dict, base: Path):
    """Lens model and exit-plane-to-sensor distance from an ``[optics]`` table."""
    _check_keys(sec, _OPTICS_KEYS, "[optics]")
    if "model" in sec:
        model = load_rtf(_resolve(base, sec["model"]))
    elif sec.get("kind", "thin_lens") == "thin_lens":
        model = IdealThinLens(float(sec.get("pupil_radius_mm", 1.265)),
                              focal_length_mm=float(sec.get("focal_length_mm", 4.38)))
    else:
        raise ConfigError(f"[optics]: unknown kind {sec['kind']!r}; use 'thin_lens' or give model = <file>")
    wl = float(sec.get("wavelength_nm", 550.0))
    nearest = bool(sec.get("nearest_wavelength", True))
    if "sensor_distance_mm" in sec:
        distance = float(sec["sensor_distance_mm"])
    elif "focus_m" in sec:
        distance = best_focus_distance(model, float(sec["focus_m"]), wl, nearest=nearest)
    else:
        distance = float(model.back_focal_distance_mm)
    return model, distance, wl, nearest


def _build_target(t: dict, k: int, illum, grid, model, distance, wl, nearest):
    where = f"[[scene.targets]] #{k + 1}"
    _check_keys(t, _TARGET_KEYS, where)
    kind = _need(t, "kind", where)
    depth = float(_need(t, "depth_m", where))
    if "field_height_mm" in t and "field_offset_mm" in t:
        raise ConfigError(f"{where}: give field_height_mm or field_offset_mm, not both")
    offset = float(t.get("field_offset_mm", 0.0))
    if "field_height_mm" in t:
        offset = object_height_for_field(model, float(t["field_height_mm"]), depth, distance, wl, nearest)
    extent = tuple(t["extent_m"]) if "extent_m" in t else None
    if kind == "uniform":
        base_scene = make_uniform(illum, float(t.get("reflectance", 0.9)), depth, extent, grid)
        target = PlanarTarget("uniform", base_scene.target.materials, depth, offset, extent_m=extent)
        return SceneRadiance(illum, (target,), grid)
    if kind == "slanted_edge":
        return make_slanted_edge(depth, offset, float(t.get("tilt_deg", 5.0)), illum,
                                 float(t.get("dark", 0.05)), float(t.get("light", 0.9)), extent, grid)
    if kind == "bar_pattern":
        return make_bar_pattern(depth, float(_need(t, "period_m", where)), offset, illum,
                                float(t.get("dark", 0.05)), float(t.get("light", 0.9)), extent, grid)
    if kind == "mcc_chart":
        return make_mcc(illum, depth, offset, float(t.get("patch_pitch_m", 0.04)),
                        separator_reflectance=float(t.get("separator_reflectance", 0.04)), grid=grid)
    raise ConfigError(f"{where}: unknown target kind {kind!r}")


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a run config; ``overrides`` replace top-level keys."""
    path = Path(path)
    try:
        raw_bytes = path.read_bytes()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    try:
        doc = _io.tomllib.loads(raw_bytes.decode("utf-8"))
    except _io.tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    _check_keys(doc, _TOP_KEYS, str(path))
    base = path.parent
    # out is not part of the experiment, so it stays out of the hash
    digest = hashlib.sha256(
        raw_bytes + repr(sorted((k, v) for k, v in overrides.items() if k not in ("out", "threads"))).encode()
    ).hexdigest()[:16]
    out = Path(overrides.pop("out")) if "out" in overrides else _resolve(base, doc.get("out", "out"))
    doc.update(overrides)
    try:
        cfg = _build(doc, base, digest)
        cfg.out = out
        return cfg
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except DataFileError:
        raise
    except CamsimError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad value ({exc})") from exc


def _build(doc, base, digest) -> RunConfig:
    scene_sec = dict(_need(doc, "scene", "config"))
    optics_sec = dict(doc.get("optics", {}))
    sensor_sec = dict(doc.get("sensor", {}))
    _check_keys(scene_sec, _SCENE_KEYS, "[scene]")
    _check_keys(sensor_sec, _SENSOR_KEYS, "[sensor]")

    model, distance, wl, nearest = build_optics(optics_sec, base)

    profile = sensor_sec.get("profile", "imx363")
    if Path(str(profile)).suffix:
        profile = _resolve(base, profile)
    sensor = load_profile(profile)
    if "exposure_s" in sensor_sec:
        sensor = sensor.replace(exposure_s=float(sensor_sec["exposure_s"]))
    if sensor_sec.get("noiseless", False):
        sensor = sensor.noiseless()

    grid = np.asarray(scene_sec.get("wavelengths_nm", DEFAULT_GRID), dtype=float)
    illum_name = scene_sec.get("illuminant", "daylight")
    illum_path = _resolve(base, illum_name)
    illum = load_illuminant(illum_path if illum_path.exists() else illum_name)
    illum = illum.scaled(float(scene_sec.get("illuminant_scale", 1.0)))
    targets = _need(scene_sec, "targets", "[scene]")
    if not targets:
        raise ConfigError("[scene]: at least one target is required")
    scenes = [_build_target(t, k, illum, grid, model, distance, wl, nearest) for k, t in enumerate(targets)]
    scene = compose(*scenes) if len(scenes) > 1 else scenes[0]

    geometry = SensorGeometry(
        int(sensor_sec.get("rows", 64)),
        int(sensor_sec.get("cols", 64)),
        sensor.pixel_size_um[0],
        distance,
        tuple(float(c) for c in sensor_sec.get("center_mm", (0.0, 0.0))),
    )
    return RunConfig(
        scene=scene,
        model=model,
        geometry=geometry,
        sensor=sensor,
        samples_per_pixel=int(optics_sec.get("samples_per_pixel", 16)),
        nearest_wavelength=nearest,
        shared_samples=bool(optics_sec.get("shared_samples", False)),
        seed=int(doc.get("seed", 0)),
        frames=int(doc.get("frames", 1)),
        threads=int(doc.get("threads", 1)),
        fpn_seed=int(sensor_sec.get("fpn_seed", 0)),
        config_hash=digest,
        source=doc,
    )
