"""Sensor-plane irradiance from planar scenes through a ray-transfer lens.

Rendering traces backward: for every pixel, points on the pixel and points
on the exit pupil define rays that the inverse lens map carries to the
entrance plane and on to the scene targets. The Monte-Carlo weight of a
sample is the geometric throughput ``A_pupil * cos^2(theta) / r^2`` of the
pupil patch seen from the sensor point, which makes a uniform scene fall
off as cos^4 for small apertures.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError, VignettedError
from ..radiometry import Spectrum, SceneRadiance, energy_to_photons, make_uniform
from .sampling import uniforms

_CHUNK_SAMPLES = 1 << 17


@dataclass(frozen=True)
class SensorGeometry:
    """Pixel grid placed ``sensor_distance_mm`` behind the lens exit plane.

    ``center_mm`` is the sensor-plane position of the grid center relative
    to the optical axis; x follows columns and y follows rows.
    """

    rows: int
    cols: int
    pixel_pitch_um: float
    sensor_distance_mm: float
    center_mm: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("sensor geometry needs at least one pixel")
        if self.pixel_pitch_um <= 0:
            raise ValidationError("pixel pitch must be positive")
        if self.sensor_distance_mm <= 0:
            raise ValidationError("sensor must sit behind the exit plane (distance > 0)")

    @property
    def pitch_mm(self) -> float:
        return self.pixel_pitch_um * 1e-3

    def pixel_centers_mm(self, rows, cols):
        x = self.center_mm[0] + (np.asarray(cols) - (self.cols - 1) / 2.0) * self.pitch_mm
        y = self.center_mm[1] + (np.asarray(rows) - (self.rows - 1) / 2.0) * self.pitch_mm
        return x, y

    def field_heights_mm(self) -> np.ndarray:
        r, c = np.mgrid[0 : self.rows, 0 : self.cols]
        x, y = self.pixel_centers_mm(r, c)
        return np.hypot(x, y)


@dataclass(frozen=True)
class IrradianceImage:
    """Spectral irradiance, photons s^-1 m^-2 nm^-1, shape (rows, cols, n_wavelengths)."""

    data: np.ndarray
    wavelengths_nm: np.ndarray
    pixel_pitch_um: float
    samples_per_pixel: int
    geometry: SensorGeometry | None = None

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != len(self.wavelengths_nm):
            raise ValidationError("irradiance data must be (rows, cols, n_wavelengths)")
        if not np.all(np.isfinite(self.data)) or np.any(self.data < 0):
            raise ValidationError("irradiance must be finite and nonnegative")

    @property
    def shape(self):
        return self.data.shape[:2]


def _wavelength_groups(model, grid, nearest):
    if getattr(model, "wavelengths_nm", None) is None:
        return [(float(grid[0]), np.arange(len(grid)))]
    keys = np.array([model.wavelength_index(w, nearest) for w in grid])
    return [(float(model.wavelengths_nm[k]), np.flatnonzero(keys == k)) for k in np.unique(keys)]


def _exit_rays(sx, sy, pupil_u, radius, distance):
    r = radius * np.sqrt(pupil_u[:, 0])
    phi = 2.0 * np.pi * pupil_u[:, 1]
    qx, qy = r * np.cos(phi), r * np.sin(phi)
    dx, dy = sx - qx, sy - qy
    r2 = dx * dx + dy * dy + distance * distance
    rn = np.sqrt(r2)
    rays = np.column_stack([qx, qy, dx / rn, dy / rn])
    weight = np.pi * radius * radius * distance * distance / (r2 * r2)
    return rays, weight


def _scene_tables(scene: SceneRadiance):
    tables, offsets, n = [], [], 0
    for t in scene.targets:
        tab = energy_to_photons(scene.material_radiance(t), scene.wavelengths_nm[None, :])
        tables.append(tab)
        offsets.append(n)
        n += tab.shape[0]
    return np.vstack(tables), offsets


def _hit_materials(scene, offsets, entrance, ok):
    x, y, u, v = entrance.T
    w = np.sqrt(np.clip(1.0 - u * u - v * v, 1e-300, None))
    mat = np.full(len(entrance), -1, dtype=np.int64)
    for t, off in zip(scene.targets, offsets):
        todo = ok & (mat < 0)
        if not todo.any():
            break
        d = t.depth_m * 1e3
        px = (x[todo] - u[todo] * d / w[todo]) * 1e-3
        py = (y[todo] - v[todo] * d / w[todo]) * 1e-3
        idx = t.material_index(px, py)
        mat[np.flatnonzero(todo)[idx >= 0]] = idx[idx >= 0] + off
    return mat


def _irradiance_block(scene, model, table, offsets, groups, sx, sy, pupil_u, distance, nearest):
    """Mean throughput-weighted photon radiance for P points x S samples each."""
    n_points, n_samples = sx.shape
    n_mat = table.shape[0]
    rays, weight = _exit_rays(sx.ravel(), sy.ravel(), pupil_u.reshape(-1, 2),
                              model.exit_pupil_radius_mm, distance)
    owner = np.repeat(np.arange(n_points), n_samples)
    out = np.zeros((n_points, len(scene.wavelengths_nm)))
    for wl, bands in groups:
        entrance, ok = model.trace_inverse(rays, wl, nearest)
        mat = _hit_materials(scene, offsets, entrance, ok)
        keep = mat >= 0
        acc = np.bincount(owner[keep] * n_mat + mat[keep], weights=weight[keep],
                          minlength=n_points * n_mat).reshape(n_points, n_mat)
        block = np.zeros((n_points, len(bands)))
        for m in range(n_mat):
            if acc[:, m].any():
                block += acc[:, m : m + 1] * table[m, bands]
        out[:, bands] = block / n_samples
    return out


def render(
    scene: SceneRadiance,
    model,
    geometry: SensorGeometry,
    samples_per_pixel: int = 16,
    seed: int = 0,
    threads: int = 1,
    nearest_wavelength: bool = False,
    shared_samples: bool = False,
) -> IrradianceImage:
    """Monte-Carlo sensor irradiance of ``scene`` through ``model``.

    Each pixel draws its samples from a random stream keyed by
    ``(seed, row, col)``, so the output is bit-identical for any thread count.
    With ``shared_samples`` every pixel reuses one pattern of pixel and pupil
    positions instead: the Monte-Carlo error becomes smooth across the image
    (a uniform scene renders free of pixel-to-pixel noise).
    ``nearest_wavelength`` must be set to render scene bands that the model
    was not fit at.
    """
    if samples_per_pixel < 1:
        raise ValidationError("samples_per_pixel must be >= 1")
    if model.exit_pupil_radius_mm <= 0 or model.entrance_pupil_radius_mm <= 0:
        raise ValidationError("zero-area pupil")
    for t in scene.targets:
        if t.depth_m * 1e3 <= 0:
            raise ValidationError("scene plane is behind the lens")
    grid = scene.wavelengths_nm
    groups = _wavelength_groups(model, grid, nearest_wavelength)
    table, offsets = _scene_tables(scene)
    n_pix = geometry.rows * geometry.cols
    S = samples_per_pixel
    chunk = max(1, _CHUNK_SAMPLES // S)
    pitch = geometry.pitch_mm

    def work(start):
        idx = np.arange(start, min(start + chunk, n_pix))
        r, c = idx // geometry.cols, idx % geometry.cols
        if shared_samples:
            u = np.broadcast_to(uniforms(seed, [0], [0], S, 4), (len(idx), S, 4))
        else:
            u = uniforms(seed, r, c, S, 4)
        cx, cy = geometry.pixel_centers_mm(r, c)
        sx = cx[:, None] + (u[..., 0] - 0.5) * pitch
        sy = cy[:, None] + (u[..., 1] - 0.5) * pitch
        return _irradiance_block(scene, model, table, offsets, groups, sx, sy, u[..., 2:],
                                 geometry.sensor_distance_mm, nearest_wavelength)

    starts = range(0, n_pix, chunk)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    data = np.vstack(parts).reshape(geometry.rows, geometry.cols, len(grid))
    return IrradianceImage(data, grid.copy(), geometry.pixel_pitch_um, S, geometry)


def default_sensor_distance(model) -> float:
    dist = getattr(model, "back_focal_distance_mm", None)
    if dist is None:
        raise ValidationError("model has no back focal distance; pass sensor_distance_mm")
    return float(dist)


def relative_illumination(
    model,
    field_heights_mm,
    sensor_distance_mm: float | None = None,
    wavelength_nm: float = 550.0,
    n_samples: int = 20000,
    seed: int = 0,
    nearest_wavelength: bool = False,
) -> np.ndarray:
    """Irradiance of a uniform scene at each field height, normalized to the axis.

    Values are returned as computed; no monotonicity is imposed.
    """
    heights = np.atleast_1d(np.asarray(field_heights_mm, dtype=float))
    distance = sensor_distance_mm if sensor_distance_mm is not None else default_sensor_distance(model)
    scene = make_uniform(Spectrum.constant(1.0, [wavelength_nm]), 1.0, depth_m=1.0,
                         grid=[wavelength_nm])
    groups = _wavelength_groups(model, scene.wavelengths_nm, nearest_wavelength)
    table, offsets = _scene_tables(scene)
    pts = np.concatenate([[0.0], heights])
    u = uniforms(seed, np.zeros(len(pts), dtype=np.int64), np.zeros(len(pts), dtype=np.int64),
                 n_samples, 2)
    sx = np.repeat(pts[:, None], n_samples, axis=1)
    sy = np.zeros_like(sx)
    e = _irradiance_block(scene, model, table, offsets, groups, sx, sy, u, distance,
                          nearest_wavelength)[:, 0]
    if e[0] <= 0:
        raise VignettedError("no light reaches the sensor on axis")
    return e[1:] / e[0]


def apply_relative_illumination(irr: IrradianceImage, heights_mm, values, modeled=None) -> IrradianceImage:
    """Impose a measured relative-illumination curve on a rendered image.

    Each pixel is scaled by ``values(h) / modeled(h)``; ``modeled`` is a
    ``(heights, values)`` pair describing the falloff already present in
    ``irr`` (omit it when the render has none).
    """
    if irr.geometry is None:
        raise ValidationError("irradiance image carries no sensor geometry")
    h = irr.geometry.field_heights_mm()
    gain = np.interp(h, heights_mm, values)
    if modeled is not None:
        gain = gain / np.interp(h, modeled[0], modeled[1])
    return IrradianceImage(irr.data * gain[..., None], irr.wavelengths_nm, irr.pixel_pitch_um,
                           irr.samples_per_pixel, irr.geometry)


# -- point spread ---------------------------------------------------------

def _object_ray(ox, oy, ex, ey, depth_mm):
    dx, dy = ex - ox, ey - oy
    n = np.sqrt(dx * dx + dy * dy + depth_mm * depth_mm)
    return np.column_stack([ex, ey, dx / n, dy / n])


def _land(model, rays, wl, distance, nearest):
    out, ok = model.trace(rays, wl, nearest)
    w = np.sqrt(np.clip(1.0 - out[:, 2] ** 2 - out[:, 3] ** 2, 1e-300, None))
    x = out[:, 0] + out[:, 2] * distance / w
    y = out[:, 1] + out[:, 3] * distance / w
    return x, y, ok


def best_focus_distance(model, object_depth_m: float, wavelength_nm: float = 550.0,
                        n_rays: int = 4096, nearest: bool = False) -> float:
    """Exit-plane-to-sensor distance minimizing the on-axis RMS spot size."""
    depth = object_depth_m * 1e3
    u = uniforms(0, [0], [0], n_rays, 2)[0]
    r = model.entrance_pupil_radius_mm * np.sqrt(u[:, 0])
    ex, ey = r * np.cos(2 * np.pi * u[:, 1]), r * np.sin(2 * np.pi * u[:, 1])
    out, ok = model.trace(_object_ray(0.0, 0.0, ex, ey, depth), wavelength_nm, nearest)
    if not ok.any():
        raise VignettedError("all focus rays vignetted")
    out = out[ok]
    w = np.sqrt(1.0 - out[:, 2] ** 2 - out[:, 3] ** 2)
    sx, sy = out[:, 2] / w, out[:, 3] / w
    return float(-(np.sum(out[:, 0] * sx) + np.sum(out[:, 1] * sy)) / np.sum(sx * sx + sy * sy))


def object_height_for_field(model, field_height_mm, object_depth_m, sensor_distance_mm,
                            wavelength_nm=550.0, nearest=False) -> float:
    """Object-plane x (mm) whose chief ray lands at ``field_height_mm`` on the sensor."""
    depth = object_depth_m * 1e3
    if field_height_mm == 0:
        return 0.0

    def land(ox):
        x, _, ok = _land(model, _object_ray(np.array([ox]), 0.0, np.array([0.0]), np.array([0.0]), depth),
                         wavelength_nm, sensor_distance_mm, nearest)
        if not ok[0]:
            raise VignettedError("chief ray vignetted")
        return float(x[0]) - field_height_mm

    a = -field_height_mm * depth / sensor_distance_mm
    b = a * 1.01
    fa, fb = land(a), land(b)
    for _ in range(50):
        if abs(fb) < 1e-12 or fb == fa:
            break
        a, b, fa = b, b - fb * (b - a) / (fb - fa), fb
        fb = land(b)
    return b


@dataclass(frozen=True)
class PointSpread:
    """Sensor-plane PSF histogram (rows = y, cols = x), normalized to sum 1."""

    image: np.ndarray
    bin_um: float
    center_mm: tuple[float, float]
    transmitted_fraction: float
    rms_radius_um: float
    centroid_mm: tuple[float, float]

    def axis_mm(self):
        k = self.image.shape[0] // 2
        offs = (np.arange(-k, k + 1)) * self.bin_um * 1e-3
        return self.center_mm[0] + offs, self.center_mm[1] + offs


def compute_psf(
    model,
    point_depth_m: float,
    field_height_mm: float,
    wavelength_nm: float = 550.0,
    n_rays: int = 100_000,
    sensor_distance_mm: float | None = None,
    bin_um: float = 1.4,
    seed: int = 0,
    nearest: bool = False,
) -> PointSpread:
    """Histogram where rays from an object point, filling the entrance pupil, land.

    The object point is placed so its chief ray lands at ``field_height_mm``
    along x; the histogram is centered on that landing point.
    """
    if n_rays < 10_000:
        raise ValidationError("compute_psf needs n_rays >= 1e4")
    distance = sensor_distance_mm if sensor_distance_mm is not None else default_sensor_distance(model)
    depth = point_depth_m * 1e3
    ox = object_height_for_field(model, field_height_mm, point_depth_m, distance, wavelength_nm, nearest)
    u = uniforms(seed, [0], [0], n_rays, 2)[0]
    r = model.entrance_pupil_radius_mm * np.sqrt(u[:, 0])
    ex, ey = r * np.cos(2 * np.pi * u[:, 1]), r * np.sin(2 * np.pi * u[:, 1])
    x, y, ok = _land(model, _object_ray(ox, 0.0, ex, ey, depth), wavelength_nm, distance, nearest)
    if not ok.any():
        raise VignettedError("all PSF rays vignetted")
    x, y = x[ok], y[ok]
    cx, cy = float(field_height_mm), 0.0
    b = bin_um * 1e-3
    k = int(np.ceil(max(np.abs(x - cx).max(), np.abs(y - cy).max()) / b - 0.5))
    k = max(k, 0)
    edges_x = cx + (np.arange(-k, k + 2) - 0.5) * b
    edges_y = cy + (np.arange(-k, k + 2) - 0.5) * b
    hist, _, _ = np.histogram2d(y, x, bins=[edges_y, edges_x])
    hist /= hist.sum()
    mx, my = x.mean(), y.mean()
    rms = np.sqrt(np.mean((x - mx) ** 2 + (y - my) ** 2)) * 1e3
    return PointSpread(hist, bin_um, (cx, cy), float(ok.mean()), float(rms), (float(mx), float(my)))
