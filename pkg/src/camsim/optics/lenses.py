"""Analytic lens oracles and ray-pair dataset generation.

These zero-thickness lenses expose the same ``trace`` / ``trace_inverse``
interface as :class:`~camsim.optics.rtf.RtfModel`, so they can be rendered
directly or used to generate training pairs for :func:`fit_rtf`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rtf import RayPairs


def _check(rays, r_pupil):
    rays = np.atleast_2d(np.asarray(rays, dtype=float))
    ok = rays[:, 0] ** 2 + rays[:, 1] ** 2 <= r_pupil**2
    ok &= rays[:, 2] ** 2 + rays[:, 3] ** 2 < 1.0
    return rays, ok


def _finish(out, ok):
    ok = ok & (out[:, 2] ** 2 + out[:, 3] ** 2 < 1.0) & np.isfinite(out).all(axis=1)
    return out, ok


@dataclass(frozen=True)
class _ZeroThickness:
    pupil_radius_mm: float

    wavelengths_nm = None
    exit_plane_offset_mm = 0.0

    @property
    def entrance_pupil_radius_mm(self):
        return self.pupil_radius_mm

    @property
    def exit_pupil_radius_mm(self):
        return self.pupil_radius_mm

    def trace(self, rays, wavelength_nm=None, nearest=False):
        rays, ok = _check(rays, self.pupil_radius_mm)
        return _finish(self._map(rays, +1.0), ok)

    def trace_inverse(self, rays, wavelength_nm=None, nearest=False):
        rays, ok = _check(rays, self.pupil_radius_mm)
        return _finish(self._map(rays, -1.0), ok)


@dataclass(frozen=True)
class IdentityLens(_ZeroThickness):
    """Clear aperture: rays pass unchanged. A tiny radius makes a pinhole."""

    def _map(self, rays, sign):
        return rays.copy()


@dataclass(frozen=True)
class ParaxialThinLens(_ZeroThickness):
    """Thin lens that is linear in direction cosines: ``u_o = u_i - x_i / f``.

    ``spherical`` adds a cubic, rotationally symmetric perturbation
    ``-spherical * x * (x**2 + y**2)`` to the output directions.
    """

    focal_length_mm: float = 4.38
    spherical: float = 0.0

    def _map(self, rays, sign):
        x, y = rays[:, 0], rays[:, 1]
        rho2 = x * x + y * y
        out = rays.copy()
        out[:, 2] = rays[:, 2] - sign * (x / self.focal_length_mm + self.spherical * x * rho2)
        out[:, 3] = rays[:, 3] - sign * (y / self.focal_length_mm + self.spherical * y * rho2)
        return out

    def matrix(self) -> np.ndarray:
        """4x4 matrix M with ``out = M @ (x, y, u, v)`` when ``spherical == 0``."""
        m = np.eye(4)
        m[2, 0] = m[3, 1] = -1.0 / self.focal_length_mm
        return m


@dataclass(frozen=True)
class IdealThinLens(_ZeroThickness):
    """Aberration-free thin lens: ray slopes change by ``-position / f``.

    Every ray from an object point at distance s converges exactly to the
    conjugate point at s' with 1/s + 1/s' = 1/f.
    """

    focal_length_mm: float = 4.38

    def _map(self, rays, sign):
        x, y, u, v = rays.T
        w = np.sqrt(np.clip(1.0 - u * u - v * v, 0.0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            sx = u / w - sign * x / self.focal_length_mm
            sy = v / w - sign * y / self.focal_length_mm
        norm = np.sqrt(1.0 + sx * sx + sy * sy)
        return np.column_stack([x, y, sx / norm, sy / norm])

    @property
    def back_focal_distance_mm(self):
        return self.focal_length_mm


def image_distance_mm(focal_length_mm: float, object_distance_mm: float) -> float:
    """Gaussian conjugate: 1/s + 1/s' = 1/f."""
    return 1.0 / (1.0 / focal_length_mm - 1.0 / object_distance_mm)


def sample_entrance_rays(
    n: int,
    pupil_radius_mm: float,
    max_field_deg: float,
    min_object_distance_mm: float | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Rays uniform in entrance-pupil area and in field.

    Each ray leaves an object point whose chief-ray slope is uniform over a
    disk of radius ``tan(max_field_deg)``. The object distance is uniform in
    diopters between infinity and ``min_object_distance_mm`` (collimated
    bundles when it is ``None``).
    """
    rng = np.random.default_rng(seed)
    r = pupil_radius_mm * np.sqrt(rng.uniform(size=n))
    phi = rng.uniform(0.0, 2 * np.pi, n)
    x, y = r * np.cos(phi), r * np.sin(phi)
    t = np.tan(np.deg2rad(max_field_deg)) * np.sqrt(rng.uniform(size=n))
    psi = rng.uniform(0.0, 2 * np.pi, n)
    tx, ty = t * np.cos(psi), t * np.sin(psi)
    if min_object_distance_mm is not None:
        inv_s = rng.uniform(0.0, 1.0 / min_object_distance_mm, n)
        tx = tx + x * inv_s
        ty = ty + y * inv_s
    norm = np.sqrt(1.0 + tx * tx + ty * ty)
    return np.column_stack([x, y, tx / norm, ty / norm])


def generate_ray_pairs(
    lens,
    n: int,
    max_field_deg: float,
    wavelengths_nm=(550.0,),
    min_object_distance_mm: float | None = None,
    seed: int = 0,
) -> RayPairs:
    """Trace sampled entrance rays through an analytic lens; drop vignetted rays."""
    sets = []
    for k, wl in enumerate(wavelengths_nm):
        inp = sample_entrance_rays(
            n, lens.entrance_pupil_radius_mm, max_field_deg, min_object_distance_mm, seed + k
        )
        out, ok = lens.trace(inp, wl)
        sets.append(RayPairs(inp[ok], out[ok], np.full(ok.sum(), float(wl))))
    result = sets[0]
    for s in sets[1:]:
        result = result.concat(s)
    return result
