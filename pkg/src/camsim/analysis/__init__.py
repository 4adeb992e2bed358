"""Validation metrics: uniform regions, noise curves, slanted-edge MTF,
relative illumination and simulated-versus-measured comparisons."""
from .illumination import RadialCurve, flatten, measure_relative_illumination
from .mtf import EdgeProfile, gaussian_mtf, pixel_aperture_mtf, slanted_edge_mtf
from .regions import (
    Region,
    extract_region,
    find_uniform_regions,
    flat_not_worse,
    is_uniform,
    noise_curve,
    outlier_free,
    photon_transfer_variance,
)
from .scatter import ScatterReport, compare_scatter, read_rgb_csv, write_scatter_csv

__all__ = [
    "RadialCurve", "flatten", "measure_relative_illumination", "EdgeProfile", "gaussian_mtf",
    "pixel_aperture_mtf", "slanted_edge_mtf", "Region", "extract_region", "find_uniform_regions",
    "flat_not_worse", "is_uniform", "noise_curve", "outlier_free", "photon_transfer_variance",
    "ScatterReport", "compare_scatter", "read_rgb_csv", "write_scatter_csv",
]
