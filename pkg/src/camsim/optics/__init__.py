"""Lens modelling: ray-transfer functions, analytic lens oracles and rendering."""
from .lenses import (
    IdealThinLens,
    IdentityLens,
    ParaxialThinLens,
    generate_ray_pairs,
    image_distance_mm,
    sample_entrance_rays,
)
from .render import (
    IrradianceImage,
    PointSpread,
    SensorGeometry,
    apply_relative_illumination,
    best_focus_distance,
    compute_psf,
    object_height_for_field,
    relative_illumination,
    render,
)
from .rtf import (
    VIGNETTED,
    Ray4,
    RayPair,
    RayPairs,
    RtfModel,
    eval_rtf,
    fit_rtf,
    load_rtf,
    read_ray_pairs,
    rotation_commutation_error,
    save_rtf,
    write_ray_pairs,
)

__all__ = [
    "IdealThinLens", "IdentityLens", "ParaxialThinLens", "generate_ray_pairs",
    "image_distance_mm", "sample_entrance_rays", "IrradianceImage", "PointSpread",
    "SensorGeometry", "apply_relative_illumination", "best_focus_distance", "compute_psf",
    "object_height_for_field", "relative_illumination", "render", "VIGNETTED", "Ray4",
    "RayPair", "RayPairs", "RtfModel", "eval_rtf", "fit_rtf", "load_rtf", "read_ray_pairs",
    "rotation_commutation_error", "save_rtf", "write_ray_pairs",
]
