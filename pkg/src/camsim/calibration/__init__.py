"""Sensor calibration: QE correction matrix, conversion gain and noise parameters."""
from .gain import (
    GainEstimate,
    center_crop,
    conversion_gain_from_moments,
    estimate_conversion_gain,
    gain_samples,
)
from .nnls import nnls
from .noise import NoiseEstimate, estimate_noise_parameters
from .qe import (
    PatchObservation,
    QeCorrection,
    apply_qe_matrix,
    channel_responses,
    evaluate_qe_matrix,
    fit_qe_matrix,
    read_observations,
    write_observations,
)

__all__ = [
    "GainEstimate", "center_crop", "conversion_gain_from_moments", "estimate_conversion_gain",
    "gain_samples", "nnls", "NoiseEstimate", "estimate_noise_parameters", "PatchObservation",
    "QeCorrection", "apply_qe_matrix", "channel_responses", "evaluate_qe_matrix", "fit_qe_matrix",
    "read_observations", "write_observations",
]
