"""camsim: physically based camera simulation and validation.

Spectral planar scenes are imaged through a polynomial ray-transfer lens
model onto a CMOS sensor model that produces raw mosaicked digital values.
Calibration (QE correction, conversion gain, noise parameters) and analysis
(uniform regions, photon transfer, slanted-edge MTF, relative illumination)
tools operate on the resulting raw frames.
"""

__version__ = "0.1.0"
