"""Regenerate the bundled spectral data files.

Needs ``colour-science`` (only for this script, not for the package):

    pip install colour-science
    python scripts/make_spectral_data.py

MCC reflectances come from the Ohta ColorChecker measurements shipped with
colour-science; illuminants are CIE A, CIE F2 (cool white fluorescent) and
CIE D65, normalised to 1 at 560 nm. The QE curves are smooth synthetic
stand-ins for a Bayer RGB sensor behind an IR-cut filter.
"""
from pathlib import Path

import colour
import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "camsim" / "data"
GRID = np.arange(380.0, 781.0, 5.0)


def write_spectrum(path, wl, values, header):
    lines = [f"# {h}" for h in header]
    lines += [f"{w:.1f} {v:.6f}" for w, v in zip(wl, values)]
    path.write_text("\n".join(lines) + "\n")


def main():
    checker = colour.SDS_COLOURCHECKERS["ColorChecker N Ohta"]
    for i, (name, sd) in enumerate(checker.items(), start=1):
        sd = sd.copy().align(colour.SpectralShape(380, 780, 5))
        write_spectrum(
            DATA / "mcc" / f"patch_{i:02d}.txt",
            GRID,
            np.clip(sd.values, 0.0, 1.0),
            [f"MCC patch {i}: {name}", "reflectance (0-1)", "source: Ohta ColorChecker"],
        )

    illuminants = {"a_like": "A", "cwf_like": "FL2", "daylight_like": "D65"}
    for fname, key in illuminants.items():
        sd = colour.SDS_ILLUMINANTS[key].copy().align(colour.SpectralShape(380, 780, 5))
        values = sd.values / np.interp(560.0, GRID, sd.values)
        write_spectrum(
            DATA / "illuminants" / f"{fname}.txt",
            GRID,
            values,
            [f"CIE {key} relative spectral power, 1.0 at 560 nm", "W m^-2 nm^-1 (relative)"],
        )

    ir_cut = 1.0 / (1.0 + np.exp((GRID - 655.0) / 9.0))
    uv_cut = 1.0 / (1.0 + np.exp(-(GRID - 405.0) / 6.0))

    def band(peak, width, height):
        return height * np.exp(-0.5 * ((GRID - peak) / width) ** 2)

    qe = {
        "r": band(605.0, 32.0, 0.52) + band(530.0, 60.0, 0.03) + 0.02,
        "g": band(535.0, 38.0, 0.60) + band(460.0, 40.0, 0.04) + 0.02,
        "b": band(460.0, 30.0, 0.55) + band(540.0, 50.0, 0.05) + 0.02,
    }
    for ch, curve in qe.items():
        write_spectrum(
            DATA / "qe" / f"qe_{ch}.txt",
            GRID,
            np.clip(curve * ir_cut * uv_cut, 0.0, 1.0),
            [f"nominal {ch.upper()} channel quantum efficiency (synthetic)", "e-/photon"],
        )


if __name__ == "__main__":
    main()
