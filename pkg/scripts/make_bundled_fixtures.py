"""Regenerate the bundled test fixtures under src/camsim/data/fixtures.

* gain_stack/: 15 flat-field frames (32x32) from the imx363 profile with a
  mean of 1879 photo-electrons (about 320 dv above black), seed 0.
* edge_gauss1.pgm: noiseless slanted edge blurred by a 1-pixel Gaussian,
  with edge_gauss1_mtf.csv holding its MTF from the slanted-edge analysis.
"""
from pathlib import Path

import numpy as np

from camsim import _io
from camsim.analysis import slanted_edge_mtf
from camsim.analysis.mtf import synthetic_edge
from camsim.sensor import FixedPatternMaps, RawImage, capture_stack, load_profile, write_pgm

OUT = Path(__file__).resolve().parents[1] / "src" / "camsim" / "data" / "fixtures"
SEED = 0


def gain_stack():
    cfg = load_profile("imx363")
    mu = np.full((32, 32), 1879.0)
    fpn = FixedPatternMaps.generate(cfg, mu.shape, SEED)
    d = OUT / "gain_stack"
    d.mkdir(parents=True, exist_ok=True)
    prov = _io.provenance(seed=SEED, mean_electrons=1879.0, profile="imx363")
    for raw in capture_stack(mu, cfg, fpn, 15, SEED):
        write_pgm(raw, d / f"frame_{raw.frame:03d}.pgm", prov)


def blurred_edge():
    img = synthetic_edge((80, 64), tilt_deg=5.0, sigma_px=1.0, low=100.0, high=800.0)
    raw = RawImage(np.floor(img + 64.0 + 0.5), cfa_pattern="RGGB", exposure_s=0.0, seed=SEED,
                   black_level_dv=64.0, bit_depth=10)
    path = OUT / "edge_gauss1.pgm"
    write_pgm(raw, path, _io.provenance(seed=SEED, sigma_px=1.0, tilt_deg=5.0))
    prof = slanted_edge_mtf(raw.black_subtracted())
    _io.write_xy_csv(OUT / "edge_gauss1_mtf.csv", prof.frequencies, prof.mtf, ("cycles_per_pixel", "mtf"))


if __name__ == "__main__":
    gain_stack()
    blurred_edge()
    print(f"fixtures written to {OUT}")
