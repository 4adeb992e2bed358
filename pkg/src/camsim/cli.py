"""``camsim`` command line: simulate captures, calibrate, and measure.

Every subcommand exits 0 on success and with the error category's code
otherwise (see :mod:`camsim.errors`).
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__, _io
from .analysis import (
    compare_scatter,
    find_uniform_regions,
    measure_relative_illumination,
    noise_curve,
    read_rgb_csv,
    slanted_edge_mtf,
    write_scatter_csv,
)
from .calibration import (
    estimate_conversion_gain,
    estimate_noise_parameters,
    fit_qe_matrix,
    gain_samples,
    read_observations,
)
from .config import load_run_config
from .errors import CamsimError, ValidationError
from .optics import fit_rtf, read_ray_pairs, render, save_rtf
from .sensor import FixedPatternMaps, capture_stack, expected_electrons, read_pgm, write_pgm


def _inputs_hash(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()[:16]


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.toml")


def _write_curve(path, x, y, header, prov):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _io.write_xy_csv(path, x, y, header)
    _io.dump_toml({"provenance": prov}, _meta_path(path))


def _write_report(path, doc, prov):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _io.dump_toml({**doc, "provenance": prov}, path)


def _read_images(paths):
    if not paths:
        raise ValidationError("no input images")
    return [read_pgm(p) for p in paths]


# -- subcommands ----------------------------------------------------------

def cmd_simulate(args) -> int:
    if not args.config:
        raise ValidationError("simulate needs --config")
    overrides = {"seed": args.seed, "frames": args.frames, "threads": args.threads, "out": args.out}
    cfg = load_run_config(args.config, overrides)
    irr = render(cfg.scene, cfg.model, cfg.geometry, cfg.samples_per_pixel, cfg.seed,
                 threads=cfg.threads, nearest_wavelength=cfg.nearest_wavelength,
                 shared_samples=cfg.shared_samples)
    mu = expected_electrons(irr, cfg.sensor)
    fpn = FixedPatternMaps.generate(cfg.sensor, mu.shape, cfg.fpn_seed)
    frames = capture_stack(mu, cfg.sensor, fpn, cfg.frames, cfg.seed, threads=cfg.threads)
    cfg.out.mkdir(parents=True, exist_ok=True)
    prov = _io.provenance(cfg.config_hash, cfg.seed, config=str(Path(args.config).name))
    for raw in frames:
        path = cfg.out / f"frame_{raw.frame:03d}.pgm"
        write_pgm(raw, path, prov)
        print(path)
    return 0


def cmd_fit_rtf(args) -> int:
    pairs = read_ray_pairs(args.raypairs)
    model = fit_rtf(pairs, degree=args.degree, symmetric=args.symmetric, seed=args.seed or 0)
    out = Path(args.out or "rtf.toml")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_rtf(model, out, _io.provenance(_inputs_hash([args.raypairs]), args.seed or 0))
    for wl, rms in zip(model.wavelengths_nm, model.rms_forward):
        print(f"{wl:g} nm  rms residual (x, y, u, v): " + " ".join(f"{r:.3e}" for r in rms))
    print(out)
    return 0


def cmd_calibrate_qe(args) -> int:
    obs = read_observations(args.observations)
    result = fit_qe_matrix(obs)
    doc = {"qe_matrix": {"M": result.M, "relative_rms": result.residual, "n_observations": len(obs)}}
    out = Path(args.out or "qe_matrix.toml")
    _write_report(out, doc, _io.provenance(_inputs_hash([args.observations])))
    print(np.array2string(result.M, precision=4))
    print(f"relative RMS {result.residual:.4f}")
    return 0


def cmd_estimate_gain(args) -> int:
    frames = _read_images(args.images)
    samples = gain_samples(frames, args.crop, args.channel)
    est = estimate_conversion_gain(samples, args.prnu, frames[0].black_level_dv,
                                   2 ** frames[0].bit_depth - 1)
    doc = {"conversion_gain": {"alpha_dv_per_e": est.alpha, "mean_dv": est.mean_dv,
                               "var_dv": est.var_dv, "n_samples": est.n_samples,
                               "prnu_sigma": args.prnu}}
    out = Path(args.out or "gain.toml")
    _write_report(out, doc, _io.provenance(_inputs_hash(args.images), frames[0].seed))
    print(f"alpha = {est.alpha:.5f} dv/e-  (E = {est.mean_dv:.2f}, V = {est.var_dv:.2f}, n = {est.n_samples})")
    return 0


def cmd_estimate_noise(args) -> int:
    def group(paths):
        by_t = defaultdict(list)
        for img in _read_images(paths):
            by_t[img.exposure_s].append(img)
        return [by_t[t] for t in sorted(by_t)]

    est = estimate_noise_parameters(group(args.dark), group(args.bright), args.gain,
                                    args.volts_per_electron, n_bootstrap=args.bootstrap,
                                    seed=args.seed or 0)
    doc = {"noise": est.as_dict(),
           "bounds_95": {k: list(v) for k, v in est.bounds.items()}}
    out = Path(args.out or "noise.toml")
    _write_report(out, doc, _io.provenance(_inputs_hash(args.dark + args.bright), args.seed or 0,
                                           bootstrap_resamples=args.bootstrap))
    for k, v in est.as_dict().items():
        lo, hi = est.bounds.get(k, (np.nan, np.nan))
        print(f"{k:24s} {v:.5g}  [{lo:.5g}, {hi:.5g}]")
    return 0


def cmd_noise_curve(args) -> int:
    img = read_pgm(args.image)
    regions = find_uniform_regions(img, args.regions, args.gain, seed=args.seed or 0,
                                   channel=args.channel)
    mean, std = noise_curve(regions)
    out = Path(args.out or "noise_curve.csv")
    _write_curve(out, mean, std, ("mean_dv", "std_dv"),
                 _io.provenance(_inputs_hash([args.image]), args.seed or 0, regions=len(regions)))
    print(f"{len(regions)} uniform regions -> {out}")
    return 0


def cmd_mtf(args) -> int:
    img = read_pgm(args.image)
    data = img.black_subtracted()
    if args.roi:
        r0, c0, h, w = args.roi
        if r0 < 0 or c0 < 0 or r0 + h > data.shape[0] or c0 + w > data.shape[1]:
            raise ValidationError(f"ROI {args.roi} leaves the {data.shape[0]}x{data.shape[1]} image")
        # keep the CFA phase of the full image
        if args.channel and (r0 % 2 or c0 % 2):
            raise ValidationError("ROI origin must be even when a CFA channel is selected")
        data = data[r0 : r0 + h, c0 : c0 + w]
    prof = slanted_edge_mtf(data, args.channel, args.bin, img.cfa_pattern)
    out = Path(args.out or "mtf.csv")
    _write_curve(out, prof.frequencies, prof.mtf, ("cycles_per_pixel", "mtf"),
                 _io.provenance(_inputs_hash([args.image]), angle_deg=prof.angle_deg,
                                mtf50=prof.mtf50))
    print(f"edge angle {prof.angle_deg:.3f} deg, MTF50 {prof.mtf50:.4f} cy/px -> {out}")
    return 0


def cmd_relative_illumination(args) -> int:
    img = read_pgm(args.image)
    curve = measure_relative_illumination(img, args.channel, args.bins, args.pitch_um)
    out = Path(args.out or "relative_illumination.csv")
    unit = "mm" if args.pitch_um else "px"
    _write_curve(out, curve.radius, curve.value, (f"radius_{unit}", "relative_illumination"),
                 _io.provenance(_inputs_hash([args.image])))
    print(out)
    return 0


def cmd_compare(args) -> int:
    sim, meas = read_rgb_csv(args.simulated), read_rgb_csv(args.measured)
    rep = compare_scatter(sim, meas)
    out = Path(args.out or "scatter.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scatter_csv(rep, out)
    prov = _io.provenance(_inputs_hash([args.simulated, args.measured]))
    _io.dump_toml({"comparison": {"relative_rms": rep.relative_rms, "bias": rep.bias},
                   "provenance": prov}, _meta_path(out))
    print(f"relative RMS {rep.relative_rms:.4f}; bias R {rep.bias[0]:+.4f} G {rep.bias[1]:+.4f} B {rep.bias[2]:+.4f}")
    return 0


# -- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config (TOML)")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--frames", type=int, help="frames to capture")

    p = argparse.ArgumentParser(prog="camsim", description="Spectral camera simulation and calibration.")
    p.add_argument("--version", action="version", version=f"camsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="render a config and capture raw frames")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit-rtf", parents=[common], help="fit a ray-transfer function to ray pairs")
    s.add_argument("raypairs")
    s.add_argument("--degree", type=int, default=5)
    s.add_argument("--symmetric", action="store_true", help="augment with rotations about the axis")
    s.set_defaults(func=cmd_fit_rtf)

    s = sub.add_parser("calibrate-qe", parents=[common], help="fit the nonnegative QE correction matrix")
    s.add_argument("observations", help="CSV with illuminant,patch,meas_r..pred_b columns")
    s.set_defaults(func=cmd_calibrate_qe)

    s = sub.add_parser("estimate-gain", parents=[common], help="conversion gain from a bright flat stack")
    s.add_argument("images", nargs="+")
    s.add_argument("--prnu", type=float, default=0.0054, help="PRNU sigma as a fraction")
    s.add_argument("--crop", type=int, default=10)
    s.add_argument("--channel", choices=["R", "G", "B"], default=None)
    s.set_defaults(func=cmd_estimate_gain)

    s = sub.add_parser("estimate-noise", parents=[common], help="DSNU, PRNU, dark voltage, read noise")
    s.add_argument("--dark", nargs="+", required=True, help="dark frames (exposures from sidecars)")
    s.add_argument("--bright", nargs="+", required=True, help="flat-field frames")
    s.add_argument("--gain", type=float, default=0.1707, help="conversion gain, dv/e-")
    s.add_argument("--volts-per-electron", type=float, default=0.4591 / 6000)
    s.add_argument("--bootstrap", type=int, default=100)
    s.set_defaults(func=cmd_estimate_noise)

    s = sub.add_parser("noise-curve", parents=[common], help="std vs mean over uniform regions")
    s.add_argument("image")
    s.add_argument("--gain", type=float, default=0.1707)
    s.add_argument("--regions", type=int, default=200)
    s.add_argument("--channel", choices=["R", "G", "B"], default="G")
    s.set_defaults(func=cmd_noise_curve)

    s = sub.add_parser("mtf", parents=[common], help="slanted-edge MTF")
    s.add_argument("image")
    s.add_argument("--roi", type=int, nargs=4, metavar=("ROW", "COL", "HEIGHT", "WIDTH"))
    s.add_argument("--channel", choices=["R", "G", "B"], default=None)
    s.add_argument("--bin", type=float, default=0.25, help="ESF bin width in pixels")
    s.set_defaults(func=cmd_mtf)

    s = sub.add_parser("relative-illumination", parents=[common], help="radial falloff of a flat capture")
    s.add_argument("image")
    s.add_argument("--bins", type=int, default=20)
    s.add_argument("--channel", choices=["R", "G", "B"], default="G")
    s.add_argument("--pitch-um", type=float, default=None, help="report radius in mm")
    s.set_defaults(func=cmd_relative_illumination)

    s = sub.add_parser("compare", parents=[common], help="simulated vs measured RGB means")
    s.add_argument("simulated")
    s.add_argument("measured")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CamsimError as exc:
        print(f"camsim {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
