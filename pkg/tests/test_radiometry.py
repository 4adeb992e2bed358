import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from camsim.errors import DataFileError, ValidationError
from camsim.radiometry import (
    DEFAULT_GRID,
    N_MCC_PATCHES,
    PlanarTarget,
    Spectrum,
    compose,
    load_illuminant,
    load_mcc_reflectances,
    make_bar_pattern,
    make_mcc,
    make_slanted_edge,
    make_uniform,
    patch_center,
    read_spectrum,
    resample,
    write_spectrum,
)


# -- Spectrum ------------------------------------------------------------

def test_spectrum_rejects_bad_input():
    with pytest.raises(ValidationError):
        Spectrum([], [])
    with pytest.raises(ValidationError):
        Spectrum([500, 400], [1, 1])
    with pytest.raises(ValidationError):
        Spectrum([400, 500], [1, -0.1])
    with pytest.raises(ValidationError):
        Spectrum([400, 500], [0.5, 1.2], "reflectance")
    Spectrum([400, 500], [0.5, 1.2])  # SPDs are unbounded


def test_resample_constant_is_identity_on_subgrid():
    s = Spectrum.constant(1.0, np.arange(400.0, 701.0, 10.0))
    out = resample(s, [410.0, 455.0, 612.5, 700.0])
    assert np.all(out.values == 1.0)


def test_resample_onto_own_grid_unchanged(rng):
    grid = np.arange(400.0, 701.0, 10.0)
    s = Spectrum(grid, rng.uniform(0, 3, grid.size))
    assert np.array_equal(resample(s, grid).values, s.values)


def test_resample_linear_ramp_midpoint():
    s = Spectrum([400.0, 700.0], [0.0, 1.0])
    assert resample(s, [550.0]).values[0] == pytest.approx(0.5, abs=1e-15)


def test_resample_zero_outside_support():
    s = Spectrum([500.0, 600.0], [1.0, 1.0])
    assert np.array_equal(resample(s, [400.0, 550.0, 650.0]).values, [0.0, 1.0, 0.0])


def test_resample_errors():
    s = Spectrum.constant(1.0)
    with pytest.raises(ValidationError):
        resample(s, [500.0, 450.0])
    with pytest.raises(ValidationError):
        resample(s, [])


def test_spectral_file_roundtrip(tmp_path, rng):
    s = Spectrum(DEFAULT_GRID, rng.uniform(0, 1, DEFAULT_GRID.size), "reflectance")
    write_spectrum(s, tmp_path / "r.txt", comment="test")
    back = read_spectrum(tmp_path / "r.txt", "reflectance")
    assert np.array_equal(back.values, s.values)
    assert np.array_equal(back.wavelengths_nm, s.wavelengths_nm)


def test_spectral_file_errors(tmp_path):
    with pytest.raises(DataFileError):
        read_spectrum(tmp_path / "missing.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("400 1 2\n500 1 2\n")
    with pytest.raises(DataFileError):
        read_spectrum(bad)
    desc = tmp_path / "desc.txt"
    desc.write_text("# comment\n500 1\n400 1\n")
    with pytest.raises(DataFileError):
        read_spectrum(desc)


def test_bundled_data_present():
    assert len(load_mcc_reflectances()) == N_MCC_PATCHES
    for name in ("A", "CWF", "daylight"):
        s = load_illuminant(name)
        assert s.values.max() > 0


def test_data_dir_override(tmp_path, monkeypatch):
    monkeypatch.setenv("CAMSIM_DATA", str(tmp_path))
    with pytest.raises(DataFileError):
        load_illuminant("daylight")


# -- targets ---------------------------------------------------------------

def test_mcc_white_patch_under_flat_illuminant():
    sc = make_mcc(Spectrum.constant(1.0))
    refl = load_mcc_reflectances()
    white = 18  # first patch of the neutral row
    x, y = patch_center(sc.target, white)
    L = sc.radiance(x, y)
    np.testing.assert_allclose(L, refl[white](DEFAULT_GRID) / np.pi, rtol=1e-15)


def test_mcc_separator_zero_reflectance_gives_zero_radiance():
    sc = make_mcc(Spectrum.constant(1.0), separator_reflectance=0.0)
    pitch = sc.target.params["patch_pitch_m"]
    x, y = patch_center(sc.target, 7)
    assert np.all(sc.radiance(x + pitch / 2, y) == 0.0)


def test_mcc_patch_radiance_elementwise_product():
    # oracle: per-wavelength product of interpolated illuminant and reflectance, / pi
    illum = load_illuminant("daylight")
    sc = make_mcc(illum)
    refl = load_mcc_reflectances()
    for k in (0, 5, 13, 23):
        x, y = patch_center(sc.target, k)
        expected = [
            np.interp(w, illum.wavelengths_nm, illum.values)
            * np.interp(w, refl[k].wavelengths_nm, refl[k].values) / np.pi
            for w in DEFAULT_GRID
        ]
        np.testing.assert_allclose(sc.radiance(x, y), expected, rtol=1e-12)


def test_mcc_has_24_patches_and_is_deterministic():
    sc = make_mcc(Spectrum.constant(1.0))
    idx = {int(sc.target.material_index(*patch_center(sc.target, k))) for k in range(24)}
    assert idx == set(range(24))
    with pytest.raises(ValidationError):
        PlanarTarget("mcc_chart", sc.target.materials[:10], 1.0)


def test_slanted_edge_sides_and_tie_break():
    sc = make_slanted_edge(0.3, tilt_deg=5.0)
    t = sc.target
    assert t.material_index(0.05, 0.0) == 1
    assert t.material_index(-0.05, 0.0) == 0
    # a point exactly on the tilted line x cos t = y sin t
    y = 0.01
    x = y * np.tan(np.deg2rad(5.0))
    on_line = t.material_index(x, y)
    assert on_line == 1
    assert t.material_index(0.0, 0.0) == 1
    assert t.reflectance_at(0.05, 0.0).values[0] == 0.9
    assert t.reflectance_at(-0.05, 0.0).values[0] == 0.05


@pytest.mark.parametrize("tilt", [0.0, 45.0, -3.0, 60.0])
def test_slanted_edge_tilt_range(tilt):
    with pytest.raises(ValidationError):
        make_slanted_edge(0.3, tilt_deg=tilt)


def test_target_depth_must_be_positive():
    with pytest.raises(ValidationError):
        make_slanted_edge(0.0)
    with pytest.raises(ValidationError):
        make_uniform(Spectrum.constant(1.0), depth_m=-1.0)


def test_figure_geometry_edges():
    # the canonical two-edge layout: 0.3 m and 0.5 m from the camera
    near = make_slanted_edge(0.3, 0.7)
    far = make_slanted_edge(0.5, 0.8)
    sc = compose(near, far)
    assert [t.depth_m for t in sc.targets] == [0.3, 0.5]


def test_extent_clips_target():
    sc = make_uniform(Spectrum.constant(1.0), 0.5, extent_m=(0.1, 0.1))
    assert sc.radiance(0.0, 0.0)[0] > 0
    assert np.all(sc.radiance(0.2, 0.0) == 0)


def test_bar_pattern_alternates():
    sc = make_bar_pattern(1.0, period_m=0.02)
    xs = np.array([0.005, 0.015, 0.025, 0.035])
    assert list(sc.target.material_index(xs, 0.0)) == [1, 0, 1, 0]


def test_compose_requires_matching_illuminant():
    a = make_slanted_edge(0.3, illuminant=Spectrum.constant(1.0))
    b = make_slanted_edge(0.5, illuminant=Spectrum.constant(2.0))
    with pytest.raises(ValidationError):
        compose(a, b)


# -- properties ----------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(k=st.floats(0.0, 1e3), x=st.floats(-0.2, 0.2), y=st.floats(-0.2, 0.2))
def test_radiance_scales_with_illuminant(k, x, y):
    sc = make_mcc(load_illuminant("A"))
    base = sc.radiance(x, y)
    scaled = sc.scaled(k).radiance(x, y)
    np.testing.assert_allclose(scaled, k * base, rtol=1e-14, atol=0)
    assert np.all(base >= 0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 4), x=st.floats(-0.12, 0.12), y=st.floats(-0.08, 0.08))
def test_radiance_invariant_to_grid_refinement(n, x, y):
    # piecewise-linear spectra sampled on their own knots, evaluated on a finer grid
    illum = Spectrum(DEFAULT_GRID, np.linspace(1.0, 2.0, DEFAULT_GRID.size))
    coarse = make_mcc(illum)
    fine_grid = np.linspace(400.0, 700.0, 30 * 2**n + 1)
    fine = make_mcc(illum, grid=fine_grid)
    Lc = coarse.radiance(x, y)
    Lf = fine.radiance(x, y)
    np.testing.assert_allclose(Lf[:: 2**n], Lc, rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(-0.15, 0.15), y=st.floats(-0.1, 0.1))
def test_mcc_lookup_deterministic(x, y):
    t = make_mcc(Spectrum.constant(1.0)).target
    assert t.material_index(x, y) == t.material_index(x, y)
