import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from camsim.errors import DataFileError, RankDeficientError, ValidationError, WavelengthError
from camsim.optics import (
    VIGNETTED,
    IdealThinLens,
    IdentityLens,
    ParaxialThinLens,
    Ray4,
    RayPair,
    RayPairs,
    eval_rtf,
    fit_rtf,
    generate_ray_pairs,
    load_rtf,
    read_ray_pairs,
    rotation_commutation_error,
    sample_entrance_rays,
    save_rtf,
    write_ray_pairs,
)
from camsim.optics.rtf import design_matrix, monomial_exponents, rotate_rays

from oracles import gaussian_image_distance


def _linear_block(model, k=0):
    """4x4 matrix of linear coefficients (rows: outputs, cols: x, y, u, v)."""
    return model.forward[k][1:5].T


def test_monomial_basis_counts():
    # number of monomials in 4 variables up to degree d is C(d + 4, 4)
    from math import comb

    for d in range(1, 7):
        e = monomial_exponents(d)
        assert len(e) == comb(d + 4, 4)
        assert len({tuple(r) for r in e}) == len(e)
    assert monomial_exponents(1).tolist() == [[0, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]


def test_identity_fit_degree1():
    pairs = generate_ray_pairs(IdentityLens(1.0), 2000, 20.0, seed=3)
    m = fit_rtf(pairs, 1)
    np.testing.assert_allclose(_linear_block(m), np.eye(4), atol=1e-10)
    assert np.abs(m.forward[0][0]).max() < 1e-10
    assert m.rms_forward.max() <= 1e-10


def test_paraxial_thin_lens_matches_matrix():
    lens = ParaxialThinLens(1.265, focal_length_mm=4.38)
    pairs = generate_ray_pairs(lens, 5000, 30.0, min_object_distance_mm=200.0, seed=1)
    m = fit_rtf(pairs, 1)
    np.testing.assert_allclose(_linear_block(m), lens.matrix(), atol=1e-9)


def test_spherical_perturbation_needs_degree3():
    lens = ParaxialThinLens(1.265, focal_length_mm=4.38, spherical=0.02)
    pairs = generate_ray_pairs(lens, 5000, 20.0, seed=2)
    m3 = fit_rtf(pairs, 3)
    m1 = fit_rtf(pairs, 1)
    assert m3.rms_forward.max() <= 1e-8
    assert m1.rms_forward.max() > m3.rms_forward.max()
    assert m1.rms_forward.max() > 1e-5


def test_eval_identity_and_axis():
    pairs = generate_ray_pairs(IdentityLens(1.0), 1000, 20.0, seed=0)
    ident = fit_rtf(pairs, 1)
    ray = Ray4(0.3, -0.2, 0.1, 0.05)
    np.testing.assert_allclose(eval_rtf(ident, ray, 550.0), ray, atol=1e-12)
    lens_pairs = generate_ray_pairs(ParaxialThinLens(1.0), 2000, 20.0, seed=0)
    thin = fit_rtf(lens_pairs, 3)
    np.testing.assert_allclose(eval_rtf(thin, (0, 0, 0, 0), 550.0), (0, 0, 0, 0), atol=1e-12)


def test_thin_lens_images_axial_point_at_conjugate():
    f, s = 4.38, 300.0
    lens = IdealThinLens(1.265, focal_length_mm=f)
    expected = gaussian_image_distance(f, s)
    for x in (0.2, 0.6, 1.2):
        ray = np.array([x, 0.0, x / np.hypot(x, s), 0.0])
        out, ok = lens.trace(ray[None], 550.0)
        assert ok[0]
        xo, _, uo, _ = out[0]
        z = -xo * np.sqrt(1 - uo**2) / uo
        assert z == pytest.approx(expected, rel=1e-12)

    # the same through a fitted RTF, to the fit's accuracy
    pairs = generate_ray_pairs(lens, 20000, 10.0, min_object_distance_mm=250.0, seed=4)
    m = fit_rtf(pairs, 5)
    out = eval_rtf(m, (0.6, 0.0, 0.6 / np.hypot(0.6, s), 0.0), 550.0)
    z = -out.x * np.sqrt(1 - out.u**2) / out.u
    assert z == pytest.approx(expected, rel=1e-4)


def test_vignetting():
    pairs = generate_ray_pairs(IdentityLens(1.0), 1000, 20.0, seed=0)
    m = fit_rtf(pairs, 1)
    assert eval_rtf(m, (2.0, 0.0, 0.0, 0.0), 550.0) is VIGNETTED
    assert not VIGNETTED
    lens = ParaxialThinLens(1.0, focal_length_mm=0.5)
    out, ok = lens.trace(np.array([[0.9, 0.0, -0.7, 0.0]]))
    assert not ok[0]  # u_o = -2.5: non-physical


def test_wavelength_flag_is_explicit():
    pairs = generate_ray_pairs(IdentityLens(1.0), 1000, 20.0, wavelengths_nm=(450.0, 650.0), seed=0)
    m = fit_rtf(pairs, 1)
    assert list(m.wavelengths_nm) == [450.0, 650.0]
    with pytest.raises(WavelengthError):
        eval_rtf(m, (0, 0, 0, 0), 500.0)
    assert eval_rtf(m, (0.1, 0, 0, 0), 500.0, nearest=True).x == pytest.approx(0.1)


def test_fit_errors():
    pairs = generate_ray_pairs(IdentityLens(1.0), 10, 20.0, seed=0)
    with pytest.raises(RankDeficientError):
        fit_rtf(pairs, 2)  # 10 pairs < 15 monomials
    same = RayPairs(np.tile([0.1, 0.2, 0.0, 0.0], (50, 1)), np.tile([0.1, 0.2, 0.0, 0.0], (50, 1)), 550.0)
    with pytest.raises(RankDeficientError):
        fit_rtf(same, 1)
    with pytest.raises(ValidationError):
        fit_rtf(pairs, 0)
    with pytest.raises(ValidationError):
        fit_rtf(pairs, 7)
    with pytest.raises(ValidationError):
        RayPairs([[0, 0, 0.9, 0.9]], [[0, 0, 0, 0]], 550.0)


def test_fit_accepts_pair_list():
    pairs = generate_ray_pairs(IdentityLens(1.0), 100, 20.0, seed=0)
    as_list = list(pairs)
    assert isinstance(as_list[0], RayPair)
    m = fit_rtf(as_list, 1)
    np.testing.assert_allclose(_linear_block(m), np.eye(4), atol=1e-10)


def test_symmetric_fit_commutes_with_rotation():
    lens = ParaxialThinLens(1.265, focal_length_mm=4.38, spherical=0.01)
    pairs = generate_ray_pairs(lens, 4000, 20.0, seed=7)
    m = fit_rtf(pairs, 3, symmetric=True, n_rotations=4)
    rays = sample_entrance_rays(500, 1.0, 15.0, seed=8)
    err = rotation_commutation_error(m, rays, 550.0, np.linspace(0.1, 6.0, 7))
    assert err <= 1e-6


def test_raypair_file_roundtrip(tmp_path):
    pairs = generate_ray_pairs(ParaxialThinLens(1.0), 200, 20.0, wavelengths_nm=(450.0, 550.0), seed=1)
    path = tmp_path / "pairs.txt"
    write_ray_pairs(pairs, path)
    back = read_ray_pairs(path)
    order = np.lexsort((back.inputs[:, 0], back.wavelengths_nm))
    ref = np.lexsort((pairs.inputs[:, 0], pairs.wavelengths_nm))
    assert np.array_equal(back.inputs[order], pairs.inputs[ref])
    assert np.array_equal(back.outputs[order], pairs.outputs[ref])


@pytest.mark.parametrize(
    "text",
    ["0 0 0 0 0 0 0 0\n", "# wavelength_nm 550\n0 0 0 0 0 0 0\n", "# wavelength_nm 550\n0 0 a 0 0 0 0 0\n", ""],
)
def test_raypair_file_errors(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(DataFileError):
        read_ray_pairs(p)


def test_model_file_roundtrip(tmp_path):
    pairs = generate_ray_pairs(ParaxialThinLens(1.0, spherical=0.01), 3000, 20.0,
                               wavelengths_nm=(500.0, 600.0), seed=1)
    m = fit_rtf(pairs, 4)
    save_rtf(m, tmp_path / "m.toml", {"seed": 1})
    back = load_rtf(tmp_path / "m.toml")
    assert np.array_equal(back.forward, m.forward)
    assert np.array_equal(back.inverse, m.inverse)
    assert np.array_equal(back.exponents, m.exponents)
    assert back.entrance_pupil_radius_mm == m.entrance_pupil_radius_mm
    (tmp_path / "x.toml").write_text('format = "other"\n')
    with pytest.raises(DataFileError):
        load_rtf(tmp_path / "x.toml")


def test_back_focal_distance_of_fit():
    pairs = generate_ray_pairs(ParaxialThinLens(1.0, focal_length_mm=4.38), 2000, 20.0, seed=0)
    assert fit_rtf(pairs, 1).back_focal_distance_mm == pytest.approx(4.38, rel=1e-9)


# -- properties ----------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), degree=st.integers(1, 3))
def test_degree_d_fit_of_degree_d_map_is_exact(seed, degree):
    rng = np.random.default_rng(seed)
    exps = monomial_exponents(degree)
    coef = rng.normal(0, 0.05, (len(exps), 4))
    inp = sample_entrance_rays(400, 1.0, 15.0, seed=seed % 1000)
    out = design_matrix(inp, exps) @ coef
    assume(np.all(out[:, 2] ** 2 + out[:, 3] ** 2 < 1.0))
    m = fit_rtf(RayPairs(inp, out, 550.0), degree, fit_inverse=False)
    np.testing.assert_allclose(m.forward[0], coef, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(angle=st.floats(-10, 10), seed=st.integers(0, 1000))
def test_rotation_is_an_isometry(angle, seed):
    rays = sample_entrance_rays(50, 1.0, 20.0, seed=seed)
    rot = rotate_rays(rays, angle)
    np.testing.assert_allclose(np.hypot(rot[:, 0], rot[:, 1]), np.hypot(rays[:, 0], rays[:, 1]), rtol=1e-12)
    np.testing.assert_allclose(rotate_rays(rot, -angle), rays, atol=1e-12)
