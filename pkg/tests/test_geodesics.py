import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fiberlab.direct_image import c_geodesic_x, curvature_F
from fiberlab.geodesics import (GeodesicError, bergman_geodesic, bergman_remainder, chi, domination_check,
                                flat_curve, rate_fit, sup_distance, toric_geodesic)
from fiberlab.geometry import ToricPotential
from fiberlab.spectra import HermitianForm, SectionSpace, gram_E

FS = ToricPotential.fubini_study(1)
BUMP = FS.with_bump(0.1)
X = np.linspace(-18, 18, 73)


@pytest.fixture(scope="module")
def oracle():
    return toric_geodesic(FS, BUMP)


def _fs_remainder(p, k=1):
    # FS is balanced: log B_{p phi} = p phi + chi + log(d_p / Vol)
    return np.log((p * k - 1) / (2 * np.pi * k)) / p


def test_chi_is_fs_canonical_weight():
    x = np.linspace(-5, 5, 11)
    assert np.allclose(chi(x), np.log(FS.deriv(x, 2)) - x, atol=1e-14)


# -- oracle -----------------------------------------------------------------------------


def test_oracle_endpoints_and_certificate(oracle):
    assert oracle.residual < 1e-4
    assert np.max(np.abs(oracle(0.0, X) - FS(X))) < 1e-8
    assert np.max(np.abs(oracle(1.0, X) - BUMP(X))) < 1e-8


def test_oracle_is_geodesic_via_direct_image_module(oracle):
    path = oracle.as_path()
    for s in (0.2, 0.5, 0.8):
        assert np.max(np.abs(c_geodesic_x(path, s, X))) < 1e-4


def test_oracle_constant_shift_exact():
    o = toric_geodesic(FS, FS.shifted(0.3))
    for s in (0.1, 0.5, 0.9):
        assert np.max(np.abs(o(s, X) - FS(X) - 0.3 * s)) < 1e-12
    assert o.residual < 1e-8


def test_oracle_pullback_is_translation():
    o = toric_geodesic(FS, FS.translated(0.8))
    assert o.residual < 1e-5
    for s in (0.25, 0.5, 0.75):
        assert np.max(np.abs(o(s, X) - FS(X + 0.8 * s))) < 1e-10


def test_oracle_rejects_tight_tolerance():
    with pytest.raises(GeodesicError):
        toric_geodesic(FS, BUMP, tol=1e-14)


def test_oracle_profile_derivatives(oracle):
    s = 0.4
    h = 1e-4
    num = (oracle(s, X + h) - oracle(s, X - h)) / (2 * h)
    assert np.allclose(oracle.profile(s, X, 1), num, atol=1e-7)
    m = oracle.metric(s)
    assert np.all(m.deriv(X, 2) > 0)


def test_F_curvature_nonpositive_on_geodesic(oracle):
    path = oracle.as_path()
    for p in (2, 4, 8):
        assert curvature_F(path, p, 0.5).max_eigenvalue <= 1e-6


# -- flat Hermitian curves --------------------------------------------------------------


def _pd(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return A @ A.conj().T + n * np.eye(n)


def test_flat_curve_uniform_scaling():
    G0 = gram_E(BUMP, 7)
    fc = flat_curve(G0, G0.scaled(2 * 0.25))
    assert np.allclose(fc.lam, 0.25, atol=1e-12)
    assert np.allclose(fc.at(0.6).matrix(), np.exp(2 * 0.25 * 0.6) * G0.matrix(), rtol=1e-10)


@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_flat_curve_endpoints(n, seed):
    rng = np.random.default_rng(seed)
    sp = SectionSpace(1, n + 1)
    G0, G1 = HermitianForm.from_matrix(sp, _pd(rng, n)), HermitianForm.from_matrix(sp, _pd(rng, n))
    fc = flat_curve(G0, G1)
    scale = np.max(np.abs(G1.matrix()))
    assert np.max(np.abs(fc.at(0.0).matrix() - G0.matrix())) < 1e-10 * scale
    assert np.max(np.abs(fc.at(1.0).matrix() - G1.matrix())) < 1e-10 * scale


def test_flat_curve_swap_symmetry(rng):
    sp = SectionSpace(1, 6)
    G0, G1 = HermitianForm.from_matrix(sp, _pd(rng, 5)), HermitianForm.from_matrix(sp, _pd(rng, 5))
    a = flat_curve(G0, G1).at(0.3).matrix()
    b = flat_curve(G1, G0).at(0.7).matrix()
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10 * np.max(np.abs(a)))


def test_flat_curve_has_zero_curvature(rng):
    sp = SectionSpace(1, 6)
    fc = flat_curve(HermitianForm.from_matrix(sp, _pd(rng, 5)), HermitianForm.from_matrix(sp, _pd(rng, 5)))
    h = 0.1
    d2 = fc.log_diagonal_in_basis(0.5 + h) - 2 * fc.log_diagonal_in_basis(0.5) + fc.log_diagonal_in_basis(0.5 - h)
    assert np.max(np.abs(d2)) < 1e-10


def test_dense_kernel_matches_toric():
    p, s = 6, 0.35
    G0, G1 = gram_E(FS, p), gram_E(BUMP, p)
    x = np.linspace(-4, 4, 9)
    Gd0, Gd1 = (HermitianForm.from_matrix(G.space, G.matrix()) for G in (G0, G1))
    dense = flat_curve(Gd0, Gd1).log_kernel(s, np.exp(x / 2))
    assert np.allclose(dense, (bergman_geodesic(FS, BUMP, p, s, x) * p + chi(x)), atol=1e-10)


# -- Bergman geodesics --------------------------------------------------------------------


def test_lambda_sign_pinned_by_endpoints():
    p = 12
    for s, m in ((0.0, FS), (1.0, BUMP)):
        phi_p = bergman_geodesic(FS, BUMP, p, s, X)
        assert np.allclose(phi_p - m(X), bergman_remainder(m, p, X), atol=1e-12)


def test_bergman_geodesic_constant_shift():
    p, c = 10, 0.3
    base = bergman_geodesic(FS, FS.shifted(c), p, 0.0, X)
    assert np.allclose(base - FS(X), _fs_remainder(p), atol=1e-10)
    for s in (0.3, 0.8):
        assert np.allclose(bergman_geodesic(FS, FS.shifted(c), p, s, X), base + s * c, atol=1e-12)


def test_bergman_geodesic_coincident_endpoints():
    a = bergman_geodesic(BUMP, BUMP, 8, 0.2, X)
    b = bergman_geodesic(BUMP, BUMP, 8, 0.9, X)
    assert np.array_equal(a, b)


def test_endpoint_remainder_is_order_log_p_over_p():
    for p in (20, 80):
        r = np.max(np.abs(bergman_remainder(BUMP, p, X)))
        assert r < 2 * np.log(p) / p


def test_domination(oracle):
    for p in (8, 32):
        chk = domination_check(oracle, p, np.linspace(0, 1, 6), np.linspace(-15, 15, 61))
        assert chk.holds(1e-8)


# -- sup distance -------------------------------------------------------------------------


@pytest.mark.parametrize("p", [10, 40, 160])
def test_sup_distance_constant_shift_closed_form(p):
    o = toric_geodesic(FS, FS.shifted(0.3))
    assert sup_distance(FS, FS.shifted(0.3), p, o) == pytest.approx(abs(_fs_remainder(p)), rel=1e-9)


@pytest.mark.parametrize("p", [10, 40, 160])
def test_sup_distance_pullback_closed_form(p):
    # the Bergman metrics of phi0(x + s a) already form the flat curve; chi(x + a) - chi(x) + a peaks at a
    a = 0.8
    o = toric_geodesic(FS, FS.translated(a))
    assert sup_distance(FS, FS.translated(a), p, o) == pytest.approx(a / p + _fs_remainder(p), rel=1e-7)


def test_sup_distance_common_constant(oracle):
    p = 20
    e = sup_distance(FS, BUMP, p, oracle)
    o2 = toric_geodesic(FS.shifted(0.5), BUMP.shifted(0.5))
    assert sup_distance(FS.shifted(0.5), BUMP.shifted(0.5), p, o2) == pytest.approx(e, abs=1e-10)


def test_sup_distance_trend(oracle):
    e = [sup_distance(FS, BUMP, p, oracle) for p in (16, 50, 150)]
    assert e[2] < e[1] < e[0]


# -- rate fit ---------------------------------------------------------------------------------


P = [10, 20, 40, 80, 160]


def test_rate_fit_exact_rate():
    fit = rate_fit(P, [2 * np.log(p) / p for p in P])
    assert fit.verdict == "PASS"
    assert fit.C_hat == pytest.approx(2.0, rel=1e-14)


def test_rate_fit_wrong_rate():
    assert rate_fit(P, [1 / np.sqrt(p) for p in P]).verdict == "FAIL"


def test_rate_fit_input_checks():
    with pytest.raises(ValueError):
        rate_fit([10, 20, 40], [0.1, 0.05, 0.02])
    with pytest.raises(ValueError):
        rate_fit([10, 40, 20, 80], [0.1] * 4)


def test_rate_fit_csv(tmp_path):
    fit = rate_fit(P, [2 * np.log(p) / p for p in P])
    fit.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "p,e,e_p_over_log_p" and len(lines) == 6
