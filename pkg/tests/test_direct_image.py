import numpy as np
import pytest

from fiberlab.direct_image import (S_TERM_COEFFICIENT, A_form, c_geodesic, c_geodesic_x, complex_gradient,
                                   curvature_E, curvature_F, dbarV_integral, predicted_trace_terms,
                                   trace_A_limit, trace_asymptotics)
from fiberlab.geometry import FiberMetric, ToricPotential, sigmoid_poly
from fiberlab.paths import bump_path, constant_shift, generic_toric_path, pullback_path, sech_bump

FS = ToricPotential.fubini_study(1)
KILLING = sigmoid_poly([1.0, -2.0])          # (1 - |z|^2)/(1 + |z|^2)
SMOOTH = sigmoid_poly([0.0, 0.4, -0.4])      # 0.1 sech^2(x/2)
BUMP = sech_bump(0.3)
X = np.linspace(-15, 15, 61)


def _const(c):
    return lambda x, n=0: np.full(np.shape(x), c) if n == 0 else np.zeros(np.shape(x))


# -- geodesic curvature ------------------------------------------------------------


def test_c_of_constant_shift_vanishes():
    assert np.max(np.abs(c_geodesic_x(constant_shift(FS, 0.4), 0.3 + 0.1j, X))) < 1e-15


def test_c_of_bump_at_origin_is_mu():
    assert np.allclose(c_geodesic_x(bump_path(FS, BUMP), 0.0, X), BUMP(X), atol=1e-15)


def test_c_pointwise_matches_toric():
    path = generic_toric_path(FS, sech_bump(0.3), sech_bump(0.2, 1.0), sech_bump(0.05, -1.0))
    z = np.array([0.3 + 0.2j, 0.8, 0.1j])
    assert np.allclose(c_geodesic(path, 0.2 + 0.1j, z), c_geodesic_x(path, 0.2 + 0.1j, np.log(np.abs(z) ** 2)),
                       atol=1e-12)


def test_c_pullback_vanishes():
    assert np.max(np.abs(c_geodesic_x(pullback_path(FS, 1.0), 0.3, X))) < 1e-12


# -- complex gradient --------------------------------------------------------------


def test_gradient_of_constant_vanishes():
    v = complex_gradient(FS, _const(2.0))
    assert np.all(v.Vz == 0) and np.all(v.dbar_norm2 == 0)


def test_killing_gradient_is_rotation_field():
    # mu_zbar = -2 z / (1+|z|^2)^2 and g = 1/(1+|z|^2)^2, so V^z = 2 i z
    v = complex_gradient(FS, KILLING)
    assert np.allclose(v.Vz, 2j * v.z, atol=1e-12)
    assert np.sqrt(np.max(v.dbar_norm2)) < 1e-8
    assert v.residual < 1e-8


def test_killing_gradient_dense():
    fm = FiberMetric.from_toric(FS)
    v = complex_gradient(fm, lambda z: (1 - np.abs(z) ** 2) / (1 + np.abs(z) ** 2))
    assert np.allclose(v.Vz, 2j * v.z, atol=1e-9)
    assert np.sqrt(np.max(v.dbar_norm2)) < 1e-8


def test_bump_gradient_not_holomorphic():
    assert dbarV_integral(FS, BUMP) > 1e-3


def test_gradient_both_charts_agree():
    # the reflected chart sees the same pointwise |dbar V|^2
    z = np.array([0.5 + 0.5j, 0.9])
    a = complex_gradient(FS, BUMP, z).dbar_norm2
    b = complex_gradient(FS, BUMP, 1 / z, chart=1).dbar_norm2
    assert np.allclose(a, b, rtol=1e-10)


# -- A-form -------------------------------------------------------------------------


def test_A_of_constant_vanishes():
    assert np.max(np.abs(A_form(FS, 6, _const(0.7)).eigenvalues())) < 1e-12


@pytest.mark.parametrize("p", [2, 6, 20])
def test_A_vanishes_for_holomorphic_gradient(p):
    assert np.max(np.abs(A_form(FS, p, KILLING).eigenvalues())) < 1e-8


def test_A_positive_and_below_hormander_bound(rng):
    m = FS.with_bump(0.1)
    for p in (3, 8):
        af = A_form(m, p, BUMP)
        for _ in range(10):
            u = rng.normal(size=p - 1) + 1j * rng.normal(size=p - 1)
            a = af.value(u)
            assert a >= -1e-10 * af.norm2(u)
            assert a <= af.bound_value(u) + 1e-8 * af.norm2(u)
            assert a <= af.bound_value(u, sharp=True) * p**2 + 1e-8 * af.norm2(u)


def test_A_invariant_under_constants():
    a = A_form(FS, 6, BUMP).matrix
    shifted = A_form(FS, 6, lambda x, n=0: BUMP(x, n) + (3.0 if n == 0 else 0.0))
    # the shift enters |mu|^2 and the projection term, which cancel at their own size
    scale = np.max(np.abs(shifted.terms[1]))
    assert np.max(np.abs(a - shifted.matrix)) < 1e-13 * scale


def test_A_dense_matches_toric():
    a = A_form(FS, 5, BUMP)
    b = A_form(FS, 5, BUMP, dense=True)
    assert np.allclose(np.sort(a.eigenvalues()), np.sort(b.eigenvalues()), atol=1e-6)


# -- curvature of the direct images ---------------------------------------------------


PATHS = {
    "shift": constant_shift(FS, 0.3),
    "bump": bump_path(FS, BUMP, linear=0.2),
    "generic": generic_toric_path(FS, sech_bump(0.3), sech_bump(0.2, 1.0), sech_bump(0.05, -1.0)),
}


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("name", sorted(PATHS))
def test_curvature_identity(name, k):
    base = ToricPotential.fubini_study(k)
    path = {"shift": constant_shift(base, 0.3), "bump": bump_path(base, BUMP, 0.2),
            "generic": generic_toric_path(base, sech_bump(0.3), sech_bump(0.2, 1.0), sech_bump(0.05, -1.0))}[name]
    for p in (2, 4, 8):
        rep = curvature_E(path, p, 0.3 - 0.2j)
        err = np.linalg.norm(rep.Q - rep.first_term - rep.second_term)
        assert err < 1e-9 or rep.residual < 1e-6
        assert np.array_equal(rep.Q, rep.Q.conj().T)


def test_constant_shift_is_flat():
    for f in (curvature_E, curvature_F):
        rep = f(PATHS["shift"], 6, 0.2)
        assert np.max(np.abs(rep.eigenvalues)) < 1e-12


@pytest.mark.parametrize("p", [2, 4, 8, 16])
def test_pullback_family_is_flat(p):
    assert curvature_E(pullback_path(FS, 1.0), p, 0.1).operator_norm() < 1e-6


def test_semipositive_path_has_semipositive_curvature():
    path = bump_path(FS, BUMP, linear=0.2)
    t = 0.1 + 0.05j
    c = c_geodesic_x(path, t, np.linspace(-20, 20, 401))
    assert c.min() >= 0
    for p in (2, 4, 8):
        assert curvature_E(path, p, t).min_eigenvalue >= -1e-8
        assert curvature_F(path, p, t).residual <= 1e-6


def test_fd_mode_matches_analytic():
    path = PATHS["generic"]
    a = curvature_E(path, 4, 0.2 + 0.1j)
    b = curvature_E(path, 4, 0.2 + 0.1j, mode="fd")
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-5)
    fa = curvature_F(path, 3, 0.2 + 0.1j)
    fb = curvature_F(path, 3, 0.2 + 0.1j, mode="fd")
    assert np.allclose(fa.eigenvalues, fb.eigenvalues, atol=1e-5)


def test_dense_curvature_matches_toric():
    path = PATHS["generic"]
    for f in (curvature_E, curvature_F):
        a = f(path, 4, 0.2 + 0.1j)
        b = f(path.as_fiber_path(), 4, 0.2 + 0.1j, dense=True)
        assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-6)


def test_report_serializes(tmp_path):
    import json
    rep = curvature_E(PATHS["bump"], 4, 0.1)
    rep.save(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["kind"] == "E" and d["dim"] == 3 and len(d["eigenvalues"]) == 3


# -- large-p asymptotics ----------------------------------------------------------------


def test_trace_asymptotics_degenerate_cases():
    for path in (pullback_path(FS, 1.0), constant_shift(FS, 0.3)):
        tab = trace_asymptotics(path, 0.2, [4, 8, 16])
        assert np.max(np.abs(tab.column("measured"))) < 1e-8
        assert np.max(np.abs(tab.column("predicted"))) < 1e-8


def test_trace_asymptotics_residual_limit():
    """Measured: r(p) tends to -(1/2) int |dbar V|^2 omega / Vol under the stated prediction."""
    path = bump_path(FS, SMOOTH)
    tab = trace_asymptotics(path, 0.5, [16, 32, 64])
    r = tab.column("residual")
    target = -0.5 * tab.grad_term / tab.volume
    gaps = np.abs(r - target)
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 0.05 * abs(target)


def test_trace_asymptotics_with_measured_coefficient():
    path = bump_path(FS, SMOOTH)
    tab = trace_asymptotics(path, 0.5, [4, 8, 16, 32, 64], grad_coefficient=0.5)
    r = np.abs(tab.column("residual"))
    order_one = (abs(S_TERM_COEFFICIENT * tab.s_term) + abs(0.5 * tab.grad_term)) / tab.volume
    assert np.all(np.diff(r) < 0)
    assert r[-1] < 0.05 * order_one


def test_predicted_terms_scale():
    path = bump_path(FS, SMOOTH)
    ci, si, vi, vol = predicted_trace_terms(path, 0.5)
    assert vol == pytest.approx(2 * np.pi)
    assert vi > 0


def test_trace_A_limit_cases():
    vals, lim = trace_A_limit(FS, _const(1.0), [4, 8])
    assert lim == 0 and np.max(np.abs(vals)) < 1e-12
    vals, lim = trace_A_limit(FS, KILLING, [4, 8, 16])
    assert lim < 1e-8 and np.max(np.abs(vals)) < 1e-8


def test_trace_A_limit_is_half_the_stated_value():
    """Measured ratio tr A_p(p mu)/d_p over the stated limit tends to 1/2."""
    vals, lim = trace_A_limit(FS, SMOOTH, [16, 32, 64])
    ratio = vals / lim
    assert np.all(np.diff(np.abs(ratio - 0.5)) < 0)
    assert ratio[-1] == pytest.approx(0.5, abs=0.01)
