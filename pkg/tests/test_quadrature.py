import numpy as np
import pytest

from fiberlab.quadrature import DiscRule, PanelRule, QuadratureError, gauss_legendre, refine


def test_panel_rule_integrates_polynomials_exactly():
    r = PanelRule(-1.0, 2.0, 3, order=8)
    assert r.integrate(r.nodes**7) == pytest.approx((2.0**8 - 1.0) / 8, rel=1e-14)


def test_log_integrate_matches_plain_integral():
    r = PanelRule(-30.0, 30.0, 40)
    f = lambda x: -0.5 * x**2
    assert np.exp(r.log_integrate(f(r.nodes))) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-13)


def test_log_integrate_survives_huge_exponents():
    r = PanelRule(-30.0, 30.0, 40)
    val = r.log_integrate(2000.0 - 0.5 * r.nodes**2)
    assert val == pytest.approx(2000.0 + 0.5 * np.log(2 * np.pi), rel=1e-14)


def test_refined_doubles_panels():
    r = PanelRule(0.0, 1.0, 5)
    assert r.refined().nodes.size == 2 * r.nodes.size


def test_disc_rule_area():
    rule = DiscRule()
    # weights are r dr dtheta on the unit disc
    assert rule.weights.sum() == pytest.approx(np.pi, rel=1e-13)


def test_refine_converges_and_reports():
    val, rule = refine(lambda r: np.atleast_1d(r.integrate(np.cos(r.nodes))), PanelRule(0.0, np.pi / 2, 1, 4))
    assert val[0] == pytest.approx(1.0, rel=1e-10)


def test_refine_raises_on_noise():
    rng = np.random.default_rng(0)
    with pytest.raises(QuadratureError):
        refine(lambda r: np.atleast_1d(r.integrate(1.0 + 1e-3 * rng.normal(size=r.nodes.size))),
               PanelRule(0.0, 1.0, 2), rtol=1e-12, max_doublings=3)


def test_gauss_legendre_interval():
    x, w = gauss_legendre(2.0, 5.0, 6)
    assert np.all((x > 2) & (x < 5))
    assert w.sum() == pytest.approx(3.0, rel=1e-14)
