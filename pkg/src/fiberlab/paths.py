"""One-parameter families of fiber metrics ``phi(t, .) = phi0 + psi(t, .)``.

A path supplies ``psi``, ``psi_t = d psi / dt`` and ``psi_tt = d^2 psi / dt dtbar``
at a complex parameter ``t``.  Toric paths evaluate these as functions of
``x = log|z|^2`` together with their x-derivatives (argument ``n``); general
paths evaluate them at chart-0 points ``z`` and leave z-derivatives to finite
differences.  Strip-type paths depend on ``s = Re t`` only, so
``psi_t = psi_s / 2`` and ``psi_tt = psi_ss / 4``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (FiberMetric, Metric, ToricPotential, _fd_laplacian, _Sech, _Sum,
                       _Term, check_positivity)

ToricFn = Callable[[complex, np.ndarray, int], np.ndarray]
PointFn = Callable[[complex, np.ndarray], np.ndarray]


def _xof(z):
    return np.log(np.abs(z) ** 2 + 1e-300)


class _PathTerm(_Term):
    """``psi(t, .)`` frozen at one ``t`` as a profile term (bounded, slope 0)."""

    def __init__(self, psi: ToricFn, t: complex):
        self.psi, self.t = psi, t

    def deriv(self, x, n):
        return np.real(self.psi(self.t, np.asarray(x, dtype=float), n))


@dataclass(frozen=True)
class ToricPath:
    """S^1-invariant path; evaluators take ``(t, x, n)`` and return the n-th x-derivative."""

    base: ToricPotential
    psi: ToricFn
    psi_t: ToricFn
    psi_tt: ToricFn
    symmetric: bool = True
    domain: str = "disc"
    name: str = "toric-path"

    toric = True

    @property
    def k(self) -> int:
        return self.base.k

    def phi(self, t, x, n: int = 0) -> np.ndarray:
        return self.base.deriv(x, n) + np.real(self.psi(t, x, n))

    def metric_at(self, t, validate: bool = False) -> ToricPotential:
        term = _Sum((self.base.term, _PathTerm(self.psi, t)))
        tp = ToricPotential(self.k, term, X=self.base.X, n_grid=self.base.grid.size,
                            name=f"{self.name}@{t}", validate=False)
        if validate:
            tp.validate()
        return tp

    def as_fiber_path(self) -> "FiberPath":
        """The same path seen by the two-chart machinery (for cross-checks)."""

        def lift(f):
            return lambda t, z: f(t, _xof(z), 0)

        return FiberPath(FiberMetric.from_toric(self.base), lift(self.psi), lift(self.psi_t), lift(self.psi_tt),
                         self.symmetric, self.domain, self.name)

    def fd_check(self, t, x=None, h: float = 1e-4) -> float:
        """Max mismatch between the t-derivative evaluators and centred differences of ``psi``."""
        x = np.linspace(-10.0, 10.0, 41) if x is None else np.asarray(x, dtype=float)
        return _fd_check(lambda tt: self.psi(tt, x, 0), lambda tt: self.psi_t(tt, x, 0),
                         lambda tt: self.psi_tt(tt, x, 0), t, h)

    def check_positivity(self, t) -> bool:
        x = self.base.grid
        return bool(np.all(self.phi(t, x, 2) > 0))


@dataclass(frozen=True)
class FiberPath:
    """General path; evaluators take ``(t, z)`` with ``z`` in chart-0 coordinates."""

    base: FiberMetric
    psi: PointFn
    psi_t: PointFn
    psi_tt: PointFn
    symmetric: bool = False
    domain: str = "disc"
    name: str = "fiber-path"

    toric = False

    @property
    def k(self) -> int:
        return self.base.k

    def metric_at(self, t) -> FiberMetric:
        base, psi = self.base, self.psi

        def w0(z):
            return base.w0(z) + np.real(psi(t, z))

        def w1(w):
            return base.w1(w) + np.real(psi(t, 1.0 / w))

        def d0(z):
            return base.density(z, 0) + np.real(_fd_laplacian(lambda u: psi(t, u), z))

        def d1(w):
            return base.density(w, 1) + np.real(_fd_laplacian(lambda u: psi(t, 1.0 / u), w))

        return FiberMetric(base.k, w0, w1, d0, d1, name=f"{self.name}@{t}")

    def fd_check(self, t, z=None, h: float = 1e-4) -> float:
        if z is None:
            rng = np.random.default_rng(0)
            z = rng.normal(size=16) + 1j * rng.normal(size=16)
        return _fd_check(lambda tt: self.psi(tt, z), lambda tt: self.psi_t(tt, z),
                         lambda tt: self.psi_tt(tt, z), t, h)

    def check_positivity(self, t) -> bool:
        return check_positivity(self.metric_at(t)).positive


MetricPath = ToricPath | FiberPath


def _fd_check(f, f_t, f_tt, t, h) -> float:
    """Compare ``d/dt = (d_a - i d_b)/2`` and ``d^2/dt dtbar = (d_aa + d_bb)/4`` with differences."""
    t = complex(t)
    fa = (f(t + h) - f(t - h)) / (2 * h)
    fb = (f(t + 1j * h) - f(t - 1j * h)) / (2 * h)
    lap = (f(t + h) + f(t - h) + f(t + 1j * h) + f(t - 1j * h) - 4 * f(t)) / (h * h)
    err_t = np.max(np.abs(0.5 * (fa - 1j * fb) - f_t(t)))
    err_tt = np.max(np.abs(0.25 * lap - f_tt(t)))
    return float(max(err_t, err_tt))


# ---------------------------------------------------------------------------
# named families


def _zero(t, x, n=0):
    return np.zeros(np.shape(x))


def constant_shift(base: Metric, c: float) -> MetricPath:
    """``psi = c Re t``: a family of constant rescalings (flat direct images)."""

    def psi(t, x, n=0):
        return np.full(np.shape(x), c * complex(t).real) if n == 0 else np.zeros(np.shape(x))

    def psi_t(t, x, n=0):
        return np.full(np.shape(x), 0.5 * c) if n == 0 else np.zeros(np.shape(x))

    if isinstance(base, ToricPotential):
        return ToricPath(base, psi, psi_t, _zero, True, "strip", f"shift({c})")
    return FiberPath(base, lambda t, z: psi(t, z), lambda t, z: psi_t(t, z), lambda t, z: np.zeros(np.shape(z)),
                     True, "strip", f"shift({c})")


def bump_path(base: Metric, mu, linear: float = 0.0) -> MetricPath:
    """``psi = |t|^2 mu + linear Re t``.

    ``mu`` is ``mu(x, n)`` for a toric base and ``mu(z)`` otherwise.  At
    ``t = 0`` the geodesic curvature equals ``mu``.
    """
    if isinstance(base, ToricPotential):
        def psi(t, x, n=0):
            t = complex(t)
            v = abs(t) ** 2 * mu(x, n)
            return v + linear * t.real if n == 0 else v

        def psi_t(t, x, n=0):
            v = np.conj(complex(t)) * mu(x, n)
            return v + 0.5 * linear if n == 0 else v

        return ToricPath(base, psi, psi_t, lambda t, x, n=0: mu(x, n) + 0.0j, False, "disc", "bump")

    return FiberPath(base, lambda t, z: abs(t) ** 2 * mu(z) + linear * complex(t).real,
                     lambda t, z: np.conj(complex(t)) * mu(z) + 0.5 * linear,
                     lambda t, z: mu(z) + 0.0j, False, "disc", "bump")


def sech_bump(eps: float = 1.0, x0: float = 0.0, width: float = 1.0) -> Callable[[np.ndarray, int], np.ndarray]:
    """Toric function ``eps sech((x - x0)/width)`` with x-derivatives."""
    term = _Sech(eps, x0, width)
    return lambda x, n=0: term.deriv(x, n)


def pullback_path(base: ToricPotential, a: float = 1.0) -> ToricPath:
    """``psi = phi0(x + 2a Re t) - phi0(x)``: pullback by the flow of ``a z d/dz``.

    Every fiber metric is biholomorphic to ``phi0``; geodesic curvature vanishes
    and the complex gradient of ``psi_t`` is holomorphic.
    """

    def psi(t, x, n=0):
        return base.deriv(x + 2 * a * complex(t).real, n) - base.deriv(x, n)

    def psi_t(t, x, n=0):
        return a * base.deriv(x + 2 * a * complex(t).real, n + 1) + 0.0j

    def psi_tt(t, x, n=0):
        return a * a * base.deriv(x + 2 * a * complex(t).real, n + 2) + 0.0j

    return ToricPath(base, psi, psi_t, psi_tt, True, "strip", f"pullback({a})")


def generic_toric_path(base: ToricPotential, nu1, nu2, nu3) -> ToricPath:
    """``psi = Re(t) nu1 + |t|^2 nu2 + Re(t^2) nu3`` with each ``nu_i(x, n)``."""

    def psi(t, x, n=0):
        t = complex(t)
        return t.real * nu1(x, n) + abs(t) ** 2 * nu2(x, n) + (t * t).real * nu3(x, n)

    def psi_t(t, x, n=0):
        t = complex(t)
        return 0.5 * nu1(x, n) + np.conj(t) * nu2(x, n) + t * nu3(x, n)

    return ToricPath(base, psi, psi_t, lambda t, x, n=0: nu2(x, n) + 0.0j, False, "disc", "generic")


def strip_path(base: ToricPotential, phi_s: Callable[[float, np.ndarray, int], np.ndarray],
               phi_ss: Callable[[float, np.ndarray, int], np.ndarray],
               profile: Callable[[float, np.ndarray, int], np.ndarray], name: str = "strip") -> ToricPath:
    """Path depending on ``s = Re t`` from s-derivative evaluators of the profile ``phi(s, x)``."""

    def psi(t, x, n=0):
        return profile(complex(t).real, x, n) - base.deriv(x, n)

    return ToricPath(base, psi, lambda t, x, n=0: 0.5 * phi_s(complex(t).real, x, n) + 0.0j,
                     lambda t, x, n=0: 0.25 * phi_ss(complex(t).real, x, n) + 0.0j, True, "strip", name)
