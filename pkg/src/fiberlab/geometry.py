"""Positive metrics on O(k) over the Riemann sphere.

Two representations are supported:

``ToricPotential``
    an S^1-invariant weight written as a convex profile ``phi(x)`` of
    ``x = log|z|^2``.  Slopes run from 0 at ``x -> -inf`` to ``k`` at
    ``x -> +inf``.  Profiles are sums of analytic terms (Fubini-Study
    softplus, sech bumps, constants, translations) or a quintic spline
    sampled on ``[-X, X]``.

``FiberMetric``
    a general weight given by one real function per affine chart,
    ``w0(z)`` on ``|z| <= 1`` and ``w1(w)`` on ``|w| <= 1`` with ``w = 1/z``,
    glued by ``w1(w) = w0(1/w) + k log|w|^2``.

Conventions: ``omega = i ddbar phi = i g dz ^ dzbar`` (no 2 pi), so the
volume of the sphere is ``2 pi k`` and ``i dz ^ dzbar = 2 dA``.  Scalar
curvature is ``S = -(1/g) d_z d_zbar log g``, positive (``2/k``) for
Fubini-Study; ``int S omega = 4 pi`` for every metric.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.special import expit

from .quadrature import DiscRule, PanelRule, QuadratureError, refine

X_DEFAULT = 20.0
INTEGRATION_HALF_WIDTH = 45.0
# x = log|z|^2 is clamped here when evaluating near the poles; chart 1 takes over beyond.
_X_FLOOR = -40.0


class MetricError(ValueError):
    """A weight is outside the positive class or violates its invariants."""


# ---------------------------------------------------------------------------
# profile terms


class _Term:
    """One summand of a toric profile; ``slope`` is its growth rate at +inf."""

    slope = 0.0

    def deriv(self, x: np.ndarray, n: int) -> np.ndarray:
        raise NotImplementedError

    def reflect(self) -> "_Term":
        """Term for the chart at infinity: ``xt -> t(-xt) + slope * xt``."""
        return _Reflected(self)


@dataclass(frozen=True)
class _Softplus(_Term):
    k: float

    @property
    def slope(self):
        return self.k

    def deriv(self, x, n):
        k = self.k
        if n == 0:
            return k * np.logaddexp(0.0, x)
        s = expit(x)
        q = expit(-x)  # 1 - s without cancellation
        if n == 1:
            return k * s
        if n == 2:
            return k * s * q
        if n == 3:
            return k * s * q * (q - s)
        if n == 4:
            return k * s * q * (1.0 - 6.0 * s * q)
        raise ValueError(n)

    def reflect(self):
        return self


@dataclass(frozen=True)
class _Sech(_Term):
    eps: float
    x0: float = 0.0
    width: float = 1.0

    def deriv(self, x, n):
        y = (np.asarray(x, dtype=float) - self.x0) / self.width
        e = np.exp(-np.abs(y))
        S = 2.0 * e / (1.0 + e * e)
        T = np.tanh(y)
        if n == 0:
            v = S
        elif n == 1:
            v = -S * T
        elif n == 2:
            v = S * (1.0 - 2.0 * S * S)
        elif n == 3:
            v = -S * T * (1.0 - 6.0 * S * S)
        elif n == 4:
            v = S * (1.0 - 20.0 * S * S + 24.0 * S**4)
        else:
            raise ValueError(n)
        return self.eps * v / self.width**n

    def reflect(self):
        return _Sech(self.eps, -self.x0, self.width)


class _SigmoidPoly(_Term):
    """Polynomial ``P(s)`` in ``s = e^x/(1+e^x) = |z|^2/(1+|z|^2)``; smooth on the sphere."""

    def __init__(self, coef: Sequence[float]):
        self.coef = tuple(float(c) for c in coef)
        polys = [np.polynomial.Polynomial(self.coef)]
        ds = np.polynomial.Polynomial([0.0, 1.0, -1.0])  # ds/dx = s - s^2
        for _ in range(6):
            polys.append(polys[-1].deriv() * ds)
        self._polys = polys

    def deriv(self, x, n):
        x = np.asarray(x, dtype=float)
        s = expit(x)
        if n == 0:
            return self._polys[0](s)
        # factor out ds/dx = s (1 - s) so the tails keep their relative accuracy
        return s * expit(-x) * self._polys[n - 1].deriv()(s)


def sigmoid_poly(coef: Sequence[float]):
    """Toric function ``P(|z|^2/(1+|z|^2))`` as ``f(x, n)`` with x-derivatives up to order 6."""
    term = _SigmoidPoly(coef)
    return lambda x, n=0: term.deriv(x, n)


@dataclass(frozen=True)
class _Constant(_Term):
    c: float

    def deriv(self, x, n):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, self.c) if n == 0 else np.zeros_like(x)

    def reflect(self):
        return self


@dataclass(frozen=True)
class _Translate(_Term):
    term: _Term
    a: float

    @property
    def slope(self):
        return self.term.slope

    def deriv(self, x, n):
        return self.term.deriv(np.asarray(x, dtype=float) + self.a, n)

    def reflect(self):
        return _Sum((_Translate(self.term.reflect(), -self.a), _Constant(self.term.slope * self.a)))


@dataclass(frozen=True)
class _Sum(_Term):
    terms: tuple

    @property
    def slope(self):
        return sum(t.slope for t in self.terms)

    def deriv(self, x, n):
        return sum(t.deriv(x, n) for t in self.terms)

    def reflect(self):
        return _Sum(tuple(t.reflect() for t in self.terms))


@dataclass(frozen=True)
class _Reflected(_Term):
    term: _Term

    @property
    def slope(self):
        return self.term.slope

    def deriv(self, x, n):
        v = (-1.0) ** n * self.term.deriv(-np.asarray(x, dtype=float), n)
        if n == 0:
            v = v + self.term.slope * x
        elif n == 1:
            v = v + self.term.slope
        return v

    def reflect(self):
        return self.term


class _SampledProfile(_Term):
    """Quintic spline on ``[-X, X]`` with exact linear tails (slopes 0 and k)."""

    def __init__(self, x: np.ndarray, values: np.ndarray, k: float):
        self.k = float(k)
        self.lo, self.hi = float(x[0]), float(x[-1])
        self._spline = make_interp_spline(x, values, k=5)
        self._v_lo = float(self._spline(self.lo))
        self._v_hi = float(self._spline(self.hi))

    @property
    def slope(self):
        return self.k

    def deriv(self, x, n):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.zeros_like(x)
        out[inside] = self._spline(x[inside], nu=n)
        left, right = x < self.lo, x > self.hi
        if n == 0:
            out[left] = self._v_lo
            out[right] = self._v_hi + self.k * (x[right] - self.hi)
        elif n == 1:
            out[right] = self.k
        return out


# ---------------------------------------------------------------------------
# toric potentials


class ToricPotential:
    """S^1-invariant weight on O(k) as a profile of ``x = log|z|^2``.

    Parameters
    ----------
    k : int
        Degree of the line bundle.
    term : _Term
        Profile; build with the named constructors rather than directly.
    X : float
        Half-width of the sample grid used for invariant checks.
    validate : bool
        Check strict convexity and the slope range on the grid.
    """

    def __init__(self, k: int, term: _Term, X: float = X_DEFAULT, n_grid: int = 801,
                 name: str = "custom", validate: bool = True):
        if int(k) != k or k < 1:
            raise MetricError(f"degree must be a positive integer, got {k}")
        self.k = int(k)
        self.term = term
        self.X = float(X)
        self.grid = np.linspace(-self.X, self.X, n_grid)
        self.name = name
        if abs(term.slope - self.k) > 1e-12:
            raise MetricError(f"profile slope at +inf is {term.slope}, expected {self.k}")
        if validate:
            self.validate()

    # -- constructors -----------------------------------------------------
    @classmethod
    def fubini_study(cls, k: int = 1, **kw) -> "ToricPotential":
        return cls(k, _Softplus(float(k)), name=kw.pop("name", "fs"), **kw)

    @classmethod
    def from_samples(cls, x: Sequence[float], values: Sequence[float], k: int, **kw) -> "ToricPotential":
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or np.any(np.diff(x) <= 0):
            raise MetricError("samples need a strictly increasing 1-D x grid")
        kw.setdefault("X", float(min(-x[0], x[-1])))
        return cls(k, _SampledProfile(x, values, k), name=kw.pop("name", "sampled"), **kw)

    @classmethod
    def from_csv(cls, path, k: int, **kw) -> "ToricPotential":
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise MetricError(f"{path}: expected two columns (x, phi)")
        return cls.from_samples(data[:, 0], data[:, 1], k, **kw)

    def _derived(self, term: _Term, name: str, validate: bool = True) -> "ToricPotential":
        return ToricPotential(self.k, term, X=self.X, n_grid=self.grid.size, name=name, validate=validate)

    def with_bump(self, eps: float, x0: float = 0.0, width: float = 1.0) -> "ToricPotential":
        """Add ``eps * sech((x - x0)/width)``."""
        return self._derived(_Sum((self.term, _Sech(eps, x0, width))), f"{self.name}+bump({eps},{x0},{width})")

    def with_poly(self, coef: Sequence[float]) -> "ToricPotential":
        """Add ``P(s)`` with ``s = |z|^2/(1+|z|^2)`` (coefficients in increasing degree)."""
        return self._derived(_Sum((self.term, _SigmoidPoly(coef))), f"{self.name}+poly{tuple(coef)}")

    def shifted(self, c: float) -> "ToricPotential":
        return self._derived(_Sum((self.term, _Constant(c))), f"{self.name}+{c}")

    def translated(self, a: float) -> "ToricPotential":
        """The pullback ``x -> phi(x + a)`` under ``z -> e^{a/2} z``."""
        return self._derived(_Translate(self.term, a), f"{self.name}(x+{a})")

    def reflected(self) -> "ToricPotential":
        """Profile in the chart at infinity: ``phi(-x) + k x``."""
        return self._derived(self.term.reflect(), f"{self.name}~", validate=False)

    # -- evaluation -------------------------------------------------------
    def deriv(self, x, n: int = 0) -> np.ndarray:
        return self.term.deriv(np.asarray(x, dtype=float), n)

    def __call__(self, x) -> np.ndarray:
        return self.deriv(x, 0)

    def validate(self) -> None:
        d1 = self.deriv(self.grid, 1)
        d2 = self.deriv(self.grid, 2)
        if np.any(d2 <= 0):
            raise MetricError(f"{self.name}: phi'' <= 0 on the grid (min {d2.min():.3e})")
        if np.any(d1 <= 0) or np.any(d1 >= self.k):
            raise MetricError(f"{self.name}: phi' leaves (0, {self.k})")

    def __repr__(self):
        return f"ToricPotential(k={self.k}, name={self.name!r})"


# ---------------------------------------------------------------------------
# general two-chart metrics


def _fd_laplacian(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, h: float = 1e-2) -> np.ndarray:
    """Fourth-order central-difference ``d_z d_zbar f = (f_xx + f_yy)/4``."""
    c = (-1.0, 16.0, -30.0, 16.0, -1.0)
    acc = 0.0
    for unit in (1.0, 1.0j):
        for ci, m in zip(c, (-2, -1, 0, 1, 2)):
            acc = acc + ci * f(z + m * h * unit)
    return acc / (12.0 * h * h) / 4.0


def fd_dzbar(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Fourth-order central-difference ``d f / d zbar = (f_x + i f_y)/2``."""
    c = (1.0, -8.0, 8.0, -1.0)
    out = 0.0
    for unit, ph in ((1.0, 1.0), (1.0j, 1.0j)):
        d = sum(ci * f(z + m * h * unit) for ci, m in zip(c, (-2, -1, 1, 2))) / (12.0 * h)
        out = out + ph * d
    return 0.5 * out


@dataclass(frozen=True)
class FiberMetric:
    """Weight on O(k) given in both affine charts.

    ``density0`` / ``density1`` are optional analytic Kahler densities; when
    absent they are obtained by finite differences of the weights.
    """

    k: int
    w0: Callable[[np.ndarray], np.ndarray]
    w1: Callable[[np.ndarray], np.ndarray]
    density0: Callable[[np.ndarray], np.ndarray] | None = None
    density1: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "custom"

    @classmethod
    def from_toric(cls, tp: ToricPotential) -> "FiberMetric":
        ref = tp.reflected()

        def xof(z):
            return np.maximum(np.log(np.abs(z) ** 2 + 1e-300), _X_FLOOR)

        # w1(w) = w0(1/w) + k log|w|^2 = phi~(log|w|^2)
        return cls(tp.k, lambda z: tp(xof(z)), lambda w: ref(xof(w)),
                   lambda z: np.exp(np.log(tp.deriv(xof(z), 2)) - xof(z)),
                   lambda w: np.exp(np.log(ref.deriv(xof(w), 2)) - xof(w)),
                   name=f"toric:{tp.name}")

    @classmethod
    def fs_harmonic(cls, k: int = 1, eps: float = 0.1) -> "FiberMetric":
        """Fubini-Study plus ``eps * X1`` with ``X1 = 2 Re z/(1+|z|^2)``.

        ``X1`` is a first spherical harmonic, so ``i ddbar X1 = -2 X1 omega_FS``
        and the density is ``(k - 2 eps X1)/(1+|z|^2)^2`` in either chart.
        """
        if not abs(eps) < k / 2:
            raise MetricError("need |eps| < k/2 for positivity")

        def w(z):
            r2 = np.abs(z) ** 2
            return k * np.log1p(r2) + eps * 2.0 * z.real / (1.0 + r2)

        def g(z):
            r2 = np.abs(z) ** 2
            return (k - 2.0 * eps * 2.0 * z.real / (1.0 + r2)) / (1.0 + r2) ** 2

        return cls(k, w, w, g, g, name=f"fs_harmonic({eps})")

    def weight(self, z: np.ndarray, chart: int = 0) -> np.ndarray:
        return self.w0(z) if chart == 0 else self.w1(z)

    def density(self, z: np.ndarray, chart: int = 0) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        dens = self.density0 if chart == 0 else self.density1
        if dens is not None:
            return np.asarray(dens(z), dtype=float)
        return np.real(_fd_laplacian(self.w0 if chart == 0 else self.w1, z))

    def transition_residual(self, n: int = 64, radius: float = 1.0) -> float:
        """Max violation of the O(k) weight law on a circle in the overlap."""
        w = radius * np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)
        lhs = self.w1(w)
        rhs = self.w0(1.0 / w) + self.k * np.log(np.abs(w) ** 2)
        return float(np.max(np.abs(lhs - rhs)))


Metric = ToricPotential | FiberMetric


# ---------------------------------------------------------------------------
# Kahler data


@dataclass(frozen=True)
class KahlerData:
    density: np.ndarray
    scalar_curvature: np.ndarray
    volume: float


def _chart_split(z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    inner = np.abs(z) <= 1.0
    return z, inner


def kahler_density(m: Metric, z, chart: int = 0) -> np.ndarray:
    """Coefficient ``g`` of ``omega = i g dz ^ dzbar`` at chart points ``z``.

    For ``chart=1`` the points are ``w = 1/z`` and ``g`` is the chart-1
    coefficient.  Raises ``MetricError`` if any density is non-positive.
    """
    z = np.asarray(z, dtype=complex)
    if isinstance(m, ToricPotential):
        prof = m if chart == 0 else m.reflected()
        x = np.maximum(np.log(np.abs(z) ** 2 + 1e-300), _X_FLOOR)
        d2 = prof.deriv(x, 2)
        if np.any(d2 <= 0):
            raise MetricError("non-positive Kahler density")
        g = np.exp(np.log(d2) - x)
    else:
        g = m.density(z, chart)
        if np.any(g <= 0):
            raise MetricError("non-positive Kahler density")
    return g


def toric_scalar_curvature(tp: ToricPotential, x) -> np.ndarray:
    """``S(x) = -(log phi'')'' / phi''`` for a toric profile."""
    d2, d3, d4 = (tp.deriv(x, n) for n in (2, 3, 4))
    r = d3 / d2
    return -(d4 / d2 - r * r) / d2


def scalar_curvature(m: Metric, z, chart: int = 0) -> np.ndarray:
    """Scalar curvature ``-(1/g) d_z d_zbar log g``; Fubini-Study gives ``2/k``."""
    z = np.asarray(z, dtype=complex)
    if isinstance(m, ToricPotential):
        prof = m if chart == 0 else m.reflected()
        # S is smooth at the poles; beyond |x| = 25 the formula only loses digits.
        x = np.clip(np.log(np.abs(z) ** 2 + 1e-300), -25.0, 25.0)
        return toric_scalar_curvature(prof, x)
    g = kahler_density(m, z, chart)
    lap = np.real(_fd_laplacian(lambda q: np.log(m.density(q, chart)), z))
    return -lap / g


def volume(m: Metric, rtol: float = 1e-10) -> float:
    """Total mass of ``omega`` over the sphere (``2 pi k`` for every metric)."""
    if isinstance(m, ToricPotential):
        val, _ = refine(lambda r: np.atleast_1d(r.integrate(m.deriv(r.nodes, 2))),
                        PanelRule(-INTEGRATION_HALF_WIDTH, INTEGRATION_HALF_WIDTH, 90), rtol=rtol)
        return float(2.0 * np.pi * val[0])

    def ev(rule: DiscRule):
        tot = sum(np.sum(2.0 * rule.weights * m.density(rule.points, c)) for c in (0, 1))
        return np.atleast_1d(tot)

    rule = DiscRule(4, 16, 32)
    old = ev(rule)
    for _ in range(5):
        rule = rule.refined()
        new = ev(rule)
        if abs(new[0] - old[0]) <= rtol * abs(new[0]):
            return float(new[0])
        old = new
    raise QuadratureError("volume quadrature did not converge")


def integrate_over_fiber(m: Metric, f: Callable, rtol: float = 1e-10) -> float:
    """``int f omega`` where ``f`` takes chart-0 points ``z`` (or ``x`` for toric)."""
    if isinstance(m, ToricPotential):
        val, _ = refine(lambda r: np.atleast_1d(r.integrate(f(r.nodes) * m.deriv(r.nodes, 2))),
                        PanelRule(-INTEGRATION_HALF_WIDTH, INTEGRATION_HALF_WIDTH, 90), rtol=rtol, atol=1e-14)
        return float(2.0 * np.pi * val[0])
    rule = DiscRule(8, 16, 128)
    z1 = rule.points
    inv = np.where(np.abs(z1) > 0, 1.0 / np.where(z1 == 0, 1, z1), 1e300)
    tot = np.sum(2.0 * rule.weights * m.density(z1, 0) * f(z1))
    tot += np.sum(2.0 * rule.weights * m.density(z1, 1) * f(inv))
    return float(tot)


def kahler_data(m: Metric, z) -> KahlerData:
    return KahlerData(kahler_density(m, z), scalar_curvature(m, z), volume(m))


# ---------------------------------------------------------------------------
# positivity


class PositivityCheck(NamedTuple):
    positive: bool
    margin: float


def check_positivity(m: Metric, n_theta: int = 32) -> PositivityCheck:
    """Scan the Kahler density and report its minimum.

    Toric profiles are scanned on their x-grid; two-chart metrics on a polar
    grid covering both unit discs.
    """
    try:
        if isinstance(m, ToricPotential):
            x = m.grid
            g = m.deriv(x, 2) * np.exp(-x)
        else:
            rule = DiscRule(4, 8, n_theta)
            g = np.concatenate([m.density(rule.points, c) for c in (0, 1)])
    except FloatingPointError:  # pragma: no cover
        return PositivityCheck(False, -math.inf)
    margin = float(np.min(g))
    return PositivityCheck(bool(margin > 0 and np.all(np.isfinite(g))), margin)


# ---------------------------------------------------------------------------
# Legendre duality


def _newton_increasing(f, fprime, lo, hi, x, tol=1e-14, maxiter=200):
    """Vectorised safeguarded Newton for increasing ``f`` bracketed by ``[lo, hi]``."""
    lo, hi, x = (np.array(a, dtype=float, copy=True) for a in np.broadcast_arrays(lo, hi, x))
    x = np.clip(x, lo, hi)
    for _ in range(maxiter):
        fx = f(x)
        lo = np.where(fx < 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        step = fx / fprime(x)
        xn = x - step
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= tol * (1.0 + np.abs(x))
        x = xn
        if np.all(done | (hi - lo <= tol * (1.0 + np.abs(x)))):
            return x
    return x


def slope_inverse(tp: ToricPotential, y) -> np.ndarray:
    """Solve ``phi'(x) = y`` for ``y`` in ``(0, k)``.

    Newton runs on ``log phi'(x) - log y``, which is close to linear in the
    left tail, with a bisection fallback.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(y >= tp.k):
        raise MetricError(f"slope outside (0, {tp.k})")
    ly = np.log(y)
    guess = np.log(y) - np.log(tp.k - y)
    lo = guess - 1.0
    hi = guess + 1.0
    for _ in range(80):
        low_bad = np.log(np.maximum(tp.deriv(lo, 1), 1e-320)) > ly
        high_bad = np.log(np.maximum(tp.deriv(hi, 1), 1e-320)) < ly
        if not (low_bad.any() or high_bad.any()):
            break
        lo = np.where(low_bad, lo - 2.0 * (hi - lo), lo)
        hi = np.where(high_bad, hi + 2.0 * (hi - lo), hi)
        if np.any(np.abs(lo) > 745) or np.any(np.abs(hi) > 745):
            raise MetricError("slope not attained within representable x")
    return _newton_increasing(lambda x: np.log(tp.deriv(x, 1)) - ly,
                              lambda x: tp.deriv(x, 2) / tp.deriv(x, 1), lo, hi, guess)


@dataclass(frozen=True)
class DualPotential:
    """Legendre dual ``u(y) = sup_x (x y - phi(x))`` on ``(0, k)``."""

    primal: ToricPotential

    @property
    def k(self):
        return self.primal.k

    def argmax(self, y) -> np.ndarray:
        """The maximising ``x``, i.e. ``u'(y)``."""
        return slope_inverse(self.primal, y)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        x = self.argmax(y)
        return x * y - self.primal(x)

    def grad(self, y) -> np.ndarray:
        return self.argmax(y)

    def hess(self, y) -> np.ndarray:
        return 1.0 / self.primal.deriv(self.argmax(y), 2)


def legendre_transform(tp: ToricPotential) -> DualPotential:
    """Dual potential of a strictly convex profile."""
    check = check_positivity(tp)
    if not check.positive:
        raise MetricError("Legendre transform needs a strictly convex profile")
    return DualPotential(tp)


# ---------------------------------------------------------------------------
# named presets

_PRESET = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")
_PRESET_ARITY = {"fs": (0, 0), "fs_bump": (1, 3), "fs_shift": (1, 1), "pullback_scaling": (1, 1),
                 "fs_poly": (1, 12)}


def preset(spec: str, k: int = 1) -> ToricPotential:
    """Metric from a preset string.

    Accepted forms are ``"fs"``, ``"fs_bump(eps[, x0[, width]])"``,
    ``"fs_shift(c)"``, ``"pullback_scaling(a)"`` (``phi_FS(x + a)``),
    ``"fs_poly(c0, c1, ...)"`` (adds a polynomial in ``|z|^2/(1+|z|^2)``)
    and ``"csv:<path>"`` for a two-column ``(x, phi)`` profile.
    """
    if spec.startswith("csv:"):
        return ToricPotential.from_csv(spec[4:], k)
    m = _PRESET.match(spec)
    if m is None or m.group(1) not in _PRESET_ARITY:
        raise MetricError(f"unknown metric preset {spec!r}")
    name, body = m.group(1), m.group(2)
    try:
        args = [float(a) for a in body.split(",")] if body and body.strip() else []
    except ValueError as exc:
        raise MetricError(f"bad arguments in preset {spec!r}") from exc
    lo, hi = _PRESET_ARITY[name]
    if not lo <= len(args) <= hi:
        raise MetricError(f"preset {name!r} takes {lo}..{hi} arguments, got {len(args)}")
    fs = ToricPotential.fubini_study(k)
    if name == "fs":
        return fs
    if name == "fs_bump":
        return fs.with_bump(*args)
    if name == "fs_shift":
        return fs.shifted(args[0])
    if name == "pullback_scaling":
        return fs.translated(args[0])
    return fs.with_poly(args)
