"""Geodesics between toric metrics and their Bergman-kernel approximations.

``GeodesicOracle``
    the geodesic between two toric profiles, obtained by interpolating the
    Legendre duals linearly, ``u_s = (1 - s) u0 + s u1``, and transforming
    back.  It satisfies the homogeneous Monge-Ampere equation
    ``phi_ss phi'' = (phi_s')^2`` exactly; the implementation certifies this
    numerically.

``FlatHermitianCurve``
    the geodesic ``H_s`` between two Hilbert norms on sections, diagonal
    ``exp(2 lam_j s)`` in a simultaneously diagonalising basis.

``bergman_geodesic``
    ``phi_(p)(s) = (log B_s - chi) / p`` with ``B_s`` the Bergman kernel of
    ``H_s`` on ``H^0(O(pk) (x) K)`` and ``chi = -2 log(1 + |z|^2)`` the
    Fubini-Study weight on ``K``.

The parameter ``s`` plays the role of ``log|t|`` on an annulus.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .geometry import MetricError, ToricPotential, _newton_increasing, _Term, slope_inverse
from .paths import ToricPath, strip_path
from .spectra import DEFAULT_RTOL, GenEigen, HermitianForm, gen_eigen, gram_E, toric_log_bergman


class GeodesicError(RuntimeError):
    """The oracle failed its Monge-Ampere self-certification."""


def chi(x) -> np.ndarray:
    """Fubini-Study weight on the canonical bundle as a function of ``x = log|z|^2``."""
    x = np.asarray(x, dtype=float)
    return -2.0 * np.logaddexp(0.0, x)


def _fd1(f, x, h=1e-3):
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def _fd2(f, x, h=1e-3):
    return (-f(x - 2 * h) + 16 * f(x - h) - 30 * f(x) + 16 * f(x + h) - f(x + 2 * h)) / (12 * h * h)


# ---------------------------------------------------------------------------
# Legendre-interpolation oracle


class _Side:
    """Solve the interpolated Legendre problem for ``x <= 0`` on a pair of profiles."""

    def __init__(self, p0: ToricPotential, p1: ToricPotential):
        self.p0, self.p1 = p0, p1

    def solve(self, s: float, x: np.ndarray) -> dict:
        p0, p1 = self.p0, self.p1
        if s == 0.0 or s == 1.0:
            prof = p0 if s == 0.0 else p1
            y = prof.deriv(x, 1)
            return {"x0": x, "x1": x, "y": y, "val": prof(x), "d2": prof.deriv(x, 2), "exact": prof}
        a, b = p0.deriv(x, 1), p1.deriv(x, 1)
        y_lo, y_hi = np.minimum(a, b), np.maximum(a, b)
        # one scalar unknown: the dual position on the nearer endpoint
        if s <= 0.5:
            u, w, r = p0, p1, (1 - s) / s
            other = lambda q: (x - (1 - s) * q) / s
        else:
            u, w, r = p1, p0, s / (1 - s)
            other = lambda q: (x - s * q) / (1 - s)
        lo, hi = slope_inverse(u, y_lo), slope_inverse(u, y_hi)

        def g(q):
            return np.log(u.deriv(q, 1)) - np.log(w.deriv(other(q), 1))

        def dg(q):
            o = other(q)
            return u.deriv(q, 2) / u.deriv(q, 1) + r * w.deriv(o, 2) / w.deriv(o, 1)

        q = _newton_increasing(g, dg, lo, hi, np.clip(x, lo, hi), tol=1e-15)
        q = np.where(y_hi - y_lo <= 1e-300, x, q)
        x0, x1 = (q, other(q)) if s <= 0.5 else (other(q), q)
        y = p0.deriv(x0, 1)
        d2 = 1.0 / ((1 - s) / p0.deriv(x0, 2) + s / p1.deriv(x1, 2))
        val = (1 - s) * p0(x0) + s * p1(x1)
        return {"x0": x0, "x1": x1, "y": y, "val": val, "d2": d2, "exact": None}

    def s_derivs(self, sol: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(phi_s, d_x phi_s, phi_ss)`` from the envelope formulas."""
        x0, x1, y, d2 = sol["x0"], sol["x1"], sol["y"], sol["d2"]
        if sol["exact"] is not None:
            # at an endpoint x0 = x1 = x; re-solve the dual positions for s-derivatives
            x0, x1 = slope_inverse(self.p0, y), slope_inverse(self.p1, y)
        dx = x1 - x0
        phi_s = -dx * y + self.p1(x1) - self.p0(x0)
        return phi_s, -dx * d2, dx * dx * d2


@dataclass
class GeodesicOracle:
    """Geodesic between two toric profiles of the same degree.

    ``residual`` is the measured ``sup |c(phi*)|`` over the certification
    grid, with ``c = (phi_ss - (phi_s')^2 / phi'') / 4`` and ``phi_ss`` taken
    by centred differences in ``s``.
    """

    phi0: ToricPotential
    phi1: ToricPotential
    residual: float = float("nan")
    _left: _Side = field(init=False, repr=False)
    _right: _Side = field(init=False, repr=False)

    def __post_init__(self):
        if self.phi0.k != self.phi1.k:
            raise MetricError("endpoints must have the same degree")
        self.phi0.validate()
        self.phi1.validate()
        self._left = _Side(self.phi0, self.phi1)
        self._right = _Side(self.phi0.reflected(), self.phi1.reflected())

    @property
    def k(self) -> int:
        return self.phi0.k

    def _eval(self, s: float, x, kind: str) -> np.ndarray:
        """Evaluate ``kind`` in {val, d1, d2, ps, ps1, pss} using the reflected side for ``x > 0``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for side, mask, sign in ((self._left, x <= 0, 1.0), (self._right, x > 0, -1.0)):
            if not mask.any():
                continue
            xs = sign * x[mask]
            sol = side.solve(float(s), xs)
            if kind == "val":
                v = sol["val"] + (0.0 if sign > 0 else self.k * x[mask])
            elif kind == "d1":
                v = sol["y"] if sign > 0 else self.k - sol["y"]
            elif kind == "d2":
                v = sol["d2"]
            else:
                ps, ps1, pss = side.s_derivs(sol)
                v = {"ps": ps, "ps1": sign * ps1, "pss": pss}[kind]
            out[mask] = v
        return out

    def profile(self, s: float, x, n: int = 0) -> np.ndarray:
        """n-th x-derivative of ``phi*_s`` (n <= 4; orders 3, 4 by differences of ``phi''``)."""
        if n <= 2:
            return self._eval(s, x, ("val", "d1", "d2")[n])
        f = lambda q: self._eval(s, q, "d2")
        return _fd1(f, np.asarray(x, dtype=float)) if n == 3 else _fd2(f, np.asarray(x, dtype=float))

    def phi_s(self, s: float, x, n: int = 0) -> np.ndarray:
        if n == 0:
            return self._eval(s, x, "ps")
        if n == 1:
            return self._eval(s, x, "ps1")
        return _fd1(lambda q: self._eval(s, q, "ps1"), np.asarray(x, dtype=float))

    def phi_ss(self, s: float, x, n: int = 0) -> np.ndarray:
        if n == 0:
            return self._eval(s, x, "pss")
        f = lambda q: self._eval(s, q, "pss")
        return _fd1(f, np.asarray(x, dtype=float)) if n == 1 else _fd2(f, np.asarray(x, dtype=float))

    def __call__(self, s: float, x) -> np.ndarray:
        return self.profile(s, x, 0)

    def metric(self, s: float) -> ToricPotential:
        """``phi*_s`` as a ``ToricPotential``."""
        if s == 0.0:
            return self.phi0
        if s == 1.0:
            return self.phi1
        return ToricPotential(self.k, _OracleTerm(self, float(s)), X=self.phi0.X, n_grid=self.phi0.grid.size,
                              name=f"geodesic@{s}", validate=False)

    def as_path(self) -> ToricPath:
        """The geodesic as a strip path with ``t = s + i(...)``."""
        return strip_path(self.phi0, self.phi_s, self.phi_ss, self.profile, name="geodesic")

    def c_residual(self, s_grid=None, x_grid=None, h: float = 1e-3) -> float:
        """``sup |c(phi*)|`` with ``phi_ss`` by centred differences in ``s``."""
        s_grid = np.linspace(0.05, 0.95, 19) if s_grid is None else np.asarray(s_grid)
        x_grid = np.linspace(-self.phi0.X, self.phi0.X, 401) if x_grid is None else np.asarray(x_grid)
        worst = 0.0
        for s in s_grid:
            pss = (self(s + h, x_grid) - 2 * self(s, x_grid) + self(s - h, x_grid)) / (h * h)
            c = 0.25 * (pss - self.phi_s(s, x_grid, 1) ** 2 / self.profile(s, x_grid, 2))
            worst = max(worst, float(np.max(np.abs(c))))
        return worst


class _OracleTerm(_Term):
    def __init__(self, oracle: GeodesicOracle, s: float):
        self.oracle, self.s = oracle, s

    @property
    def slope(self):
        return float(self.oracle.k)

    def deriv(self, x, n):
        return self.oracle.profile(self.s, x, n)


def toric_geodesic(phi0: ToricPotential, phi1: ToricPotential, tol: float = 1e-4, s_grid=None,
                   x_grid=None) -> GeodesicOracle:
    """Build and certify the Legendre-interpolation geodesic.

    Raises ``GeodesicError`` when the measured ``sup |c|`` exceeds ``tol``.
    """
    oracle = GeodesicOracle(phi0, phi1)
    oracle.residual = oracle.c_residual(s_grid, x_grid)
    if not oracle.residual < tol:
        raise GeodesicError(f"geodesic residual {oracle.residual:.3e} exceeds {tol:.1e}")
    return oracle


# ---------------------------------------------------------------------------
# flat Hermitian curves and Bergman geodesics


@dataclass
class FlatHermitianCurve:
    """``H_s`` with ``<v_j, v_k>_{H_s} = delta_jk exp(2 lam_j s)``.

    ``eig.vectors`` holds the basis ``v_j`` in the rescaled frame of ``G0``.
    """

    G0: HermitianForm
    G1: HermitianForm
    eig: GenEigen

    @property
    def lam(self) -> np.ndarray:
        return self.eig.lam

    def at(self, s: float) -> HermitianForm:
        """``H_s`` as a form in the rescaled frame of ``G0``."""
        V = self.eig.vectors
        Vinv = np.linalg.inv(V)
        core = Vinv.conj().T @ np.diag(np.exp(2 * self.lam * s)) @ Vinv
        return HermitianForm(self.G0.space, core, self.G0.log_scale)

    def log_diagonal_in_basis(self, s: float) -> np.ndarray:
        """``log <v_j, v_j>_{H_s} = 2 lam_j s``; affine in ``s`` by construction."""
        H = self.at(s)
        V = self.eig.vectors
        return np.log(np.real(np.einsum("ij,ik,kj->j", V.conj(), H.core, V)))

    def log_kernel(self, s: float, z, expo: np.ndarray | None = None) -> np.ndarray:
        """``log sum_j |v_j(z)|^2 exp(-2 lam_j s)`` at chart-0 points ``z``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        expo = self.G0.space.exponents if expo is None else expo
        a = np.log(np.abs(z))[:, None] * expo[None, :] - self.G0.log_scale[None, :]
        shift = np.max(a, axis=1, keepdims=True)
        mono = np.exp(a - shift) * np.exp(1j * np.angle(z)[:, None] * expo[None, :])
        vals = mono @ self.eig.vectors
        lw = 2 * np.log(np.abs(vals) + 1e-300) - 2 * self.lam[None, :] * s
        return 2 * shift[:, 0] + logsumexp(lw, axis=1)


def flat_curve(G0: HermitianForm, G1: HermitianForm) -> FlatHermitianCurve:
    return FlatHermitianCurve(G0, G1, gen_eigen(G0, G1))


def _toric_log_kernel(G0: HermitianForm, G1: HermitianForm, s: float, x: np.ndarray) -> np.ndarray:
    """``log B_s`` for diagonal endpoints: ``log sum_j e^{jx} / N_j(s)`` with ``log N_j`` affine in ``s``."""
    logN = (1 - s) * G0.log_diagonal + s * G1.log_diagonal
    return toric_log_bergman(logN, x)


def bergman_geodesic(phi0: ToricPotential, phi1: ToricPotential, p: int, s: float, x,
                     grams: tuple[HermitianForm, HermitianForm] | None = None,
                     rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """``phi_(p)(s, x) = (log B_s(x) - chi(x)) / p`` for toric endpoints.

    The kernel is that of ``H_s`` with ``H_0 = Hilb_p(phi0)`` and
    ``H_1 = Hilb_p(phi1)``; weights ``exp(-2 lam_j s)`` on the
    ``G0``-orthonormal eigenbasis reproduce ``Hilb_p(phi1)`` at ``s = 1``.
    """
    G0, G1 = grams if grams is not None else (gram_E(phi0, p, rtol=rtol), gram_E(phi1, p, rtol=rtol))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if G0.diagonal and G1.diagonal:
        logB = _toric_log_kernel(G0, G1, s, x)
    else:
        logB = flat_curve(G0, G1).log_kernel(s, np.exp(x / 2))
    return (logB - chi(x)) / p


def bergman_remainder(phi: ToricPotential, p: int, x, G: HermitianForm | None = None) -> np.ndarray:
    """``(log B_{p phi} - chi)/p - phi``: the level-p Bergman approximation error at one metric."""
    G = gram_E(phi, p) if G is None else G
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return (toric_log_bergman(G.log_diagonal, x) - chi(x)) / p - phi(x)


def default_s_grid() -> np.ndarray:
    return np.concatenate([[0.0], np.linspace(0.05, 0.95, 19), [1.0]])


def sup_distance(phi0: ToricPotential, phi1: ToricPotential, p: int, oracle: GeodesicOracle,
                 s_grid=None, x_grid=None) -> float:
    """``e(p) = sup |phi_(p)(s, x) - phi*_s(x)|`` over an ``(s, x)`` grid (default 21 x 401)."""
    s_grid = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    x_grid = np.linspace(-phi0.X, phi0.X, 401) if x_grid is None else np.asarray(x_grid, dtype=float)
    grams = (gram_E(phi0, p), gram_E(phi1, p))
    worst = 0.0
    for s in s_grid:
        d = bergman_geodesic(phi0, phi1, p, s, x_grid, grams) - oracle(s, x_grid)
        worst = max(worst, float(np.max(np.abs(d))))
    return worst


@dataclass
class DominationCheck:
    """``log B_s(p) - log B_{p phi*_s}`` on a grid; the inequality asks for ``>= -slack``."""

    s: np.ndarray
    min_log_gap: np.ndarray
    min_form_gap: np.ndarray

    def holds(self, slack: float = 1e-8) -> bool:
        return bool(np.all(self.min_log_gap >= -slack) and np.all(self.min_form_gap >= -slack))


def domination_check(oracle: GeodesicOracle, p: int, s_grid=None, x_grid=None) -> DominationCheck:
    """Compare the flat-curve kernel with the Bergman kernel of the geodesic.

    Also reports ``min_j (log N_j(phi*_s) - log N_j(H_s))``: the Hilbert norm
    of the geodesic dominates the flat curve as a (diagonal) form.
    """
    s_grid = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    x_grid = np.linspace(-oracle.phi0.X, oracle.phi0.X, 401) if x_grid is None else np.asarray(x_grid)
    G0, G1 = gram_E(oracle.phi0, p), gram_E(oracle.phi1, p)
    gaps, forms = [], []
    for s in s_grid:
        Gs = gram_E(oracle.metric(float(s)), p)
        lb = _toric_log_kernel(G0, G1, s, x_grid)
        lstar = toric_log_bergman(Gs.log_diagonal, x_grid)
        gaps.append(float(np.min(lb - lstar)))
        forms.append(float(np.min(Gs.log_diagonal - ((1 - s) * G0.log_diagonal + s * G1.log_diagonal))))
    return DominationCheck(np.asarray(s_grid), np.array(gaps), np.array(forms))


# ---------------------------------------------------------------------------
# rate fit


@dataclass
class RateFit:
    """Fit of ``e(p) <= C log p / p``.

    ``verdict`` is PASS when each successive ratio of ``e(p) p / log p`` over
    the upper half of ``p_list`` is at most ``1 + slack``.
    """

    p: np.ndarray
    e: np.ndarray
    normalized: np.ndarray
    C_hat: float
    argmax_p: int
    ratios: np.ndarray
    verdict: str

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "e": self.e.tolist(), "normalized": self.normalized.tolist(),
                "C_hat": self.C_hat, "argmax_p": self.argmax_p, "upper_half_ratios": self.ratios.tolist(),
                "verdict": self.verdict}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "e", "e_p_over_log_p"])
            for row in zip(self.p, self.e, self.normalized):
                w.writerow([int(row[0]), repr(float(row[1])), repr(float(row[2]))])


def rate_fit(p_list: Sequence[int], e_list: Sequence[float], slack: float = 0.2) -> RateFit:
    p = np.asarray(p_list, dtype=float)
    e = np.asarray(e_list, dtype=float)
    if p.size < 4 or p.size != e.size:
        raise ValueError("rate_fit needs at least 4 (p, e) pairs")
    if np.any(p <= 1) or np.any(np.diff(p) <= 0):
        raise ValueError("p_list must be increasing and > 1")
    if np.any(e <= 0):
        return RateFit(p, e, np.zeros_like(e), 0.0, int(p[0]), np.array([]), "PASS-trivial")
    norm = e * p / np.log(p)
    i = int(np.argmax(norm))
    upper = norm[p.size // 2:]
    ratios = upper[1:] / upper[:-1]
    verdict = "PASS" if np.all(ratios <= 1.0 + slack) else "FAIL"
    return RateFit(p, e, norm, float(norm[i]), int(p[i]), ratios, verdict)
