"""Curvature of the direct-image bundles along a path of fiber metrics.

For a path ``phi(t) = phi0 + psi(t)`` and level ``p`` the E-type bundle has
fibers ``H^0(O(pk) (x) K)`` with norms ``int [u, u] e^{-p phi(t)}`` and the
F-type bundle has fibers ``H^0(O(pk))`` with ``int |u|^2 e^{-p phi(t)} omega_t``.
With ``G_jk = <u_k, u_j>`` in a holomorphic frame the curvature quadratic
form is

    Q = G_tbar G^{-1} G_t - G_{t tbar},        Theta = G^{-1} Q,

where the t-derivatives are taken inside the integrals.  At level ``p`` the
E-type form splits as

    Q = int p c(phi) [u, u] e^{-p phi}  +  A(p psi_t, u),

with ``c(phi) = psi_tt - |dbar psi_t|^2_omega`` and

    A(mu, u) = (1/p) int |dbar mu|^2_omega [u, u] e^{-p phi} - ||mu u||^2 + ||Pi(mu u)||^2,

the Hormander term of the minimal solution of ``dbar v = dbar mu ^ u`` measured
with the Kahler form ``p omega`` of the weight ``p phi``.  ``Pi`` is the
orthogonal projection onto holomorphic sections.

All matrices are expressed in the rescaled monomial frame
``u_j exp(-log_scale_j)`` of the Gram matrix at ``t``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .geometry import (FiberMetric, Metric, MetricError, ToricPotential, _fd_laplacian, fd_dzbar, kahler_density,
                       volume)
from .paths import FiberPath, MetricPath, ToricPath
from .quadrature import DiscRule, PanelRule, refine
from .spectra import DEFAULT_RTOL, DensePairing, SectionSpace, ToricPairing

INTEGRATION_RULE = PanelRule(-45.0, 45.0, 180, 16)


# ---------------------------------------------------------------------------
# nodal data


@dataclass
class _Nodal:
    """Pairing plus integrand ingredients sampled at its nodes."""

    pairing: ToricPairing | DensePairing
    psi_t: np.ndarray
    psi_tt: np.ndarray
    grad2: np.ndarray                 # |dbar psi_t|^2_omega
    gamma: np.ndarray | None = None   # (d_t g) / g
    gamma_tt: np.ndarray | None = None  # (d_t d_tbar g) / g

    @property
    def c(self) -> np.ndarray:
        return np.real(self.psi_tt) - self.grad2


def _chart_local(pairing: DensePairing, f: Callable, op: Callable) -> np.ndarray:
    """Apply a chart-local difference operator to a function of chart-0 ``z``."""
    out = np.empty(pairing.local.size, dtype=complex)
    c0 = pairing.chart == 0
    out[c0] = op(f, pairing.local[c0])
    out[~c0] = op(lambda w: f(1.0 / w), pairing.local[~c0])
    return out


def _nodal(path: MetricPath, p: int, t, twist: str, dense: bool, rtol: float) -> _Nodal:
    space = SectionSpace(path.k, p, twist)
    if isinstance(path, ToricPath) and not dense:
        def logd(x):
            return np.log(path.phi(t, x, 2))

        pr = ToricPairing.build(space, lambda x: path.phi(t, x, 0), logd if twist == "none" else None, rtol)
        x = pr.x
        d2 = path.phi(t, x, 2)
        nod = _Nodal(pr, path.psi_t(t, x, 0) + 0j, path.psi_tt(t, x, 0) + 0j,
                     np.abs(path.psi_t(t, x, 1)) ** 2 / d2)
        if twist == "none":
            nod.gamma = path.psi_t(t, x, 2) / d2
            nod.gamma_tt = np.real(path.psi_tt(t, x, 2)) / d2
        return nod
    fpath = path.as_fiber_path() if isinstance(path, ToricPath) else path
    pr = DensePairing.build(space, fpath.metric_at(t), rtol)
    z = pr.z
    f_t = lambda q: fpath.psi_t(t, q)
    nod = _Nodal(pr, f_t(z) + 0j, fpath.psi_tt(t, z) + 0j, pr.grad_norm2(f_t))
    if twist == "none":
        nod.gamma = _chart_local(pr, f_t, _fd_laplacian) / pr.density
        nod.gamma_tt = np.real(_chart_local(pr, lambda q: fpath.psi_tt(t, q), _fd_laplacian)) / pr.density
    return nod


def _herm(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def _quad_form(G: np.ndarray, P: np.ndarray) -> np.ndarray:
    """``P^H G^{-1} P`` via Cholesky."""
    L = linalg.cholesky(G, lower=True)
    Y = linalg.solve_triangular(L, P, lower=True)
    return _herm(Y.conj().T @ Y)


def _gen_eigvals(M: np.ndarray, G: np.ndarray) -> np.ndarray:
    return linalg.eigh(_herm(M), _herm(G), eigvals_only=True)


# ---------------------------------------------------------------------------
# geodesic curvature and complex gradients


def c_geodesic(path: MetricPath, t, z) -> np.ndarray:
    """``c(phi) = psi_tt - |dbar psi_t|^2_omega`` at chart-0 points ``z``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if isinstance(path, ToricPath):
        x = np.log(np.abs(z) ** 2 + 1e-300)
        return c_geodesic_x(path, t, x)
    m = path.metric_at(t)
    g = kahler_density(m, z)
    grad = fd_dzbar(lambda q: path.psi_t(t, q), z)
    return np.real(path.psi_tt(t, z)) - np.abs(grad) ** 2 / g


def c_geodesic_x(path: ToricPath, t, x) -> np.ndarray:
    """Toric form: ``psi_tt - |psi_t'|^2 / phi''`` as a function of ``x``."""
    x = np.asarray(x, dtype=float)
    d2 = path.phi(t, x, 2)
    if np.any(d2 <= 0):
        raise MetricError("fiber metric not positive at this t")
    return np.real(path.psi_tt(t, x, 0)) - np.abs(path.psi_t(t, x, 1)) ** 2 / d2


@dataclass
class VectorFieldData:
    """Complex gradient ``V = V^z d/dz`` of a fiber function, sampled at ``z``.

    ``V`` is defined by ``delta_V omega = dbar mu``; with ``omega = i g dz ^ dzbar``
    this is ``V^z = -i mu_zbar / g``.
    """

    z: np.ndarray
    Vz: np.ndarray
    norm2: np.ndarray        # |V|^2_omega = g |V^z|^2
    dbar_norm2: np.ndarray   # |dbar V|^2 = |d V^z / d zbar|^2
    residual: float          # max |i g V^z - mu_zbar|, mu_zbar by finite differences


def _default_points(n: int = 24, seed: int = 7) -> np.ndarray:
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(np.log(0.05), np.log(1.0), n))
    return r * np.exp(2j * np.pi * rng.uniform(size=n))


def _toric_dbarV2(m: ToricPotential, mu: Callable, x: np.ndarray) -> np.ndarray:
    """``|dbar V|^2 = h'^2`` with ``h = mu'/phi''`` (V^z = -i z h)."""
    d2, d3 = m.deriv(x, 2), m.deriv(x, 3)
    m1, m2 = mu(x, 1), mu(x, 2)
    return ((m2 * d2 - m1 * d3) / d2**2) ** 2


def _dense_dbarV2(metric: FiberMetric, mu: Callable, z: np.ndarray, chart: int = 0) -> np.ndarray:
    f = mu if chart == 0 else (lambda w: mu(1.0 / w))

    def Vz(q):
        return -1j * fd_dzbar(f, q) / metric.density(q, chart)

    return np.abs(fd_dzbar(Vz, z)) ** 2


def complex_gradient(m: Metric, mu: Callable, z=None, chart: int = 0) -> VectorFieldData:
    """Complex gradient of ``mu`` with respect to ``omega``.

    ``mu`` is ``mu(x, n)`` for a toric metric and ``mu(z)`` otherwise; ``z``
    are chart points (default: a fixed random sample in the unit disc).
    """
    z = _default_points() if z is None else np.atleast_1d(np.asarray(z, dtype=complex))
    g = kahler_density(m, z, chart)
    if isinstance(m, ToricPotential):
        prof = m if chart == 0 else m.reflected()
        f = (lambda x, n=0: mu(-x, n) * (-1.0) ** n) if chart == 1 else mu
        x = np.log(np.abs(z) ** 2)
        h = f(x, 1) / prof.deriv(x, 2)
        Vz = -1j * z * h
        dbar2 = _toric_dbarV2(prof, f, x)
        point = lambda q: f(np.log(np.abs(q) ** 2), 0)
    else:
        point = mu if chart == 0 else (lambda w: mu(1.0 / w))
        Vz = -1j * fd_dzbar(point, z) / g
        dbar2 = _dense_dbarV2(m, mu, z, chart)
    res = float(np.max(np.abs(1j * g * Vz - fd_dzbar(point, z))))
    return VectorFieldData(z, Vz, g * np.abs(Vz) ** 2, dbar2, res)


def dbarV_integral(m: Metric, mu: Callable, rtol: float = 1e-10) -> float:
    """``int |dbar V_mu|^2 omega`` over the fiber."""
    if isinstance(m, ToricPotential):
        val, _ = refine(lambda r: np.atleast_1d(r.integrate(_toric_dbarV2(m, mu, r.nodes) * m.deriv(r.nodes, 2))),
                        PanelRule(-45.0, 45.0, 90), rtol=rtol, atol=1e-14)
        return float(2.0 * np.pi * val[0])
    rule = DiscRule(8, 16, 64)
    pts = rule.points
    return float(sum(np.sum(2.0 * rule.weights * m.density(pts, c) * _dense_dbarV2(m, mu, pts, c)) for c in (0, 1)))


# ---------------------------------------------------------------------------
# the A-form


@dataclass
class AForm:
    """``A(mu, .)`` at level ``p`` as a Hermitian matrix in the rescaled frame.

    ``bound`` is ``int |dbar V_mu|^2 [u, u] e^{-p phi}`` and ``sharp_bound`` the
    same with ``V`` taken relative to ``p omega`` (smaller by ``p^2``).
    """

    p: int
    matrix: np.ndarray
    gram: np.ndarray
    log_scale: np.ndarray
    bound: np.ndarray
    sharp_bound: np.ndarray
    terms: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)

    def _scaled(self, u) -> np.ndarray:
        return np.asarray(u, dtype=complex) * np.exp(self.log_scale)

    def value(self, u) -> float:
        """``A(mu, u)`` for monomial-frame coefficients ``u``."""
        b = self._scaled(u)
        return float(np.real(b.conj() @ self.matrix @ b))

    def bound_value(self, u, sharp: bool = False) -> float:
        b = self._scaled(u)
        M = self.sharp_bound if sharp else self.bound
        return float(np.real(b.conj() @ M @ b))

    def norm2(self, u) -> float:
        b = self._scaled(u)
        return float(np.real(b.conj() @ self.gram @ b))

    def trace(self) -> float:
        """``tr A`` over a G-orthonormal basis."""
        return float(np.real(np.trace(linalg.solve(self.gram, self.matrix, assume_a="pos"))))

    def eigenvalues(self) -> np.ndarray:
        return _gen_eigvals(self.matrix, self.gram)


def _a_matrices(pr, p: int, mu_vals, grad2, dbarV2):
    G = pr.pair(np.ones(mu_vals.shape))
    first = pr.pair(grad2 / p)
    second = pr.pair(np.abs(mu_vals) ** 2)
    P = pr.pair(mu_vals)
    third = _quad_form(G, P)
    A = _herm(first - second + third)
    return G, A, (first, second, third), pr.pair(dbarV2), pr.pair(dbarV2 / p**2)


def A_form(m: Metric, p: int, mu: Callable, dense: bool = False, rtol: float = DEFAULT_RTOL) -> AForm:
    """Assemble ``A(mu, .)`` on E-type sections at level ``p``.

    Uses the particular solution ``v0 = mu u`` of ``dbar v = dbar mu ^ u``;
    the minimal solution is ``v0 - Pi v0``.
    """
    space = SectionSpace(m.k, p, "canonical")
    if isinstance(m, ToricPotential) and not dense:
        pr = ToricPairing.build(space, lambda x: m(x), None, rtol)
        x = pr.x
        muv = mu(x, 0) + 0j
        grad2 = mu(x, 1) ** 2 / m.deriv(x, 2)
        dv2 = _toric_dbarV2(m, mu, x)
    else:
        if isinstance(m, ToricPotential):
            tor_mu = mu
            mu = lambda q: tor_mu(np.log(np.abs(q) ** 2 + 1e-300), 0)
            m = FiberMetric.from_toric(m)
        pr = DensePairing.build(space, m, rtol)
        muv = mu(pr.z) + 0j
        grad2 = pr.grad_norm2(mu)
        dv2 = np.concatenate([_dense_dbarV2(m, mu, pr.local[pr.chart == c], c) for c in (0, 1)])
    G, A, terms, bound, sharp = _a_matrices(pr, p, muv, grad2, dv2)
    return AForm(p, A, G, pr.log_scale, bound, sharp, terms)


# ---------------------------------------------------------------------------
# curvature


@dataclass
class CurvatureReport:
    """Curvature of a direct-image bundle at one ``(p, t)``.

    Matrices are Hermitian forms in the rescaled monomial frame (see
    ``log_scale``); ``gram`` is the metric in that frame and eigenvalues are
    those of the G-selfadjoint operator ``G^{-1} Q``.
    """

    kind: str
    p: int
    t: complex
    gram: np.ndarray
    log_scale: np.ndarray
    Q: np.ndarray
    first_term: np.ndarray
    second_term: np.ndarray
    residual: float
    eigenvalues: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(linalg.solve(self.gram, self.Q, assume_a="pos"))))

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def operator_norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def excess_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``G^{-1}(Q - second_term)``; meaningful for F-type bounds."""
        return _gen_eigvals(self.Q - self.second_term, self.gram)

    def to_dict(self) -> dict:
        def cm(M):
            return {"real": np.real(M).tolist(), "imag": np.imag(M).tolist()}

        return {"kind": self.kind, "p": self.p, "t": [complex(self.t).real, complex(self.t).imag],
                "dim": self.dim, "trace": self.trace, "min_eigenvalue": self.min_eigenvalue,
                "max_eigenvalue": self.max_eigenvalue, "residual": self.residual,
                "eigenvalues": self.eigenvalues.tolist(), "log_scale": self.log_scale.tolist(),
                "Q": cm(self.Q), "first_term": cm(self.first_term), "second_term": cm(self.second_term),
                "frame": "monomials rescaled by exp(-log_scale)"}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def _g_derivs_fd(path: MetricPath, p: int, t, twist: str, dense: bool, rtol: float, h: float):
    """``G``, ``G_t``, ``G_{t tbar}`` by centred differences in ``t`` on a frozen frame."""
    t = complex(t)

    def gram(tt):
        nod = _nodal(path, p, tt, twist, dense, rtol)
        return nod.pairing.gram().matrix()

    G0 = gram(t)
    ga = (gram(t + h) - gram(t - h)) / (2 * h)
    gb = (gram(t + 1j * h) - gram(t - 1j * h)) / (2 * h)
    lap = (gram(t + h) + gram(t - h) + gram(t + 1j * h) + gram(t - 1j * h) - 4 * G0) / (h * h)
    return G0, 0.5 * (ga - 1j * gb), 0.25 * lap


def curvature_E(path: MetricPath, p: int, t=0.0, dense: bool = False, rtol: float = DEFAULT_RTOL,
                mode: str = "analytic", h: float = 1e-3) -> CurvatureReport:
    """Curvature of the E-type direct image at level ``p`` and parameter ``t``.

    ``first_term`` is ``int p c(phi) [u, u] e^{-p phi}`` and ``second_term`` is
    ``A(p psi_t, .)``; ``residual`` is ``||Q - first - second|| / ||Q||``.
    ``mode="fd"`` differentiates the Gram matrix in ``t`` numerically instead
    (a cross-check; it uses the unscaled frame and so needs small ``p``).
    """
    nod = _nodal(path, p, t, "canonical", dense, rtol)
    pr = nod.pairing
    one = np.ones(nod.psi_t.shape)
    G = pr.pair(one)
    mu = p * nod.psi_t
    if mode == "analytic":
        Gt = pr.pair(-mu)
        Gtt = pr.pair(np.abs(mu) ** 2 - p * np.real(nod.psi_tt))
        Q = _herm(_quad_form(G, Gt) - Gtt)
    elif mode == "fd":
        G0, Gt, Gtt = _g_derivs_fd(path, p, t, "canonical", dense, rtol, h)
        s = np.exp(-pr.log_scale)
        Gt, Gtt, G0 = (s[:, None] * M * s[None, :] for M in (Gt, Gtt, G0))
        Q = _herm(_quad_form(G0, Gt) - Gtt)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    first = pr.pair(p * nod.c)
    _, A, _, _, _ = _a_matrices(pr, p, mu, p * p * nod.grad2, np.zeros(one.shape))
    second = A
    resid = float(np.linalg.norm(Q - first - second) / max(np.linalg.norm(Q), 1e-300))
    return CurvatureReport("E", p, complex(t), G, pr.log_scale, Q, first, second, resid, _gen_eigvals(Q, G))


def curvature_F(path: MetricPath, p: int, t=0.0, dense: bool = False, rtol: float = DEFAULT_RTOL,
                mode: str = "analytic", h: float = 1e-3) -> CurvatureReport:
    """Curvature of the F-type direct image, with the bound ``2 int |u|^2 p c(phi) e^{-p phi} omega``.

    The volume form depends on ``t``, so ``d_t`` brings down ``-p psi_t + g_t/g``.
    ``first_term`` holds ``Q`` itself and ``second_term`` the bound; ``residual``
    is the largest eigenvalue of ``G^{-1}(Q - bound)`` (at most zero when the
    bound holds).
    """
    nod = _nodal(path, p, t, "none", dense, rtol)
    pr = nod.pairing
    one = np.ones(nod.psi_t.shape)
    G = pr.pair(one)
    if mode == "analytic":
        a = -p * nod.psi_t + nod.gamma
        Gt = pr.pair(a)
        w = (p * p * np.abs(nod.psi_t) ** 2 - 2 * p * np.real(np.conj(nod.psi_t) * nod.gamma)
             - p * np.real(nod.psi_tt) + nod.gamma_tt)
        Gtt = pr.pair(w)
        Q = _herm(_quad_form(G, Gt) - Gtt)
    elif mode == "fd":
        G0, Gt, Gtt = _g_derivs_fd(path, p, t, "none", dense, rtol, h)
        s = np.exp(-pr.log_scale)
        Gt, Gtt, G0 = (s[:, None] * M * s[None, :] for M in (Gt, Gtt, G0))
        Q = _herm(_quad_form(G0, Gt) - Gtt)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    bound = pr.pair(2.0 * p * nod.c)
    excess = float(_gen_eigvals(Q - bound, G)[-1])
    return CurvatureReport("F", p, complex(t), G, pr.log_scale, Q, Q, bound, excess, _gen_eigvals(Q, G))


# ---------------------------------------------------------------------------
# large-p asymptotics


@dataclass
class AsymptoticsRow:
    p: int
    measured: float
    predicted: float
    residual: float


@dataclass
class AsymptoticsTable:
    """Rows ``(p, measured, predicted, residual)`` plus the predicted pieces."""

    rows: list[AsymptoticsRow]
    c_integral: float
    s_term: float
    grad_term: float
    volume: float

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "measured", "predicted", "residual"])
            for r in self.rows:
                w.writerow([r.p, repr(r.measured), repr(r.predicted), repr(r.residual)])

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "c_integral": self.c_integral,
                "s_term": self.s_term, "grad_term": self.grad_term, "volume": self.volume}


# Coefficient of int c (S - S_hat) omega in the subleading trace term under
# our normalisation of omega and S (fixed by the Bergman expansion of the
# density, rho = p/(2 pi) - S/(4 pi) + O(1/p)).
S_TERM_COEFFICIENT = -0.5


def _toric_integral(f: Callable[[np.ndarray], np.ndarray], rtol: float = 1e-10) -> float:
    """``2 pi int f dx`` (f already includes the ``phi''`` factor)."""
    val, _ = refine(lambda r: np.atleast_1d(r.integrate(f(r.nodes))), PanelRule(-45.0, 45.0, 90),
                    rtol=rtol, atol=1e-14)
    return float(2.0 * np.pi * val[0])


def predicted_trace_terms(path: ToricPath, t) -> tuple[float, float, float, float]:
    """``(int c omega, int c (S - S_hat) omega, int |dbar V_{psi_t}|^2 omega, Vol)`` at ``t``."""
    if not isinstance(path, ToricPath):
        raise TypeError("predicted terms are implemented for toric paths")
    m = path.metric_at(t)
    vol = 2.0 * np.pi * m.k
    s_hat = 4.0 * np.pi / vol

    def c_dens(x):
        return c_geodesic_x(path, t, x) * m.deriv(x, 2)

    def s_dens(x):
        d2, d3, d4 = (m.deriv(x, n) for n in (2, 3, 4))
        S_d2 = -(d4 / d2 - (d3 / d2) ** 2)      # S * phi'', stable in the tails
        return c_geodesic_x(path, t, x) * (S_d2 - s_hat * d2)

    def v_dens(x):
        re = lambda y, n=0: np.real(path.psi_t(t, y, n))
        im = lambda y, n=0: np.imag(path.psi_t(t, y, n))
        return (_toric_dbarV2(m, re, x) + _toric_dbarV2(m, im, x)) * m.deriv(x, 2)

    return _toric_integral(c_dens), _toric_integral(s_dens), _toric_integral(v_dens), vol


def trace_asymptotics(path: MetricPath, t, p_list: Sequence[int], dense: bool = False,
                      rtol: float = DEFAULT_RTOL, grad_coefficient: float = 1.0) -> AsymptoticsTable:
    """``tr Theta^p / d_p`` against ``(p int c + b int c (S - S_hat) + a int |dbar V|^2) / Vol``.

    ``b = S_TERM_COEFFICIENT`` and ``a = grad_coefficient``.  Measured traces
    follow ``a = 1/2``; the default keeps the stated coefficient ``1``.
    """
    ci, si, vi, vol = predicted_trace_terms(path, t)
    rows = []
    for p in p_list:
        rep = curvature_E(path, p, t, dense=dense, rtol=rtol)
        meas = rep.trace / rep.dim
        pred = (p * ci + S_TERM_COEFFICIENT * si + grad_coefficient * vi) / vol
        rows.append(AsymptoticsRow(int(p), meas, pred, meas - pred))
    return AsymptoticsTable(rows, ci, si, vi, vol)


def trace_A_limit(m: Metric, mu: Callable, p_list: Sequence[int], dense: bool = False,
                  rtol: float = DEFAULT_RTOL) -> tuple[np.ndarray, float]:
    """``tr A_p(p mu, .) / d_p`` for each ``p`` and the limit ``int |dbar V_mu|^2 omega / Vol``."""
    if isinstance(m, ToricPotential):
        pmu = lambda p: (lambda x, n=0: p * mu(x, n))
    else:
        pmu = lambda p: (lambda z: p * mu(z))
    vals = []
    for p in p_list:
        af = A_form(m, p, pmu(p), dense=dense, rtol=rtol)
        vals.append(af.trace() / af.gram.shape[0])
    limit = dbarV_integral(m, mu) / volume(m)
    return np.array(vals), limit
