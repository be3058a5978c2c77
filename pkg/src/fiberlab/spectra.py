"""Section spaces, L2 Gram matrices, Bergman densities and generalized eigenproblems.

Sections are monomials in the chart-0 coordinate: ``z^j dz`` for the
canonically twisted space (``E``-type, sections of O(pk) (x) K) and ``z^j``
for the untwisted one (``F``-type, sections of O(pk)).  Norms are

    E:  ||u||^2 = int [u, u] e^{-p phi}
    F:  ||u||^2 = int |u|^2 e^{-p phi} omega

Gram matrices can span hundreds of orders of magnitude, so a
``HermitianForm`` stores ``G = D C D`` with ``D = diag(exp(log_scale))``
and a well-conditioned core ``C``.  For S^1-invariant weights ``C`` is the
identity and ``log_scale`` is half the log of the diagonal.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .geometry import (INTEGRATION_HALF_WIDTH, FiberMetric, Metric, MetricError, ToricPotential,
                       kahler_density)
from .quadrature import DiscRule, PanelRule, QuadratureError

Twist = Literal["canonical", "none"]
MAX_DENSE_PK = 32
LAMBDA_SPREAD_CAP = 700.0
DEFAULT_RTOL = 1e-10


class NotHilbertNormError(linalg.LinAlgError):
    """A Gram matrix failed its Cholesky factorisation."""


@dataclass(frozen=True)
class SectionSpace:
    """Monomial basis of ``H^0(O(pk) (x) K)`` or ``H^0(O(pk))`` on the sphere."""

    k: int
    p: int
    twist: Twist = "canonical"

    def __post_init__(self):
        if self.twist not in ("canonical", "none"):
            raise ValueError(f"unknown twist {self.twist!r}")
        if self.k < 1 or self.p < 1:
            raise ValueError("k and p must be positive")
        if self.twist == "canonical" and self.p * self.k < 2:
            raise ValueError(f"H^0(O({self.p * self.k}) (x) K) is empty; need pk >= 2")

    @property
    def dim(self) -> int:
        pk = self.p * self.k
        return pk - 1 if self.twist == "canonical" else pk + 1

    @property
    def exponents(self) -> np.ndarray:
        return np.arange(self.dim)

    @property
    def chart1_exponents(self) -> np.ndarray:
        """Exponent of ``w`` representing each basis element in the chart at infinity."""
        pk = self.p * self.k
        shift = 2 if self.twist == "canonical" else 0
        return pk - shift - self.exponents


@dataclass(frozen=True)
class HermitianForm:
    """Positive Hermitian form ``G = D C D`` on a ``SectionSpace``."""

    space: SectionSpace
    core: np.ndarray
    log_scale: np.ndarray
    diagonal: bool = False

    def __post_init__(self):
        c = np.asarray(self.core, dtype=complex)
        object.__setattr__(self, "core", 0.5 * (c + c.conj().T))
        object.__setattr__(self, "log_scale", np.asarray(self.log_scale, dtype=float))

    @classmethod
    def from_log_diagonal(cls, space: SectionSpace, log_diag) -> "HermitianForm":
        log_diag = np.asarray(log_diag, dtype=float)
        return cls(space, np.eye(log_diag.size), 0.5 * log_diag, diagonal=True)

    @classmethod
    def from_matrix(cls, space: SectionSpace, G) -> "HermitianForm":
        G = np.asarray(G, dtype=complex)
        d = np.real(np.diag(G))
        if np.any(d <= 0):
            raise NotHilbertNormError("non-positive diagonal entry")
        s = 0.5 * np.log(d)
        inv = np.exp(-s)
        return cls(space, inv[:, None] * G * inv[None, :], s)

    @property
    def dim(self) -> int:
        return self.log_scale.size

    @property
    def log_diagonal(self) -> np.ndarray:
        return 2.0 * self.log_scale + np.log(np.real(np.diag(self.core)))

    def matrix(self) -> np.ndarray:
        """Dense ``G``; may overflow for large levels."""
        e = np.exp(self.log_scale)
        return np.outer(e, e) * self.core   # e_i e_j is symmetric, so the result is exactly Hermitian

    def cholesky(self) -> np.ndarray:
        try:
            return linalg.cholesky(self.core, lower=True)
        except linalg.LinAlgError as exc:
            raise NotHilbertNormError(str(exc)) from exc

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the rescaled core (a conditioning diagnostic)."""
        return float(linalg.eigvalsh(self.core)[0])

    def scaled(self, log_factor: float) -> "HermitianForm":
        """``exp(log_factor) * G``."""
        return HermitianForm(self.space, self.core, self.log_scale + 0.5 * log_factor, self.diagonal)

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        out = {"k": self.space.k, "p": self.space.p, "twist": self.space.twist, "dim": self.dim,
               "log_scale": self.log_scale.tolist(), "diagonal": self.diagonal}
        if self.diagonal:
            out["log_diagonal"] = self.log_diagonal.tolist()
        else:
            out["core_real"] = self.core.real.tolist()
            out["core_imag"] = self.core.imag.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "HermitianForm":
        space = SectionSpace(data["k"], data["p"], data["twist"])
        if data.get("diagonal"):
            return cls.from_log_diagonal(space, data["log_diagonal"])
        core = np.asarray(data["core_real"]) + 1j * np.asarray(data["core_imag"])
        return cls(space, core, np.asarray(data["log_scale"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "HermitianForm":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# pairings: integrals  int F u_k conj(u_j) e^{-p phi} (measure)


class ToricPairing:
    """Diagonal pairings for an S^1-invariant weight on a 1-D x-rule.

    ``log_weights[j, i]`` is the log of the measure that node ``i`` carries in
    ``||z^j||^2``; rows are normalised into probability vectors so that
    ``pair(F)`` returns ``diag(E_j[F])``, the core of ``int F |u_j|^2 ...``
    relative to the scale ``sqrt(N_j)``.
    """

    def __init__(self, space: SectionSpace, rule: PanelRule, phi: np.ndarray, log_density: np.ndarray | None = None):
        self.space = space
        self.rule = rule
        x = rule.nodes
        offset = 1 if space.twist == "canonical" else 0
        ell = rule.log_weights[None, :] + np.log(2.0 * np.pi) + np.outer(space.exponents + offset, x) - space.p * phi[None, :]
        if space.twist == "none":
            if log_density is None:
                raise ValueError("F-type pairing needs the Kahler density")
            ell = ell + log_density[None, :]
        self.log_norms = logsumexp(ell, axis=1)
        self.probs = np.exp(ell - self.log_norms[:, None])

    @property
    def x(self) -> np.ndarray:
        return self.rule.nodes

    @property
    def log_scale(self) -> np.ndarray:
        return 0.5 * self.log_norms

    def expect(self, F) -> np.ndarray:
        """Row expectations ``E_j[F]``."""
        return self.probs @ np.asarray(F)

    def pair(self, F) -> np.ndarray:
        return np.diag(self.expect(F))

    def gram(self) -> HermitianForm:
        return HermitianForm.from_log_diagonal(self.space, self.log_norms)

    @classmethod
    def build(cls, space: SectionSpace, phi_fn: Callable, log_density_fn: Callable | None = None,
              rtol: float = DEFAULT_RTOL, rule: PanelRule | None = None, max_doublings: int = 5) -> "ToricPairing":
        """Construct on a rule refined until every ``log N_j`` is stable to ``rtol``."""
        rule = rule or PanelRule(-INTEGRATION_HALF_WIDTH, INTEGRATION_HALF_WIDTH, 180, 16)

        def make(r):
            ld = None if log_density_fn is None else log_density_fn(r.nodes)
            return cls(space, r, phi_fn(r.nodes), ld)

        old = make(rule)
        for _ in range(max_doublings):
            rule = rule.refined()
            new = make(rule)
            # log N errors are absolute-relative: |dlogN| ~ relative error of N
            if np.all(np.abs(new.log_norms - old.log_norms) <= rtol):
                return new
            old = new
        raise QuadratureError(f"toric Gram quadrature did not reach rtol={rtol}")


class DensePairing:
    """Full Hermitian pairings on a two-chart polar quadrature.

    Node ``i`` lives in chart ``chart[i]`` at local coordinate ``local[i]``;
    ``z[i]`` is the same point in chart-0 coordinates.
    """

    def __init__(self, space: SectionSpace, metric: FiberMetric, rule: DiscRule, weights0=None, weights1=None):
        self.space = space
        self.metric = metric
        self.rule = rule
        pts = rule.points
        self.chart = np.concatenate([np.zeros(pts.size, int), np.ones(pts.size, int)])
        self.local = np.concatenate([pts, pts])
        self.z = np.concatenate([pts, 1.0 / pts])
        w0 = metric.weight(pts, 0) if weights0 is None else weights0
        w1 = metric.weight(pts, 1) if weights1 is None else weights1
        self.density = np.concatenate([metric.density(pts, 0), metric.density(pts, 1)])
        self.weight = np.concatenate([w0, w1])
        p = space.p
        logmeas = np.log(2.0 * np.concatenate([rule.weights, rule.weights])) - p * self.weight
        if space.twist == "none":
            logmeas = logmeas + np.log(self.density)
        e0 = space.exponents
        e1 = space.chart1_exponents
        logr = np.log(np.abs(self.local))
        ang = np.angle(self.local)
        expo = np.where(self.chart[None, :] == 0, e0[:, None], e1[:, None])
        logmag = expo * logr[None, :] + 0.5 * logmeas[None, :]
        raw = np.exp(logmag) * np.exp(1j * expo * ang[None, :])
        gdiag = np.sum(np.abs(raw) ** 2, axis=1)
        self.log_scale = 0.5 * np.log(gdiag)
        self._S = raw * np.exp(-self.log_scale)[:, None]

    def pair(self, F) -> np.ndarray:
        F = np.asarray(F)
        S = self._S
        return (S.conj() * F[None, :]) @ S.T

    def gram(self) -> HermitianForm:
        return HermitianForm(self.space, self.pair(np.ones(self._S.shape[1])), self.log_scale)

    def dzbar(self, f: Callable, h: float = 1e-3) -> np.ndarray:
        """Chart-local ``d f / d(zbar or wbar)`` for ``f`` given in chart-0 ``z``."""
        from .geometry import fd_dzbar
        out = np.empty(self.local.size, dtype=complex)
        c0 = self.chart == 0
        out[c0] = fd_dzbar(f, self.local[c0], h)
        out[~c0] = fd_dzbar(lambda w: f(1.0 / w), self.local[~c0], h)
        return out

    def grad_norm2(self, f: Callable) -> np.ndarray:
        """``|dbar f|^2_omega`` at the nodes."""
        return np.abs(self.dzbar(f)) ** 2 / self.density

    @classmethod
    def build(cls, space: SectionSpace, metric: FiberMetric, rtol: float = DEFAULT_RTOL,
              rule: DiscRule | None = None, max_doublings: int = 3) -> "DensePairing":
        if space.p * space.k > MAX_DENSE_PK:
            raise ValueError(f"dense quadrature limited to pk <= {MAX_DENSE_PK}")
        rule = rule or DiscRule(4, 16, max(64, 4 * space.dim))
        old = cls(space, metric, rule)
        for _ in range(max_doublings):
            rule = rule.refined()
            new = cls(space, metric, rule)
            G0, G1 = old.gram().matrix(), new.gram().matrix()
            if np.max(np.abs(G1 - G0)) <= rtol * np.max(np.abs(G1)):
                return new
            old = new
        raise QuadratureError("dense Gram quadrature did not converge")


def _toric_fns(m: ToricPotential):
    return (lambda x: m(x)), (lambda x: np.log(m.deriv(x, 2)))


def pairing(m: Metric, space: SectionSpace, dense: bool = False, rtol: float = DEFAULT_RTOL):
    """Pairing object for ``m`` on ``space`` (1-D for toric unless ``dense``)."""
    if isinstance(m, ToricPotential) and not dense:
        phi, logd = _toric_fns(m)
        return ToricPairing.build(space, phi, logd if space.twist == "none" else None, rtol)
    if isinstance(m, ToricPotential):
        m = FiberMetric.from_toric(m)
    if m.k != space.k:
        raise MetricError("metric degree does not match the section space")
    return DensePairing.build(space, m, rtol)


def gram_E(m: Metric, p: int, dense: bool = False, rtol: float = DEFAULT_RTOL) -> HermitianForm:
    """Gram matrix of ``z^j dz`` under ``int [u, u] e^{-p phi}``."""
    return pairing(m, SectionSpace(m.k, p, "canonical"), dense, rtol).gram()


def gram_F(m: Metric, p: int, dense: bool = False, rtol: float = DEFAULT_RTOL) -> HermitianForm:
    """Gram matrix of ``z^j`` under ``int |u|^2 e^{-p phi} omega``."""
    return pairing(m, SectionSpace(m.k, p, "none"), dense, rtol).gram()


# ---------------------------------------------------------------------------
# Bergman densities


def _log_kernel(G: HermitianForm, expo: np.ndarray, local: np.ndarray) -> np.ndarray:
    """``log sum |u~_j|^2`` for a G-orthonormal basis, monomials ``local^expo``."""
    L = G.cholesky()
    a = np.log(np.abs(local))[:, None] * expo[None, :] - G.log_scale[None, :]
    shift = np.max(a, axis=1, keepdims=True)
    w = np.exp(a - shift) * np.exp(1j * np.angle(local)[:, None] * expo[None, :])
    if G.diagonal:
        q = np.sum(np.abs(w) ** 2 / np.real(np.diag(G.core))[None, :], axis=1)
    else:
        y = linalg.solve_triangular(L, w.T, lower=True)
        q = np.sum(np.abs(y) ** 2, axis=0)
    return 2.0 * shift[:, 0] + np.log(q)


def log_bergman_density(G: HermitianForm, m: Metric, z, chart: int = 0) -> np.ndarray:
    """Log of the Bergman density relative to ``omega`` at chart points ``z``.

    E-type: ``sum |u~_j|^2 e^{-p phi} / g``; F-type: ``sum |u~_j|^2 e^{-p phi}``.
    Either integrates against ``omega`` to the dimension.
    """
    space = G.space
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    expo = space.exponents if chart == 0 else space.chart1_exponents
    logB = _log_kernel(G, expo, z)
    if isinstance(m, ToricPotential):
        prof = m if chart == 0 else m.reflected()
        x = np.log(np.abs(z) ** 2)
        weight = prof(x)
    else:
        weight = m.weight(z, chart)
    out = logB - space.p * weight
    if space.twist == "canonical":
        out = out - np.log(kahler_density(m, z, chart))
    return out


def bergman_density(G: HermitianForm, m: Metric, p: int, z, chart: int = 0) -> np.ndarray:
    """Bergman density ``B e^{-p phi}`` relative to ``omega`` (see ``log_bergman_density``)."""
    if G.space.p != p:
        raise ValueError("level does not match the Hermitian form")
    return np.exp(log_bergman_density(G, m, z, chart))


def toric_log_bergman(log_norms: np.ndarray, x: np.ndarray, offset: int = 0) -> np.ndarray:
    """``log sum_j e^{(j+offset) x} / N_j`` for a diagonal Gram matrix (vectorised in x)."""
    j = np.arange(log_norms.size) + offset
    return logsumexp(np.outer(x, j) - log_norms[None, :], axis=1)


# ---------------------------------------------------------------------------
# generalized eigenproblem and determinants


@dataclass(frozen=True)
class GenEigen:
    """Simultaneous diagonalisation of ``(G0, G1)``.

    Column ``j`` of ``vectors`` is a coefficient vector in the rescaled frame
    ``u_k exp(-log_scale[k])``; it has unit ``G0`` norm and ``G1`` norm
    ``exp(2 lam_j)``.
    """

    lam: np.ndarray
    vectors: np.ndarray
    log_scale: np.ndarray

    def raw(self) -> np.ndarray:
        """Coefficients in the monomial frame (may overflow)."""
        return np.exp(-self.log_scale)[:, None] * self.vectors


def _sort_desc(lam: np.ndarray, vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # phase-normalise so the largest-modulus entry is real positive, then sort
    idx = np.argmax(np.abs(vecs) > 1e-12 * np.max(np.abs(vecs), axis=0, keepdims=True), axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    vecs = vecs * (np.abs(ph) / np.where(ph == 0, 1, ph))[None, :]
    keys = [tuple(np.round(v.real, 12)) + tuple(np.round(v.imag, 12)) for v in vecs.T]
    order = sorted(range(lam.size), key=lambda i: (-round(float(lam[i]), 12), keys[i]))
    return lam[order], vecs[:, order]


def gen_eigen(G0: HermitianForm, G1: HermitianForm, spread_cap: float = LAMBDA_SPREAD_CAP,
              warn_cond: float = 1e12) -> GenEigen:
    """Solve ``G1 v = e^{2 lam} G0 v`` by Cholesky reduction.

    Returns ``lam`` sorted in descending order.  Raises
    ``NotHilbertNormError`` on indefinite input and ``ValueError`` when the
    spread of ``lam`` exceeds ``spread_cap``.
    """
    if G0.space != G1.space:
        raise ValueError("forms live on different section spaces")
    delta = G1.log_scale - G0.log_scale
    if G0.diagonal and G1.diagonal:
        lam = 0.5 * (G1.log_diagonal - G0.log_diagonal)
        vecs = np.diag(np.exp(G0.log_scale - 0.5 * G0.log_diagonal)).astype(complex)
    else:
        if np.ptp(delta) > spread_cap:
            raise ValueError(f"scale spread {np.ptp(delta):.1f} exceeds cap {spread_cap}")
        L = G0.cholesky()
        _ = G1.cholesky()
        R = np.exp(delta - np.max(delta))
        M1 = R[:, None] * G1.core * R[None, :]
        Linv_M = linalg.solve_triangular(L, M1, lower=True)
        M = linalg.solve_triangular(L, Linv_M.conj().T, lower=True).conj().T
        M = 0.5 * (M + M.conj().T)
        mu, W = linalg.eigh(M)
        if np.min(mu) <= 0:
            raise NotHilbertNormError("reduced pencil is not positive definite")
        cond = mu.max() / mu.min()
        if cond > warn_cond:
            warnings.warn(f"ill-conditioned pencil (cond ~ {cond:.2e})", RuntimeWarning, stacklevel=2)
        lam = 0.5 * np.log(mu) + np.max(delta)
        vecs = linalg.solve_triangular(L.conj().T, W, lower=False)
    if np.ptp(lam) > spread_cap:
        raise ValueError(f"lambda spread {np.ptp(lam):.1f} exceeds cap {spread_cap}")
    lam, vecs = _sort_desc(np.asarray(lam, dtype=float), vecs)
    return GenEigen(lam, vecs, G0.log_scale.copy())


def log_det(G: HermitianForm) -> float:
    """``log det G`` without forming ``G``."""
    L = G.cholesky()
    return float(2.0 * np.sum(G.log_scale) + 2.0 * np.sum(np.log(np.real(np.diag(L)))))
