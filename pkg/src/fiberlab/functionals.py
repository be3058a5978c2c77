"""Energy functionals on the space of fiber metrics.

For a reference weight ``phi0`` and level ``p``:

    I(phi)        with  dI = int (d phi) omega_phi,       I(phi0) = 0
    L_p(phi)      = -(1/p) log det Hilb_p(phi)  (fixed monomial frame)
    tilde L_p     = L_p / d_p - I / Vol
    sigma_p       = B_{p phi} e^{-p phi} / d_p - omega_phi / Vol

so that the first variation of ``tilde L_p`` along ``mu`` is
``int mu sigma_p``.  The Mabuchi functional enters through
``M'(mu) = int mu (S - S_hat) omega``.  With our normalisations the
Bergman expansion gives ``p sigma_p -> KAPPA_VOL (S - S_hat) / Vol`` with
``KAPPA_VOL = -1/2``.

``sigma_p`` here is always the density of that measure relative to ``omega_phi``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .direct_image import _toric_dbarV2, c_geodesic_x, curvature_E
from .geometry import FiberMetric, Metric, MetricError, ToricPotential, integrate_over_fiber, volume
from .paths import ToricPath
from .quadrature import PanelRule, gauss_legendre, refine
from .spectra import DEFAULT_RTOL, gram_E, log_det, log_bergman_density

# p sigma_p -> KAPPA_VOL * (S - S_hat) / Vol as p -> infinity
KAPPA_VOL = -0.5


def _tor_int(f: Callable[[np.ndarray], np.ndarray], rtol: float = 1e-11) -> float:
    """``2 pi int f dx`` on the standard x-window."""
    val, _ = refine(lambda r: np.atleast_1d(r.integrate(f(r.nodes))), PanelRule(-45.0, 45.0, 90),
                    rtol=rtol, atol=1e-15)
    return float(2.0 * np.pi * val[0])


def _dense_int(m0: FiberMetric, f_dens: Callable[[np.ndarray, int], np.ndarray], n_theta: int = 128) -> float:
    """``int`` of a chart density ``f_dens(local, chart)`` (already times ``g``) over both charts."""
    from .quadrature import DiscRule
    rule = DiscRule(8, 16, n_theta)
    return float(sum(np.sum(2.0 * rule.weights * f_dens(rule.points, c)) for c in (0, 1)))


# ---------------------------------------------------------------------------
# I


def I_energy(phi: Metric, phi0: Metric, method: str = "path", n_s: int = 8) -> float:
    """``I(phi) - I(phi0)`` along the affine segment ``phi0 + s (phi - phi0)``.

    ``method="path"`` integrates ``I'`` with Gauss-Legendre in ``s``;
    ``method="closed"`` uses the one-dimensional identity
    ``I = int psi (omega0 + omega_phi) / 2``.
    """
    if phi.k != phi0.k:
        raise MetricError("metrics must have the same degree")
    if isinstance(phi, ToricPotential) and isinstance(phi0, ToricPotential):
        psi = lambda x: phi(x) - phi0(x)
        if method == "closed":
            return _tor_int(lambda x: psi(x) * 0.5 * (phi0.deriv(x, 2) + phi.deriv(x, 2)))
        s, w = gauss_legendre(0.0, 1.0, n_s)
        return float(sum(wi * _tor_int(lambda x, si=si: psi(x) * ((1 - si) * phi0.deriv(x, 2) + si * phi.deriv(x, 2)))
                         for si, wi in zip(s, w)))
    m1 = phi if isinstance(phi, FiberMetric) else FiberMetric.from_toric(phi)
    m0 = phi0 if isinstance(phi0, FiberMetric) else FiberMetric.from_toric(phi0)

    def psi(q, c):
        return m1.weight(q, c) - m0.weight(q, c)

    if method == "closed":
        return _dense_int(m0, lambda q, c: psi(q, c) * 0.5 * (m0.density(q, c) + m1.density(q, c)))
    s, w = gauss_legendre(0.0, 1.0, n_s)
    return float(sum(wi * _dense_int(m0, lambda q, c, si=si: psi(q, c) * ((1 - si) * m0.density(q, c)
                                                                          + si * m1.density(q, c)))
                     for si, wi in zip(s, w)))


def I_along_path(path: ToricPath, s0: float, s1: float, n_s: int = 16) -> float:
    """``I(phi(s1)) - I(phi(s0))`` integrating ``int (d phi / ds) omega`` along ``t = s`` real."""
    s, w = gauss_legendre(s0, s1, n_s)
    total = 0.0
    for si, wi in zip(s, w):
        total += wi * _tor_int(lambda x, si=si: 2.0 * np.real(path.psi_t(si, x, 0)) * path.phi(si, x, 2))
    return float(total)


# ---------------------------------------------------------------------------
# L_p and sigma_p


def L_p_functional(phi: Metric, p: int, rtol: float = DEFAULT_RTOL) -> float:
    """``-(1/p) log det`` of the E-type Gram matrix in the monomial frame."""
    return -log_det(gram_E(phi, p, rtol=rtol)) / p


def tilde_L_p(phi: Metric, p: int, phi0: Metric, rtol: float = DEFAULT_RTOL) -> float:
    """``L_p / d_p - I / Vol``; invariant under ``phi -> phi + c``."""
    G = gram_E(phi, p, rtol=rtol)
    return -log_det(G) / p / G.dim - I_energy(phi, phi0) / volume(phi)


def sigma_p(phi: Metric, p: int, z, chart: int = 0) -> np.ndarray:
    """Balanced-metric residual density ``B e^{-p phi} / (d_p omega) - 1/Vol`` at chart points."""
    G = gram_E(phi, p)
    return np.exp(log_bergman_density(G, phi, z, chart)) / G.dim - 1.0 / volume(phi)


def sigma_p_x(phi: ToricPotential, p: int, x, G=None) -> np.ndarray:
    """Toric ``sigma_p`` as a function of ``x``."""
    x = np.asarray(x, dtype=float)
    z = np.exp(x / 2)
    G = gram_E(phi, p) if G is None else G
    return np.exp(log_bergman_density(G, phi, z)) / G.dim - 1.0 / (2 * np.pi * phi.k)


def sigma_p_pairing(phi: ToricPotential, p: int, mu: Callable[[np.ndarray], np.ndarray]) -> float:
    """``int mu sigma_p omega`` computed from Gram data: ``sum_j E_j[mu] / d - int mu omega / Vol``.

    ``E_j`` is the normalised measure of ``|z^j dz|^2 e^{-p phi}``, so the first
    sum is the Bergman-density integral written in the diagonal frame.
    """
    from .spectra import SectionSpace, ToricPairing
    pr = ToricPairing.build(SectionSpace(phi.k, p), lambda x: phi(x))
    first = float(np.mean(pr.expect(mu(pr.x))))
    return first - _tor_int(lambda x: mu(x) * phi.deriv(x, 2)) / (2 * np.pi * phi.k)


# ---------------------------------------------------------------------------
# Mabuchi


def _S_times_g(m: ToricPotential, x: np.ndarray) -> np.ndarray:
    """``S phi''`` (stable in the tails)."""
    d2, d3, d4 = (m.deriv(x, n) for n in (2, 3, 4))
    return -(d4 / d2 - (d3 / d2) ** 2)


def mabuchi_derivative(phi: Metric, mu: Callable, rtol: float = 1e-11) -> float:
    """``int mu (S - S_hat) omega``; ``mu(x)`` for toric metrics, ``mu(z)`` otherwise.

    ``rtol`` applies to toric metrics; metrics whose higher derivatives come
    from finite differences (geodesic oracles) need about ``1e-8``.
    """
    if isinstance(phi, ToricPotential):
        s_hat = 4 * np.pi / (2 * np.pi * phi.k)
        return _tor_int(lambda x: mu(x) * (_S_times_g(phi, x) - s_hat * phi.deriv(x, 2)), rtol)
    from .geometry import scalar_curvature
    vol = volume(phi)
    s_hat = 4 * np.pi / vol

    def f(q, c):
        zq = q if c == 0 else 1.0 / q
        return mu(zq) * (scalar_curvature(phi, q, c) - s_hat) * phi.density(q, c)

    return _dense_int(phi, f)


def mabuchi_along_path(path: ToricPath, s_values: Sequence[float], n_s: int = 8,
                       rtol: float = 1e-11) -> np.ndarray:
    """``M(phi(s)) - M(phi(s_values[0]))`` by integrating ``M'(d phi / ds)`` piecewise in ``s``."""
    s_values = np.asarray(s_values, dtype=float)

    def dM(s):
        m = path.metric_at(s)
        return mabuchi_derivative(m, lambda x: 2.0 * np.real(path.psi_t(s, x, 0)), rtol)

    out = [0.0]
    for a, b in zip(s_values[:-1], s_values[1:]):
        nodes, w = gauss_legendre(a, b, n_s)
        out.append(out[-1] + float(sum(wi * dM(si) for si, wi in zip(nodes, w))))
    return np.array(out)


@dataclass
class MabuchiHessian:
    """``value = (1/Vol) int |dbar V_{psi_t}|^2 omega`` at a point of a geodesic.

    Under our normalisations ``d_t d_tbar M = -Vol * value`` along a
    geodesic, i.e. ``d^2 M / ds^2 = -4 Vol * value``.
    """

    value: float
    volume: float
    geodesic_residual: float

    @property
    def ddbar_M(self) -> float:
        return -self.volume * self.value

    @property
    def M_ss(self) -> float:
        return -4.0 * self.volume * self.value


def mabuchi_hessian_geodesic(path: ToricPath, t, tol: float = 1e-4, x_check=None,
                             rtol: float = 1e-11) -> MabuchiHessian:
    """Second variation of the Mabuchi functional along a (numerical) geodesic.

    Refuses when ``sup |c(phi)|`` at ``t`` exceeds ``tol``.
    """
    x_check = np.linspace(-18.0, 18.0, 181) if x_check is None else x_check
    resid = float(np.max(np.abs(c_geodesic_x(path, t, x_check))))
    if resid > tol:
        raise ValueError(f"path is not geodesic at t={t}: sup|c| = {resid:.3e}")
    m = path.metric_at(t)
    re = lambda x, n=0: np.real(path.psi_t(t, x, n))
    im = lambda x, n=0: np.imag(path.psi_t(t, x, n))
    val = _tor_int(lambda x: (_toric_dbarV2(m, re, x) + _toric_dbarV2(m, im, x)) * m.deriv(x, 2))
    vol = 2 * np.pi * m.k
    return MabuchiHessian(val / vol, vol, resid)


# ---------------------------------------------------------------------------
# reports along paths


def L_p_along(path: ToricPath, p: int, t) -> float:
    return L_p_functional(path.metric_at(t), p)


def ddbar_L_p(path: ToricPath, p: int, t, h: float = 1e-3) -> float:
    """``d_t d_tbar L_p`` by a Richardson-extrapolated five-point Laplacian in ``t``."""
    t = complex(t)

    def lap(hh):
        f = lambda tt: L_p_along(path, p, tt)
        f0 = f(t)
        return (f(t + hh) + f(t - hh) + f(t + 1j * hh) + f(t - 1j * hh) - 4 * f0) / (4 * hh * hh)

    return (4 * lap(h / 2) - lap(h)) / 3


def lemma_link(path: ToricPath, p: int, t, h: float = 1e-3) -> tuple[float, float]:
    """``(d_t d_tbar L_p, tr Theta^p / p)``; the two agree."""
    return ddbar_L_p(path, p, t, h), curvature_E(path, p, t).trace / p


@dataclass
class FunctionalReport:
    """Functionals sampled along ``t = s`` real for a toric path."""

    p: int
    s: np.ndarray
    I: np.ndarray
    L_p: np.ndarray
    tilde_L_p: np.ndarray
    h: float
    d2_L_p: np.ndarray = field(init=False)
    d2_tilde_L_p: np.ndarray = field(init=False)
    volume: float = 0.0
    dim: int = 0

    def __post_init__(self):
        self.d2_L_p = np.diff(self.L_p, 2) / self.h**2
        self.d2_tilde_L_p = np.diff(self.tilde_L_p, 2) / self.h**2

    def convex(self, tol: float | None = None) -> bool:
        """Second differences of ``L_p`` are ``>= -tol``.

        The default allows roundoff of ``1e-10 * max|L_p|`` in each value.
        """
        tol = 4e-10 * max(1.0, float(np.max(np.abs(self.L_p)))) / self.h**2 if tol is None else tol
        return bool(np.all(self.d2_L_p >= -tol))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "I", "L_p", "tildeL_p", "d2_L_p", "d2_tildeL_p"])
            for i, s in enumerate(self.s):
                inner = 0 < i < len(self.s) - 1
                w.writerow([repr(float(s)), repr(float(self.I[i])), repr(float(self.L_p[i])),
                            repr(float(self.tilde_L_p[i])),
                            repr(float(self.d2_L_p[i - 1])) if inner else "",
                            repr(float(self.d2_tilde_L_p[i - 1])) if inner else ""])

    def to_dict(self) -> dict:
        return {"p": self.p, "h": self.h, "dim": self.dim, "volume": self.volume,
                "s": self.s.tolist(), "I": self.I.tolist(), "L_p": self.L_p.tolist(),
                "tilde_L_p": self.tilde_L_p.tolist(), "min_d2_L_p": float(np.min(self.d2_L_p)),
                "convex_L_p": self.convex()}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))


def functional_report(path: ToricPath, p: int, s_values: Sequence[float]) -> FunctionalReport:
    """``I``, ``L_p``, ``tilde L_p`` along an equally spaced ``s`` grid."""
    s_values = np.asarray(s_values, dtype=float)
    h = float(s_values[1] - s_values[0])
    if not np.allclose(np.diff(s_values), h, rtol=1e-9, atol=0):
        raise ValueError("s grid must be equally spaced")
    base = path.metric_at(s_values[0])
    I = np.array([I_energy(path.metric_at(s), base) for s in s_values])
    L = np.array([L_p_along(path, p, s) for s in s_values])
    d = p * path.k - 1
    vol = 2 * np.pi * path.k
    rep = FunctionalReport(p, s_values, I, L, L / d - I / vol, h)
    rep.volume, rep.dim = vol, d
    return rep
