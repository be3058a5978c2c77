"""Batch front end.

Usage::

    fiberlab <subcommand> [--config cfg.json] [--out DIR] [--threads N] [--seed S]

Subcommands are ``geodesic``, ``curvature``, ``asymptotics``, ``functionals``
and ``selftest``.  Each writes ``summary.json`` (schema ``SCHEMA_VERSION``),
CSV tables and SVG plots into the output directory.

Exit codes: 0 when every asserted check passes, 2 when a numerical check
fails (the failing checks are listed under ``"checks"`` in ``summary.json``),
1 for usage or configuration errors.

CSV columns
-----------
geodesic     ``geodesic.csv``: p, e, e_p_over_log_p
curvature    ``curvature.csv``: p, kind, dim, trace, min_eigenvalue, max_eigenvalue, residual
asymptotics  ``trace.csv``: p, measured, predicted, residual;
             ``A_trace.csv``: p, measured, limit, ratio;
             ``tcz.csv``: p, sup_p_sigma, kappa_fit
functionals  ``functionals.csv``: s, I, L_p, tildeL_p, d2_L_p, d2_tildeL_p
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import direct_image as di
from . import functionals as fn
from . import geodesics as geo
from .geometry import MetricError, ToricPotential, preset, sigmoid_poly
from .paths import (ToricPath, bump_path, constant_shift, generic_toric_path, pullback_path, sech_bump)
from .spectra import HermitianForm, SectionSpace, gen_eigen, log_det
from .quadrature import QuadratureError

SCHEMA_VERSION = 1
SUBCOMMANDS = ("geodesic", "curvature", "asymptotics", "functionals", "selftest")


class ConfigError(ValueError):
    """Invalid configuration (exit code 1)."""


# ---------------------------------------------------------------------------
# configuration


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _pos_int(v) -> bool:
    return _is_int(v) and v > 0


def _pos_num(v) -> bool:
    return _is_num(v) and v > 0


# key -> (validator, description, default)
_TOP: dict[str, tuple[Callable[[Any], bool], str, Any]] = {
    "experiment": (lambda v: v in SUBCOMMANDS, "one of " + ", ".join(SUBCOMMANDS), None),
    "k": (_pos_int, "positive integer", 1),
    "phi0": (lambda v: isinstance(v, str), "metric preset string", "fs"),
    "phi1": (lambda v: isinstance(v, str), "metric preset string", "fs_bump(0.1)"),
    "path": (lambda v: isinstance(v, dict), "path object", None),
    "p": (lambda v: _is_int(v) and v >= 2, "integer >= 2", None),
    "p_list": (lambda v: isinstance(v, list) and len(v) > 0 and all(_is_int(q) and q >= 2 for q in v)
               and all(a < b for a, b in zip(v, v[1:])), "increasing list of integers >= 2", None),
    "t": (lambda v: _is_num(v) or (isinstance(v, list) and len(v) == 2 and all(map(_is_num, v))),
          "number or [re, im]", None),
    "s_values": (lambda v: isinstance(v, list) and len(v) >= 3 and all(map(_is_num, v)),
                 "list of at least 3 numbers", None),
    "x_grid": (lambda v: _is_int(v) and v >= 3, "integer >= 3", 401),
    "s_grid": (lambda v: _is_int(v) and v >= 3, "integer >= 3", 21),
    "rtol": (_pos_num, "positive tolerance", 1e-10),
    "tol": (_pos_num, "positive tolerance", 1e-4),
    "slack": (_pos_num, "positive tolerance", 0.2),
    "domination_slack": (_pos_num, "positive tolerance", 1e-8),
    "identity_tol": (_pos_num, "positive tolerance", 1e-6),
    "bound_tol": (_pos_num, "positive tolerance", 1e-6),
    "asym_tol": (_pos_num, "positive tolerance", 0.05),
    "lemma_tol": (_pos_num, "positive tolerance", 1e-5),
    "grad_coefficient": (_is_num, "number", 1.0),
    "domination": (lambda v: isinstance(v, bool), "boolean", True),
    "plots": (lambda v: isinstance(v, bool), "boolean", True),
    "threads": (_pos_int, "positive integer", 1),
    "seed": (lambda v: _is_int(v) and 0 <= v < 2**64, "unsigned 64-bit integer", 0),
    "out": (lambda v: isinstance(v, str), "directory path", "results"),
}

# path family -> allowed keys (with defaults)
_PATHS: dict[str, dict[str, Any]] = {
    "shift": {"c": 0.3},
    "bump": {"eps": 0.2, "x0": 0.0, "width": 1.0, "linear": 0.0},
    "poly_bump": {"coef": [0.0, 0.4, -0.4], "linear": 0.0},
    "generic": {"nu1": [0.3, 0.0, 1.0], "nu2": [0.2, 1.0, 1.0], "nu3": [0.05, -1.0, 1.0]},
    "pullback": {"a": 1.0},
    "geodesic": {},
}

_DEFAULT_P = {"geodesic": [10, 20, 40, 80, 160], "curvature": [2, 4, 8], "asymptotics": [4, 8, 16, 32, 64],
              "functionals": [8]}
_DEFAULT_FAMILY = {"functionals": "geodesic", "asymptotics": "poly_bump"}
_DEFAULT_T = {"asymptotics": 0.5}


@dataclass
class ExperimentConfig:
    """Validated configuration; ``raw`` keeps the keys given by the user."""

    experiment: str
    values: dict[str, Any]
    raw: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def p_list(self) -> list[int]:
        if self.values.get("p_list") is not None:
            return list(self.values["p_list"])
        if self.values.get("p") is not None:
            return [int(self.values["p"])]
        return list(_DEFAULT_P.get(self.experiment, [4]))

    @property
    def t(self) -> complex:
        v = self.values.get("t")
        if v is None:
            return complex(0.0)
        return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _validate_path(spec: dict) -> dict:
    fam = spec.get("family", "bump")
    if fam not in _PATHS:
        raise ConfigError(f"path.family: unknown family {fam!r} (expected one of {', '.join(_PATHS)})")
    allowed = _PATHS[fam]
    unknown = sorted(set(spec) - set(allowed) - {"family"})
    if unknown:
        raise ConfigError(f"path: unknown key(s) for family {fam!r}: {', '.join(unknown)}")
    out = {"family": fam, **allowed, **{k: v for k, v in spec.items() if k != "family"}}
    for key, val in out.items():
        if key == "family":
            continue
        if isinstance(allowed[key], list):
            if not (isinstance(val, list) and all(map(_is_num, val))):
                raise ConfigError(f"path.{key}: expected a list of numbers")
        elif not _is_num(val):
            raise ConfigError(f"path.{key}: expected a number")
    if fam == "bump" and out["width"] <= 0:
        raise ConfigError("path.width: must be positive")
    if fam == "generic" and any(len(out[n]) != 3 or out[n][2] <= 0 for n in ("nu1", "nu2", "nu3")):
        raise ConfigError("path.nu*: expected [eps, x0, width] with width > 0")
    return out


def validate_config(raw: dict, experiment: str) -> ExperimentConfig:
    """Check ``raw`` against the schema; unknown keys and non-positive tolerances are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_TOP))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    for key, val in raw.items():
        check, desc, _ = _TOP[key]
        if not check(val):
            raise ConfigError(f"{key}: expected {desc}, got {val!r}")
    if raw.get("experiment", experiment) != experiment:
        raise ConfigError(f"config is for experiment {raw['experiment']!r}, not {experiment!r}")
    values = {key: default for key, (_, _, default) in _TOP.items()}
    values.update(raw)
    values["experiment"] = experiment
    values["path"] = _validate_path(raw.get("path", {"family": _DEFAULT_FAMILY.get(experiment, "bump")}))
    if values["t"] is None:
        values["t"] = _DEFAULT_T.get(experiment, 0.0)
    return ExperimentConfig(experiment, values, dict(raw))


def load_config(path: str | None, experiment: str) -> ExperimentConfig:
    if path is None:
        return validate_config({}, experiment)
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw, experiment)


# ---------------------------------------------------------------------------
# objects from config


def _metric(cfg: ExperimentConfig, key: str) -> ToricPotential:
    try:
        return preset(cfg[key], cfg["k"])
    except (MetricError, OSError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def build_path(cfg: ExperimentConfig) -> tuple[ToricPath, geo.GeodesicOracle | None]:
    """The configured path (and the certified oracle when the family is ``geodesic``)."""
    spec = cfg["path"]
    fam = spec["family"]
    base = _metric(cfg, "phi0")
    if fam == "shift":
        return constant_shift(base, spec["c"]), None
    if fam == "bump":
        return bump_path(base, sech_bump(spec["eps"], spec["x0"], spec["width"]), spec["linear"]), None
    if fam == "poly_bump":
        return bump_path(base, sigmoid_poly(spec["coef"]), spec["linear"]), None
    if fam == "generic":
        nu = [sech_bump(*spec[n]) for n in ("nu1", "nu2", "nu3")]
        return generic_toric_path(base, *nu), None
    if fam == "pullback":
        return pullback_path(base, spec["a"]), None
    oracle = geo.toric_geodesic(base, _metric(cfg, "phi1"), cfg["tol"])
    return oracle.as_path(), oracle


def _pmap(f: Callable, items: Sequence, threads: int) -> list:
    """Ordered map over at most ``threads`` workers."""
    if threads <= 1 or len(items) <= 1:
        return [f(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(f, items))


def _num(v) -> Any:
    """JSON-safe scalars (numpy, complex, non-finite)."""
    if isinstance(v, dict):
        return {k: _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_num(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    return v


def _csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines += [",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# SVG line charts


def svg_plot(path: Path, series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str,
             xlabel: str, ylabel: str, logx: bool = False, logy: bool = False) -> None:
    """Write a minimal line chart; non-positive values are dropped on log axes."""
    W, H, L, R, T, B = 560, 380, 70, 20, 36, 50
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    tx = np.log10 if logx else (lambda a: np.asarray(a, dtype=float))
    ty = np.log10 if logy else (lambda a: np.asarray(a, dtype=float))
    clean = []
    for label, xs, ys in series:
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        ok = np.isfinite(xs) & np.isfinite(ys) & ((xs > 0) if logx else True) & ((ys > 0) if logy else True)
        if ok.any():
            clean.append((label, tx(xs[ok]), ty(ys[ok])))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" '
           f'font-size="12"><rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    if clean:
        allx = np.concatenate([c[1] for c in clean])
        ally = np.concatenate([c[2] for c in clean])
        x0, x1 = float(allx.min()), float(allx.max())
        y0, y1 = float(ally.min()), float(ally.max())
        x1, y1 = (x1 if x1 > x0 else x0 + 1.0), (y1 if y1 > y0 else y0 + 1.0)

        def px(v):
            return L + (v - x0) / (x1 - x0) * (W - L - R)

        def py(v):
            return H - B - (v - y0) / (y1 - y0) * (H - T - B)

        out.append(f'<rect x="{L}" y="{T}" width="{W - L - R}" height="{H - T - B}" fill="none" stroke="#444"/>')
        for v in np.linspace(x0, x1, 5):
            lab = f"{10 ** v:.3g}" if logx else f"{v:.3g}"
            out.append(f'<text x="{px(v):.1f}" y="{H - B + 16}" text-anchor="middle">{lab}</text>')
        for v in np.linspace(y0, y1, 5):
            lab = f"{10 ** v:.3g}" if logy else f"{v:.3g}"
            out.append(f'<text x="{L - 6}" y="{py(v) + 4:.1f}" text-anchor="end">{lab}</text>')
        for i, (label, xs, ys) in enumerate(clean):
            c = colors[i % len(colors)]
            pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(xs, ys))
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="2" points="{pts}"/>')
            out += [f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="3" fill="{c}"/>' for a, b in zip(xs, ys)]
            out.append(f'<text x="{W - R - 8}" y="{T + 16 + 16 * i}" text-anchor="end" fill="{c}">{label}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{H / 2}" text-anchor="middle" transform="rotate(-90 16 {H / 2})">{ylabel}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# experiments; each returns (summary, checks)


Result = tuple[dict, dict[str, bool]]


def run_geodesic(cfg: ExperimentConfig, out: Path) -> Result:
    phi0, phi1 = _metric(cfg, "phi0"), _metric(cfg, "phi1")
    oracle = geo.toric_geodesic(phi0, phi1, cfg["tol"])
    p_list = cfg.p_list
    s_grid = np.linspace(0.0, 1.0, cfg["s_grid"])
    x_grid = np.linspace(-phi0.X, phi0.X, cfg["x_grid"])
    e = _pmap(lambda p: geo.sup_distance(phi0, phi1, p, oracle, s_grid, x_grid), p_list, cfg["threads"])
    checks = {"oracle_certified": oracle.residual < cfg["tol"]}
    summary: dict[str, Any] = {"oracle_residual": oracle.residual, "e": e,
                               "e_strictly_decreasing": bool(np.all(np.diff(e) < 0))}
    if len(p_list) >= 4:
        fit = geo.rate_fit(p_list, e, cfg["slack"])
        fit.to_csv(out / "geodesic.csv")
        summary["rate_fit"] = fit.to_dict()
        checks["rate_fit"] = fit.verdict.startswith("PASS")
    else:
        _csv(out / "geodesic.csv", ["p", "e", "e_p_over_log_p"],
             [(p, ep, ep * p / np.log(p)) for p, ep in zip(p_list, e)])
    if cfg["domination"]:
        doms = _pmap(lambda p: geo.domination_check(oracle, p, s_grid, x_grid), p_list, cfg["threads"])
        summary["domination_min_log_gap"] = [float(d.min_log_gap.min()) for d in doms]
        summary["domination_min_form_gap"] = [float(d.min_form_gap.min()) for d in doms]
        checks["domination"] = all(d.holds(cfg["domination_slack"]) for d in doms)
    if cfg["plots"]:
        svg_plot(out / "geodesic.svg", [("e(p)", p_list, e), ("log p / p", p_list, np.log(p_list) / p_list)],
                 "sup-distance to the geodesic", "p", "e(p)", logx=True, logy=True)
    return summary, checks


def run_curvature(cfg: ExperimentConfig, out: Path) -> Result:
    path, _ = build_path(cfg)
    t = cfg.t
    c_min = float(np.min(di.c_geodesic_x(path, t, np.linspace(-18.0, 18.0, 181))))

    def one(p):
        return di.curvature_E(path, p, t, rtol=cfg["rtol"]), di.curvature_F(path, p, t, rtol=cfg["rtol"])

    reps = _pmap(one, cfg.p_list, cfg["threads"])
    rows, per_p = [], []
    ident_ok = pos_ok = bound_ok = True
    for p, (E, F) in zip(cfg.p_list, reps):
        nrm = np.linalg.norm(E.Q)
        abs_res = float(np.linalg.norm(E.Q - E.first_term - E.second_term))
        ident_ok &= abs_res < 1e-9 or E.residual < cfg["identity_tol"]
        if c_min >= 0:
            pos_ok &= E.min_eigenvalue >= -1e-8
            bound_ok &= F.residual <= cfg["bound_tol"]
        rows += [(p, "E", E.dim, E.trace, E.min_eigenvalue, E.max_eigenvalue, E.residual),
                 (p, "F", F.dim, F.trace, F.min_eigenvalue, F.max_eigenvalue, F.residual)]
        per_p.append({"p": p, "E": {"trace": E.trace, "min_eigenvalue": E.min_eigenvalue,
                                    "operator_norm": E.operator_norm(), "identity_residual": E.residual,
                                    "identity_abs_residual": abs_res, "Q_norm": float(nrm)},
                      "F": {"trace": F.trace, "max_eigenvalue": F.max_eigenvalue, "bound_excess": F.residual}})
        E.save(out / f"curvature_E_p{p}.json")
    _csv(out / "curvature.csv", ["p", "kind", "dim", "trace", "min_eigenvalue", "max_eigenvalue", "residual"], rows)
    checks = {"identity": bool(ident_ok)}
    if c_min >= 0:
        checks["E_positive"] = bool(pos_ok)
        checks["F_bound"] = bool(bound_ok)
    if cfg["plots"]:
        ps = cfg.p_list
        svg_plot(out / "curvature.svg", [("tr Theta^E / p", ps, [r["E"]["trace"] / r["p"] for r in per_p])],
                 "curvature trace", "p", "trace / p")
    return {"path": cfg["path"], "t": t, "min_c": c_min, "per_p": per_p}, checks


def _path_mu(path: ToricPath, t: complex) -> Callable:
    return lambda x, n=0: 2.0 * np.real(path.psi_t(t, x, n))


def run_asymptotics(cfg: ExperimentConfig, out: Path) -> Result:
    path, _ = build_path(cfg)
    t, p_list = cfg.t, cfg.p_list
    table = di.trace_asymptotics(path, t, p_list, rtol=cfg["rtol"], grad_coefficient=cfg["grad_coefficient"])
    table.to_csv(out / "trace.csv")
    r = table.column("residual")
    order_one = (abs(di.S_TERM_COEFFICIENT * table.s_term) + abs(cfg["grad_coefficient"] * table.grad_term)) / table.volume
    rel = float(abs(r[-1]) / order_one) if order_one > 0 else float(abs(r[-1]))
    checks = {"trace_residual": rel < cfg["asym_tol"] or abs(r[-1]) < 1e-10}

    # A-form trace against its limit, for mu = 2 Re psi_t at t
    m = path.metric_at(t)
    mu = _path_mu(path, t)
    vals, limit = di.trace_A_limit(m, mu, p_list, rtol=cfg["rtol"])
    _csv(out / "A_trace.csv", ["p", "measured", "limit", "ratio"],
         [(p, v, limit, v / limit if limit else float("nan")) for p, v in zip(p_list, vals)])

    # Bergman density: p sigma_p against (S - S_hat)/Vol
    x = np.linspace(-12.0, 12.0, 121)
    vol = 2 * np.pi * m.k
    dev = (fn._S_times_g(m, x) / m.deriv(x, 2) - 2.0 / m.k) / vol
    tcz = []
    for p in p_list:
        ps = p * fn.sigma_p_x(m, p, x)
        kap = float(dev @ ps / (dev @ dev)) if dev @ dev > 1e-20 else 0.0
        tcz.append((p, float(np.max(np.abs(ps))), kap))
    _csv(out / "tcz.csv", ["p", "sup_p_sigma", "kappa_fit"], tcz)
    if cfg["plots"]:
        svg_plot(out / "trace.svg", [("measured", p_list, table.column("measured")),
                                     ("predicted", p_list, table.column("predicted"))],
                 "tr Theta / d_p", "p", "trace / dim", logx=True)
    summary = {"path": cfg["path"], "t": t, "table": table.to_dict(), "relative_residual_at_pmax": rel,
               "grad_coefficient": cfg["grad_coefficient"],
               "A_trace": {"p": p_list, "measured": vals, "limit": limit},
               "tcz": {"p": p_list, "sup_p_sigma": [r[1] for r in tcz], "kappa_fit": [r[2] for r in tcz],
                       "kappa_expected": fn.KAPPA_VOL}}
    return summary, checks


def run_functionals(cfg: ExperimentConfig, out: Path) -> Result:
    path, _ = build_path(cfg)
    s_values = np.asarray(cfg["s_values"] if cfg["s_values"] is not None else np.linspace(0.2, 0.8, 7))
    p = cfg.p_list[0]
    rep = fn.functional_report(path, p, s_values)
    rep.to_csv(out / "functionals.csv")
    rep.save(out / "functionals.json")
    c_min = min(float(np.min(di.c_geodesic_x(path, s, np.linspace(-18.0, 18.0, 181)))) for s in s_values)
    t_mid = float(s_values[len(s_values) // 2])
    dd, tr = fn.lemma_link(path, p, t_mid)
    checks = {"lemma_link": abs(dd - tr) <= cfg["lemma_tol"] * max(abs(tr), 1e-12)}
    if c_min >= -cfg["tol"]:
        checks["L_p_convex"] = rep.convex()
    if cfg["plots"]:
        svg_plot(out / "functionals.svg", [("L_p", s_values, rep.L_p), ("tilde L_p", s_values, rep.tilde_L_p)],
                 "functionals along the path", "s", "value")
    return {"path": cfg["path"], "p": p, "report": rep.to_dict(), "min_c": c_min,
            "lemma_link": {"t": t_mid, "ddbar_L_p": dd, "trace_over_p": tr}}, checks


def run_selftest(cfg: ExperimentConfig, out: Path) -> Result:
    """Invariant suite at small sizes; deterministic for a given seed."""
    rng = np.random.default_rng(cfg["seed"])
    fs = ToricPotential.fubini_study(1)
    checks: dict[str, bool] = {}
    info: dict[str, Any] = {}

    # Fubini-Study Bergman density is constant
    x = np.linspace(-10.0, 10.0, 41)
    info["fs_sigma_sup"] = float(np.max(np.abs(fn.sigma_p_x(fs, 8, x))))
    checks["fs_density_constant"] = info["fs_sigma_sup"] < 1e-8

    # curvature identity on three paths
    paths = [constant_shift(fs, 0.3), bump_path(fs, sech_bump(0.2)),
             generic_toric_path(fs, sech_bump(0.3), sech_bump(0.2, 1.0), sech_bump(0.05, -1.0))]
    worst = 0.0
    for path in paths:
        t = complex(*rng.uniform(-0.3, 0.3, 2))
        for p in (2, 4):
            E = di.curvature_E(path, p, t)
            a = float(np.linalg.norm(E.Q - E.first_term - E.second_term))
            worst = max(worst, 0.0 if a < 1e-9 else E.residual)
    info["identity_worst"] = worst
    checks["identity"] = worst < 1e-6

    # Hormander positivity of the A-form on random data
    lo = np.inf
    for _ in range(10):
        amp = rng.normal(size=3)
        cen = rng.uniform(-2.0, 2.0, 3)
        mu = lambda x, n=0, amp=amp, cen=cen: sum(a * sech_bump(1.0, c)(x, n) for a, c in zip(amp, cen))
        af = di.A_form(fs, 4, mu)
        u = rng.normal(size=af.gram.shape[0]) + 1j * rng.normal(size=af.gram.shape[0])
        lo = min(lo, af.value(u) / af.norm2(u))
    info["A_form_min"] = lo
    checks["A_form_nonnegative"] = lo >= -1e-10

    # degeneracy: pullback family and holomorphic gradient
    info["pullback_norm"] = max(di.curvature_E(pullback_path(fs, 1.0), p, 0.0).operator_norm() for p in (2, 4))
    checks["pullback_flat"] = info["pullback_norm"] < 1e-6
    killing = sigmoid_poly([1.0, -2.0])
    info["killing_A_max"] = float(np.max(np.abs(di.A_form(fs, 4, killing).eigenvalues())))
    checks["holomorphic_gradient"] = info["killing_A_max"] < 1e-8

    # F-type bound on a path with c >= 0
    F = di.curvature_F(bump_path(fs, sech_bump(0.2)), 4, 0.0)
    info["F_bound_excess"] = F.residual
    checks["F_bound"] = F.residual <= 1e-6

    # constant-shift geodesic: exact oracle, e(p) equals the endpoint remainder
    shift = fs.shifted(0.3)
    oracle = geo.toric_geodesic(fs, shift)
    ps = [4, 8, 16, 32]
    e = [geo.sup_distance(fs, shift, p, oracle, np.linspace(0, 1, 5), np.linspace(-10, 10, 41)) for p in ps]
    closed = [abs(np.log((p - 1) / (2 * np.pi))) / p for p in ps]
    info["shift_e"], info["shift_closed"] = e, closed
    checks["shift_geodesic"] = oracle.residual < 1e-8 and np.allclose(e, closed, rtol=1e-8, atol=1e-12)

    # functionals
    bump = fs.with_bump(0.1)
    I_p, I_c = fn.I_energy(bump, fs, "path"), fn.I_energy(bump, fs, "closed")
    info["I_path_vs_closed"] = abs(I_p - I_c)
    checks["I_closed_form"] = abs(I_p - I_c) < 1e-10
    info["tilde_L_shift"] = abs(fn.tilde_L_p(bump.shifted(0.7), 6, fs) - fn.tilde_L_p(bump, 6, fs))
    checks["tilde_L_shift_invariant"] = info["tilde_L_shift"] < 1e-10

    # generalized eigenproblem on a random pair
    n = 6
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    B = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    space = SectionSpace(1, n + 1)
    G0 = HermitianForm.from_matrix(space, A @ A.conj().T + n * np.eye(n))
    G1 = HermitianForm.from_matrix(space, B @ B.conj().T + n * np.eye(n))
    ge = gen_eigen(G0, G1)
    M0, M1 = G0.matrix(), G1.matrix()
    V = ge.raw()
    lam_res = float(np.max(np.abs(M1 @ V - M0 @ V * np.exp(2 * ge.lam))))
    info["gen_eigen_residual"] = lam_res
    info["log_det_check"] = abs(log_det(G0) - float(np.linalg.slogdet(M0)[1]))
    checks["gen_eigen"] = lam_res < 1e-8 and info["log_det_check"] < 1e-10

    _csv(out / "selftest.csv", ["check", "passed"], sorted((k, int(v)) for k, v in checks.items()))
    return info, checks


RUNNERS = {"geodesic": run_geodesic, "curvature": run_curvature, "asymptotics": run_asymptotics,
           "functionals": run_functionals, "selftest": run_selftest}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fiberlab", description="Direct-image curvature and Bergman geodesics on P^1.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--out", help="output directory (overrides config 'out')")
    ap.add_argument("--threads", type=int, help="worker threads for per-p runs")
    ap.add_argument("--seed", type=int, help="seed for random property sweeps")
    return ap


def run(subcommand: str, cfg: ExperimentConfig, out: Path) -> int:
    """Run one experiment, write ``summary.json`` and return the exit code."""
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary, checks = RUNNERS[subcommand](cfg, out)
        error = None
    except (geo.GeodesicError, QuadratureError, np.linalg.LinAlgError) as exc:
        summary, checks, error = {}, {"completed": False}, f"{type(exc).__name__}: {exc}"
    doc = {"schema_version": SCHEMA_VERSION, "experiment": subcommand, "config": {k: v for k, v in cfg.values.items() if k != "out"},
           "checks": checks, "passed": all(checks.values()), "results": summary}
    if error:
        doc["error"] = error
    (out / "summary.json").write_text(json.dumps(_num(doc), indent=1, sort_keys=True) + "\n")
    return 0 if doc["passed"] else 2


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config, args.subcommand)
        for key in ("out", "threads", "seed"):
            val = getattr(args, key)
            if val is not None:
                if not _TOP[key][0](val):
                    raise ConfigError(f"--{key}: expected {_TOP[key][1]}, got {val!r}")
                cfg.values[key] = val
        path = Path(cfg["out"])
    except ConfigError as exc:
        print(f"fiberlab: error: {exc}", file=sys.stderr)
        return 1
    try:
        code = run(args.subcommand, cfg, path)
    except ConfigError as exc:
        print(f"fiberlab: error: {exc}", file=sys.stderr)
        return 1
    status = "all checks passed" if code == 0 else "some checks failed"
    print(f"fiberlab {args.subcommand}: {status}; see {path / 'summary.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
