import json
import subprocess
import sys

import pytest

from fiberlab.cli import ConfigError, main, validate_config


def _run(tmp_path, sub, cfg=None, *extra):
    args = [sub, "--out", str(tmp_path / "out")]
    if cfg is not None:
        tmp_path.mkdir(parents=True, exist_ok=True)
        (tmp_path / "cfg.json").write_text(json.dumps(cfg))
        args += ["--config", str(tmp_path / "cfg.json")]
    code = main(args + list(extra))
    summary = tmp_path / "out" / "summary.json"
    return code, (json.loads(summary.read_text()) if summary.exists() else None)


def test_selftest_passes_and_is_deterministic(tmp_path):
    code, s1 = _run(tmp_path / "a", "selftest")
    assert code == 0 and s1["passed"]
    _run(tmp_path / "b", "selftest")
    assert (tmp_path / "a/out/summary.json").read_bytes() == (tmp_path / "b/out/summary.json").read_bytes()


def test_selftest_seed_changes_random_sweeps(tmp_path):
    _, s1 = _run(tmp_path / "a", "selftest", None, "--seed", "1")
    _, s2 = _run(tmp_path / "b", "selftest", None, "--seed", "2")
    assert s1["results"]["A_form_min"] != s2["results"]["A_form_min"]


def test_geodesic_constant_shift(tmp_path):
    code, s = _run(tmp_path, "geodesic", {"phi1": "fs_shift(0.3)", "p_list": [10, 20, 40, 80],
                                          "x_grid": 201, "s_grid": 5})
    assert code == 0
    assert s["results"]["rate_fit"]["verdict"] == "PASS"
    assert (tmp_path / "out/geodesic.csv").read_text().startswith("p,e,e_p_over_log_p")
    assert (tmp_path / "out/geodesic.svg").read_text().startswith("<svg")


def test_threads_do_not_change_results(tmp_path):
    cfg = {"phi1": "fs_bump(0.1)", "p_list": [8, 16, 24, 32], "x_grid": 101, "s_grid": 5, "domination": False}
    _, a = _run(tmp_path / "a", "geodesic", cfg, "--threads", "1")
    _, b = _run(tmp_path / "b", "geodesic", cfg, "--threads", "3")
    assert a["results"]["e"] == pytest.approx(b["results"]["e"], rel=1e-12)


def test_curvature_report(tmp_path):
    code, s = _run(tmp_path, "curvature", {"path": {"family": "bump", "eps": 0.2, "linear": 0.1}, "t": [0.1, 0.05]})
    assert code == 0 and s["checks"]["identity"] and s["checks"]["E_positive"]
    header = (tmp_path / "out/curvature.csv").read_text().splitlines()[0]
    assert header == "p,kind,dim,trace,min_eigenvalue,max_eigenvalue,residual"


def test_asymptotics_literal_prediction_fails_with_details(tmp_path):
    code, s = _run(tmp_path, "asymptotics", {"p_list": [8, 16, 32, 64]})
    assert code == 2
    assert s["checks"]["trace_residual"] is False
    assert s["results"]["relative_residual_at_pmax"] > 0.05


def test_functionals_small_run(tmp_path):
    code, s = _run(tmp_path, "functionals", {"path": {"family": "bump", "eps": 0.2}, "p": 4,
                                             "s_values": [-0.2, -0.1, 0.0, 0.1, 0.2]})
    assert code == 0 and s["checks"]["L_p_convex"]
    assert (tmp_path / "out/functionals.csv").exists()


@pytest.mark.parametrize("cfg,msg", [
    ({"rtol": -1e-3}, "rtol"),
    ({"tol": 0}, "tol"),
    ({"bogus": 1}, "unknown config key"),
    ({"path": {"family": "bump", "wdith": 1.0}}, "unknown key"),
    ({"path": {"family": "spiral"}}, "unknown family"),
    ({"p_list": [8, 4]}, "p_list"),
    ({"experiment": "curvature"}, "not 'geodesic'"),
])
def test_config_errors(cfg, msg):
    with pytest.raises(ConfigError, match=msg):
        validate_config(cfg, "geodesic")


def test_bad_config_exit_code(tmp_path, capsys):
    code, _ = _run(tmp_path, "geodesic", {"rtol": -1.0})
    assert code == 1
    assert "rtol" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["selftest", "--threads", "0"]) == 1


def test_bad_preset_exit_code(tmp_path):
    code, _ = _run(tmp_path, "geodesic", {"phi1": "fs_wobble(1)"})
    assert code == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fiberlab", "selftest", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "all checks passed" in proc.stdout
