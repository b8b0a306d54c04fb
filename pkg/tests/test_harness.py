import json

import pytest
import yaml
from oracles import ode_threshold

from paraslab.harness import (
    EXIT_DIVERGED,
    EXIT_INVALID,
    EXIT_OK,
    WORKERS_ENV,
    ConfigError,
    load_config,
    resolved_dict,
    run_config,
    sweep_threshold,
    worker_count,
)

CLASSIFY = {"task": "classify", "params": {"N": 3, "p": 2, "q": 3}}

EVOLVE_A = {
    "task": "evolve",
    "params": {"N": 1, "p": 4, "q": 4},
    "profile": {"c1": 1000.0, "c2": 1000.0},
    "grid": {"L": 8, "M": 256},
    "time": {"t_end": 0.5, "nodes": 32},
}

# spatially constant data on the torus: the system reduces to u' = v^p, v' = u^q
ODE_SWEEP = {
    "task": "sweep",
    "params": {"N": 1, "p": 2, "q": 3},
    "profile": {"kind": "constant", "c1": 1.0, "c2": 1.0},
    "grid": {"L": 1, "M": 16},
    "time": {"t_end": 1.0, "nodes": 64},
    "sweep": {"param": "joint", "lo": 0.1, "hi": 10.0, "steps": 20},
}


def test_classify_config(tmp_path):
    res = run_config(CLASSIFY, out_dir=tmp_path)
    assert res.exit_code == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["label"] == "A"
    resolved = yaml.safe_load((tmp_path / "resolved-config.yaml").read_text())
    assert resolved["grid"] == {"L": 8.0, "M": 256, "n_gauss": 8}
    assert (tmp_path / "timing.json").exists()


def test_unknown_key_rejected():
    res = run_config({**CLASSIFY, "params": {"N": 3, "p": 2, "q": 3, "alpha_typo": 1}})
    assert res.exit_code == EXIT_INVALID
    assert "alpha_typo" in res.message
    with pytest.raises(ConfigError, match="alpha_typo"):
        load_config({**CLASSIFY, "alpha_typo": 1})


def test_rational_literal():
    cfg = load_config({"task": "classify", "params": {"N": 2, "p": "5/3", "q": 3}})
    assert run_config(cfg).report["label"] == "B"
    assert resolved_dict(cfg)["params"]["p"] == "5/3"


def test_invalid_params_exit_code():
    res = run_config({"task": "classify", "params": {"N": 2, "p": 3, "q": 2}})
    assert res.exit_code == EXIT_INVALID


def test_evolve_diverged_exit_code(tmp_path):
    res = run_config(EVOLVE_A, out_dir=tmp_path)
    assert res.exit_code == EXIT_DIVERGED
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "diverged"
    assert (tmp_path / "tables" / "iterations.csv").exists()
    assert list((tmp_path / "fields").glob("u_cp*.bin"))


def test_evolve_small_converges():
    cfg = {**EVOLVE_A, "profile": {"c1": 1e-3, "c2": 1e-3}}
    res = run_config(cfg)
    assert res.exit_code == EXIT_OK
    assert res.report["status"] == "converged"


def test_reports_byte_identical(tmp_path):
    cfg = {**EVOLVE_A, "profile": {"c1": 0.05, "c2": 0.05}}
    run_config(cfg, out_dir=tmp_path / "a")
    run_config(cfg, out_dir=tmp_path / "b")
    for name in ("report.json", "tables/iterations.csv", "fields/u_cp0.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("case, modulator", [("D", "h1_log_exponent"), ("E", "h2_log_exponent")])
def test_missing_modulator(case, modulator):
    params = {"D": {"N": 1, "p": 1, "q": 4}, "E": {"N": 1, "p": 1, "q": 3}}[case]
    cfg = {"task": "profile", "params": params}
    res = run_config(cfg)
    assert res.exit_code == EXIT_INVALID
    assert "modulator" in res.message
    ok = run_config({**cfg, "profile": {modulator: -1.0}})
    assert ok.exit_code == EXIT_OK
    assert ok.report["case"] == case


def test_case_override_mismatch():
    res = run_config({**CLASSIFY, "task": "profile", "case": "B"})
    assert res.exit_code == EXIT_INVALID


def test_check_necessary_task():
    res = run_config({"task": "check-necessary", "params": {"N": 3, "p": 2, "q": 3}})
    assert res.exit_code == EXIT_OK
    assert res.report["verdict"] == "bounded"


def test_check_lemma23_task():
    res = run_config({"task": "check-lemma23", "check": {"a": 0.0, "b": 0.0, "t_grid": [0.5]}})
    assert res.report["fitted_C"] == pytest.approx(1.0)


def test_worker_count(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert worker_count() == 3
    assert worker_count(load_config({**ODE_SWEEP, "sweep": {"workers": 2}})) == 2
    monkeypatch.setenv(WORKERS_ENV, "many")
    with pytest.raises(ConfigError):
        worker_count()


def test_sweep_coupling_off_never_diverges():
    cfg = load_config({**ODE_SWEEP, "solver": {"coupling": False}, "sweep": {"steps": 4, "max_expand": 2}})
    res = sweep_threshold(cfg)
    assert not res.established
    assert res.message == "bracket not established, all converged"
    assert res.c_star is None


def test_sweep_matches_ode_threshold(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "2")
    res = sweep_threshold(load_config(ODE_SWEEP))
    assert res.established
    assert not res.violations
    exact = ode_threshold(2, 3, t_blow=1.0)
    assert res.c_star == pytest.approx(exact, rel=0.05)
    # bisection arithmetic: width halves every step
    lo, hi = res.bracket_history[0]
    assert res.width == pytest.approx((hi - lo) * 2.0**-20, rel=1e-12)
    for (a, b), (c, d) in zip(res.bracket_history, res.bracket_history[1:]):
        assert d - c == pytest.approx(0.5 * (b - a), rel=1e-12)


def test_sweep_bracket_expansion():
    cfg = load_config({**ODE_SWEEP, "sweep": {"lo": 0.1, "hi": 0.5, "steps": 2}})
    res = sweep_threshold(cfg)
    assert res.established
    assert res.bracket_history[0] == (0.1, 2.0)


def test_sweep_config_errors():
    cfg = load_config(ODE_SWEEP)
    with pytest.raises(ConfigError):
        sweep_threshold(cfg, lo=2.0, hi=1.0)
    with pytest.raises(ConfigError):
        sweep_threshold(cfg, param="c3")
