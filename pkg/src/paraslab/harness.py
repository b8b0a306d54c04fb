"""Configuration-driven runs, amplitude threshold sweeps and output files."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import diagnostics
from .exponents import (
    HypothesisError,
    ParameterError,
    SystemParams,
    classify,
    derive_exponents,
    parse_number,
)
from .mild import PicardOptions, picard_evolve
from .profiles import (
    InfiniteMassError,
    LogModulator,
    ProfileError,
    RadialProfile,
    TableModulator,
    atom_profile,
    constant_profile,
    make_optimal_profile,
    sample_to_grid,
)
from .semigroup import GridField, TailCriterionError, TimeGrid

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3

WORKERS_ENV = "PARASLAB_WORKERS"

TASKS = (
    "classify",
    "profile",
    "evolve",
    "check-necessary",
    "check-sufficient",
    "check-lemma21",
    "check-lemma22",
    "check-lemma23",
    "sweep",
)


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


Number = Union[float, int, str]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsSpec(_Section):
    N: int = Field(ge=1)
    p: Number
    q: Number
    D1: float = 1.0
    D2: float = 1.0

    @field_validator("p", "q")
    @classmethod
    def _rational(cls, v):
        try:
            parse_number(v)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a number or rational literal: {v!r}") from exc
        return v

    def build(self) -> SystemParams:
        return SystemParams(self.N, parse_number(self.p), parse_number(self.q), self.D1, self.D2)


class ProfileSpec(_Section):
    kind: Literal["optimal", "constant", "atom"] = "optimal"
    c1: float = Field(1.0, ge=0)
    c2: float = Field(1.0, ge=0)
    h1_table: Optional[str] = None
    h2_table: Optional[str] = None
    h1_log_exponent: Optional[float] = None
    h2_log_exponent: Optional[float] = None
    perturb: float = 0.0


class GridSpec(_Section):
    L: float = Field(8.0, gt=0)
    M: int = Field(256, ge=2)
    n_gauss: int = Field(8, ge=1)


class TimeSpec(_Section):
    t_end: float = Field(1.0, gt=0)
    nodes: int = Field(64, ge=2)
    ratio: float = Field(1.15, gt=0)
    first_step: Optional[float] = Field(None, gt=0)

    def build(self) -> TimeGrid:
        if self.first_step is not None:
            return TimeGrid.graded_first_step(self.t_end, self.nodes, self.first_step)
        return TimeGrid.graded(self.t_end, self.nodes, self.ratio)


class SolverSpec(_Section):
    max_iter: int = Field(200, ge=1)
    cap: float = Field(1e8, gt=0)
    growth_factor: Optional[float] = 10.0
    tol_conv: float = Field(1e-8, gt=0)
    rule: Literal["trapezoid", "left"] = "trapezoid"
    coupling: bool = True
    p_override: Optional[float] = None
    q_override: Optional[float] = None
    n_checkpoints: int = Field(8, ge=1)
    monotone_tol: float = 1e-10
    check_tail: bool = True


class CheckSpec(_Section):
    T: float = Field(1.0, gt=0)
    sigma_grid: Optional[list[float]] = None
    t_grid: Optional[list[float]] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    r_star: Optional[float] = None
    f_table: Optional[str] = None
    a: Optional[float] = None
    b: Optional[float] = None
    t: Optional[float] = None
    f_const: Optional[float] = None
    f_log_exponent: Optional[float] = None
    t_cut: float = 1e-2
    N: Optional[int] = Field(None, ge=1)  # dimension for lemma22 when no params section is given


class SweepSpec(_Section):
    param: Literal["c1", "c2", "joint"] = "joint"
    lo: float = Field(1e-3, gt=0)
    hi: float = Field(1e3, gt=0)
    steps: int = Field(20, ge=0)
    expand: float = Field(4.0, gt=1)
    max_expand: int = Field(8, ge=0)
    workers: Optional[int] = Field(None, ge=1)


class RunConfig(_Section):
    task: Literal[TASKS] = "classify"  # type: ignore[valid-type]
    params: Optional[ParamsSpec] = None
    case: str = "auto"
    profile: ProfileSpec = ProfileSpec()
    grid: GridSpec = GridSpec()
    time: TimeSpec = TimeSpec()
    solver: SolverSpec = SolverSpec()
    check: CheckSpec = CheckSpec()
    sweep: SweepSpec = SweepSpec()
    output: Optional[str] = None

    @field_validator("case")
    @classmethod
    def _case(cls, v):
        v = str(v).strip()
        if v.lower() == "auto":
            return "auto"
        if v.upper() not in ("A", "B", "C", "D", "E", "F"):
            raise ValueError(f"case must be auto or one of A-F, got {v!r}")
        return v.upper()


def _format_validation(err: ValidationError) -> str:
    msgs = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        if e["type"] == "extra_forbidden":
            msgs.append(f"unknown key '{e['loc'][-1]}' (at {loc})")
        else:
            msgs.append(f"{loc}: {e['msg']}")
    return "; ".join(msgs)


def load_config(source: Union[str, os.PathLike, dict]) -> RunConfig:
    """Validate a mapping or a YAML file into a RunConfig (ConfigError on failure)."""
    if isinstance(source, dict):
        data = source
    else:
        try:
            with open(source) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def resolved_dict(config: RunConfig) -> dict:
    return config.model_dump(mode="json")


# ---------------------------------------------------------------------------
# JSON and file helpers


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _write_csv(path: Path, rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def worker_count(config: Optional[RunConfig] = None) -> int:
    if config is not None and config.sweep.workers:
        return config.sweep.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return 1


# ---------------------------------------------------------------------------
# building blocks


def _params(config: RunConfig) -> SystemParams:
    if config.params is None:
        raise ConfigError(f"task {config.task} needs a params section")
    try:
        return config.params.build()
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def _case(config: RunConfig, params: SystemParams) -> str:
    actual = classify(params).label
    if config.case != "auto" and config.case != actual:
        raise ConfigError(f"case {config.case} does not match parameters (classified as {actual})")
    return actual


def _modulator(table: Optional[str], log_exp: Optional[float], what: str):
    if table is not None:
        try:
            mod = TableModulator.from_file(table)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{what} table: {exc}") from None
        return mod
    if log_exp is not None:
        return LogModulator(log_exp)
    return None


def build_profiles(config: RunConfig, params: SystemParams, label: str) -> tuple[RadialProfile, RadialProfile]:
    ps = config.profile
    N = params.N
    if ps.kind == "constant":
        return constant_profile(N, ps.c1), constant_profile(N, ps.c2)
    if ps.kind == "atom":
        return atom_profile(N, ps.c1), atom_profile(N, ps.c2)
    h = None
    if label == "D":
        h = _modulator(ps.h1_table, ps.h1_log_exponent, "h1")
        if h is None:
            raise ConfigError("case D needs a modulator: profile.h1_table or profile.h1_log_exponent")
    elif label == "E":
        h = _modulator(ps.h2_table, ps.h2_log_exponent, "h2")
        if h is None:
            raise ConfigError("case E needs a modulator: profile.h2_table or profile.h2_log_exponent")
    mu, nu = make_optimal_profile(params, label, ps.c1, ps.c2, h=h)
    if ps.perturb:
        mu = mu.perturbed(ps.perturb)
    return mu, nu


def _grid_fields(config: RunConfig, mu: RadialProfile, nu: RadialProfile) -> tuple[GridField, GridField]:
    g = config.grid
    out = []
    for prof in (mu, nu):
        if math.isinf(prof.cutoff) and prof.power == 0 and prof.atom == 0 and prof.modulator is None and prof.logpow == 0:
            out.append(GridField.constant(prof.dim, g.L, g.M, prof.amplitude))
        else:
            out.append(sample_to_grid(prof, g.L, g.M, g.n_gauss))
    return out[0], out[1]


def picard_options(config: RunConfig) -> PicardOptions:
    s = config.solver
    return PicardOptions(
        max_iter=s.max_iter,
        cap=s.cap,
        growth_factor=s.growth_factor,
        tol_conv=s.tol_conv,
        rule=s.rule,
        coupling=s.coupling,
        p=s.p_override,
        q=s.q_override,
        n_checkpoints=s.n_checkpoints,
        monotone_tol=s.monotone_tol,
        check_tail=s.check_tail,
    )


def evolve(config: RunConfig, c1: Optional[float] = None, c2: Optional[float] = None):
    """Run the Picard iteration for the configured data (amplitudes overridable)."""
    params = _params(config)
    label = _case(config, params)
    if c1 is not None or c2 is not None:
        prof = config.profile.model_copy(update={
            "c1": config.profile.c1 if c1 is None else c1,
            "c2": config.profile.c2 if c2 is None else c2,
        })
        config = config.model_copy(update={"profile": prof})
    mu, nu = build_profiles(config, params, label)
    mg, ng = _grid_fields(config, mu, nu)
    tg = config.time.build()
    return picard_evolve(params, mg, ng, tg, options=picard_options(config))


# ---------------------------------------------------------------------------
# threshold sweep


@dataclass
class SweepResult:
    param: str
    established: bool
    bracket_history: list = field(default_factory=list)
    points: list = field(default_factory=list)
    c_star: Optional[float] = None
    width: Optional[float] = None
    violations: list = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "param": self.param,
            "established": self.established,
            "bracket_history": [list(b) for b in self.bracket_history],
            "points": sorted(self.points, key=lambda d: d["amplitude"]),
            "c_star": self.c_star,
            "width": self.width,
            "violations": self.violations,
            "message": self.message,
        }


def _amplitudes(config: RunConfig, param: str, value: float) -> tuple[float, float]:
    ps = config.profile
    if param == "c1":
        return value, ps.c2
    if param == "c2":
        return ps.c1, value
    return ps.c1 * value, ps.c2 * value


def _point(config: RunConfig, param: str, value: float) -> dict:
    c1, c2 = _amplitudes(config, param, value)
    rep = evolve(config, c1, c2)
    return {"amplitude": float(value), "c1": c1, "c2": c2, **rep.summary()}


def _audit(points: list) -> list:
    div = [p["amplitude"] for p in points if p["status"] == "diverged"]
    if not div:
        return []
    lowest = min(div)
    return [
        {"amplitude": p["amplitude"], "status": p["status"], "above_diverged": lowest}
        for p in points
        if p["status"] != "diverged" and p["amplitude"] > lowest
    ]


def sweep_threshold(
    config: RunConfig,
    param: Optional[str] = None,
    lo: Optional[float] = None,
    hi: Optional[float] = None,
    steps: Optional[int] = None,
    workers: Optional[int] = None,
) -> SweepResult:
    """Bisect the amplitude separating converged from diverged evolutions.

    The bracket ends are checked first; a diverged lower end is divided and
    a non-diverged upper end multiplied by ``sweep.expand``, at most
    ``sweep.max_expand`` times each.  In joint mode both constants are
    multiplied by the swept factor.
    """
    sw = config.sweep
    param = param or sw.param
    lo = sw.lo if lo is None else float(lo)
    hi = sw.hi if hi is None else float(hi)
    steps = sw.steps if steps is None else int(steps)
    if param not in ("c1", "c2", "joint"):
        raise ConfigError(f"sweep param must be c1, c2 or joint, got {param!r}")
    if not 0 < lo < hi:
        raise ConfigError("sweep needs 0 < lo < hi")
    n_workers = workers or worker_count(config)
    res = SweepResult(param=param, established=False)

    def run_many(values):
        if n_workers > 1 and len(values) > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                out = list(pool.map(lambda v: _point(config, param, v), values))
        else:
            out = [_point(config, param, v) for v in values]
        res.points.extend(out)
        return out

    p_lo, p_hi = run_many([lo, hi])
    for _ in range(sw.max_expand):
        todo = []
        if p_lo["status"] == "diverged":
            lo /= sw.expand
            todo.append(("lo", lo))
        if p_hi["status"] != "diverged":
            hi *= sw.expand
            todo.append(("hi", hi))
        if not todo:
            break
        for (end, _), pt in zip(todo, run_many([v for _, v in todo])):
            if end == "lo":
                p_lo = pt
            else:
                p_hi = pt
    lo_ok, hi_div = p_lo["status"] != "diverged", p_hi["status"] == "diverged"
    if not (lo_ok and hi_div):
        if lo_ok:
            res.message = "bracket not established, all converged"
        elif hi_div:
            res.message = "bracket not established, all diverged"
        else:
            res.message = "bracket not established"
        res.violations = _audit(res.points)
        return res

    res.established = True
    res.bracket_history.append((lo, hi))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        (pt,) = run_many([mid])
        if pt["status"] == "diverged":
            hi = mid
        else:
            lo = mid
        res.bracket_history.append((lo, hi))
    res.violations = _audit(res.points)
    res.width = hi - lo
    if res.violations:
        res.message = "monotonicity audit failed; no threshold claimed"
    else:
        res.c_star = 0.5 * (lo + hi)
        res.message = "threshold bracketed"
    return res


# ---------------------------------------------------------------------------
# task dispatch


def _classify_report(params: SystemParams) -> dict:
    c = classify(params)
    return {
        "label": c.label,
        "ratio": c.ratio,
        "half_dim": c.half_dim,
        "q_fujita": c.q_fujita,
        "params": params.to_dict(),
        "exponents": derive_exponents(params).to_dict(),
    }


def _profile_report(config: RunConfig, params: SystemParams, label: str):
    mu, nu = build_profiles(config, params, label)
    r = np.geomspace(1e-6, 1.0, 61)
    rows = [["r", "mu", "nu"]] + [[repr(float(a)), repr(float(b)), repr(float(c))] for a, b, c in zip(r, mu(r), nu(r))]
    report = {
        "case": label,
        "params": params.to_dict(),
        "mu": mu.to_dict(),
        "nu": nu.to_dict(),
        "mu_locally_finite": mu.locally_finite if mu.amplitude > 0 else True,
        "nu_locally_finite": nu.locally_finite if nu.amplitude > 0 else True,
    }
    return report, {"profile": rows}


def _f_extra(ck: CheckSpec):
    if ck.f_table is not None:
        return _modulator(ck.f_table, None, "f")
    if ck.f_log_exponent is not None:
        return LogModulator(ck.f_log_exponent)
    return None


def _check_report(config: RunConfig):
    ck = config.check
    kind = config.task.split("-", 1)[1]
    if kind == "lemma23":
        if ck.a is None or ck.b is None:
            raise ConfigError("lemma23 needs check.a and check.b")
        if ck.t is not None:
            I, B, R = diagnostics.lemma23_log_integral(ck.a, ck.b, ck.t)
            return {"functional": "lemma23", "a": ck.a, "b": ck.b, "t": ck.t,
                    "integral": I, "bound": B, "ratio": R}, {}
        grid = ck.t_grid or list(np.geomspace(1e-6, 0.9, 33))
        rep = diagnostics.lemma23_check(ck.a, ck.b, grid)
        return rep.to_dict(), {rep.functional: rep.csv_rows()}
    if kind == "lemma22":
        if ck.a is None or ck.r_star is None:
            raise ConfigError("lemma22 needs check.a and check.r_star")
        if ck.N is not None:
            N = ck.N
        elif config.params is not None:
            N = config.params.N
        else:
            raise ConfigError("lemma22 needs check.N (or params.N)")
        f = _f_extra(ck)
        if f is None:
            f = ck.f_const if ck.f_const is not None else 1.0
        grid = ck.t_grid or list(np.geomspace(1e-5, 1e-2, 13))
        rep = diagnostics.lemma22_check(N, ck.a, f, ck.r_star, grid, t_cut=ck.t_cut)
        return rep.to_dict(), {rep.functional: rep.csv_rows()}
    params = _params(config)
    label = _case(config, params)
    mu, nu = build_profiles(config, params, label)
    if kind == "lemma21":
        grid = ck.t_grid or list(np.geomspace(1e-4, 1e-1, 20))
        rep = diagnostics.lemma21_check(mu, grid)
    elif kind == "necessary":
        rep = diagnostics.necessary_condition_check(params, label, mu, nu, ck.T, ck.sigma_grid)
    else:
        extras = {k: getattr(ck, k) for k in ("alpha", "beta", "r_star") if getattr(ck, k) is not None}
        f = _f_extra(ck)
        if f is not None:
            extras["f"] = f
        rep = diagnostics.sufficiency_hypothesis_check(params, label, mu, nu, extras, ck.t_grid)
    return rep.to_dict(), {rep.functional: rep.csv_rows()}


@dataclass
class RunResult:
    exit_code: int
    report: dict
    message: str = ""
    timing: dict = field(default_factory=dict)


def execute(config: RunConfig) -> tuple[RunResult, dict, dict]:
    """Run the task; returns (result, csv tables, binary fields)."""
    tables: dict = {}
    fields_out: dict = {}
    code = EXIT_OK
    task = config.task
    if task == "classify":
        report = _classify_report(_params(config))
    elif task == "profile":
        params = _params(config)
        report, tables = _profile_report(config, params, _case(config, params))
    elif task == "evolve":
        rep = evolve(config)
        report = rep.to_dict()
        su, sv = rep.final_sup if rep.iterations else ([], [])
        tables["iterations"] = [["n", "diff", "sup_u_end", "sup_v_end"]] + [
            [it["n"], repr(it["diff"]), repr(it["sup_u"][-1]), repr(it["sup_v"][-1])] for it in rep.iterations
        ]
        tables["checkpoints"] = [["t", "sup_u", "sup_v"]] + [
            [repr(t), repr(a), repr(b)] for t, a, b in zip(rep.checkpoint_times, su, sv)
        ]
        for k, (u, v) in enumerate(zip(rep.u_checkpoints, rep.v_checkpoints)):
            fields_out[f"u_cp{k}"] = u
            fields_out[f"v_cp{k}"] = v
        if rep.status == "diverged":
            code = EXIT_DIVERGED
        return RunResult(code, report, rep.status, {"wall_time": rep.wall_time}), tables, fields_out
    elif task == "sweep":
        res = sweep_threshold(config)
        report = res.to_dict()
        tables["sweep"] = [["amplitude", "c1", "c2", "status", "iterations"]] + [
            [repr(p["amplitude"]), repr(p["c1"]), repr(p["c2"]), p["status"], p["iterations"]]
            for p in report["points"]
        ]
    else:
        report, tables = _check_report(config)
    return RunResult(code, report), tables, fields_out


def write_outputs(out_dir: Union[str, os.PathLike], config: RunConfig, result: RunResult, tables: dict, fields_out: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "resolved-config.yaml", "w") as fh:
        yaml.safe_dump(resolved_dict(config), fh, sort_keys=True)
    (out / "report.json").write_text(dumps(result.report))
    (out / "timing.json").write_text(dumps(result.timing))
    for name, rows in tables.items():
        _write_csv(out / "tables" / f"{name}.csv", rows)
    if fields_out:
        (out / "fields").mkdir(exist_ok=True)
        for name, fld in fields_out.items():
            fld.write_bin(out / "fields" / f"{name}.bin")
            if fld.dim == 1:
                fld.write_csv(out / "fields" / f"{name}.csv")


_INVALID = (ConfigError, ValueError, ParameterError, HypothesisError, ProfileError, InfiniteMassError, TailCriterionError)


def run_config(config: Union[RunConfig, dict, str, os.PathLike], out_dir=None) -> RunResult:
    """Validate, dispatch and (if an output directory is known) write artifacts.

    Exit codes: 0 success, 2 invalid configuration, 3 evolve diverged.
    """
    start = time.perf_counter()
    try:
        cfg = config if isinstance(config, RunConfig) else load_config(config)
        result, tables, fields_out = execute(cfg)
    except _INVALID as exc:
        return RunResult(EXIT_INVALID, {"error": str(exc)}, str(exc))
    result.timing.setdefault("wall_time", time.perf_counter() - start)
    target = out_dir if out_dir is not None else cfg.output
    if target is not None:
        write_outputs(target, cfg, result, tables, fields_out)
    return result
