"""Command line entry point: paraslab classify|profile|evolve|check|sweep."""
from __future__ import annotations

import argparse
import sys
from typing import Optional

import yaml

from .harness import EXIT_INVALID, ConfigError, dumps, run_config


def _base(sub, name, help_):
    p = sub.add_parser(name, help=help_)
    p.add_argument("--config", help="YAML config file; flags override its values")
    p.add_argument("--out", help="output directory for report.json, tables/, fields/")
    p.add_argument("--json", action="store_true", help="print the JSON report")
    return p


def _params_flags(p):
    p.add_argument("--n", type=int, dest="N")
    p.add_argument("--p", dest="p", help="number or rational literal such as 5/3")
    p.add_argument("--q", dest="q")
    p.add_argument("--d1", type=float, dest="D1")
    p.add_argument("--d2", type=float, dest="D2")


def _profile_flags(p):
    p.add_argument("--case", help="a..f or auto")
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--kind", choices=["optimal", "constant", "atom"])
    p.add_argument("--h1-table", dest="h1_table")
    p.add_argument("--h2-table", dest="h2_table")
    p.add_argument("--h1-log", type=float, dest="h1_log_exponent", help="h1 = |log(r/2)|^value")
    p.add_argument("--h2-log", type=float, dest="h2_log_exponent", help="h2 = |log(r/2)|^value")
    p.add_argument("--perturb", type=float, help="shift the singular power of mu")


def _evolve_flags(p):
    p.add_argument("--L", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--nodes", type=int)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--no-coupling", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="paraslab", description="Parabolic systems with singular initial data.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = _base(sub, "classify", "case label and critical exponents")
    _params_flags(p)

    p = _base(sub, "profile", "optimal singular initial data for a case")
    _params_flags(p)
    _profile_flags(p)

    p = _base(sub, "evolve", "Picard iteration of the mild formulation")
    _params_flags(p)
    _profile_flags(p)
    _evolve_flags(p)

    p = _base(sub, "check", "bound checks for the condition functionals and lemmas")
    p.add_argument("which", choices=["necessary", "sufficient", "lemma21", "lemma22", "lemma23"])
    _params_flags(p)
    _profile_flags(p)
    for name in ("alpha", "beta", "a", "b", "t", "T"):
        p.add_argument(f"--{name}", type=float, dest=f"ck_{name}")
    p.add_argument("--r-star", type=float, dest="ck_r_star")
    p.add_argument("--f-table", dest="ck_f_table")
    p.add_argument("--f-log", type=float, dest="ck_f_log_exponent")
    p.add_argument("--f-const", type=float, dest="ck_f_const")

    p = _base(sub, "sweep", "amplitude threshold bisection")
    _params_flags(p)
    _profile_flags(p)
    _evolve_flags(p)
    p.add_argument("--param", choices=["c1", "c2", "joint"])
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--workers", type=int)
    return ap


def _set(d: dict, section: str, key: str, value):
    if value is not None:
        d.setdefault(section, {})[key] = value


def config_from_args(args) -> dict:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot load config: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
    ns = vars(args)
    cmd = args.command
    data["task"] = f"check-{args.which}" if cmd == "check" else cmd
    if cmd == "check" and args.which == "lemma22" and ns.get("p") is None and ns.get("q") is None:
        # the annulus estimate only needs the dimension
        _set(data, "check", "N", ns.get("N"))
    else:
        for key in ("N", "p", "q", "D1", "D2"):
            _set(data, "params", key, ns.get(key))
    if ns.get("case") is not None:
        data["case"] = ns["case"]
    for key in ("c1", "c2", "kind", "h1_table", "h2_table", "h1_log_exponent", "h2_log_exponent", "perturb"):
        _set(data, "profile", key, ns.get(key))
    _set(data, "grid", "L", ns.get("L"))
    _set(data, "grid", "M", ns.get("M"))
    _set(data, "time", "t_end", ns.get("t_end"))
    _set(data, "time", "nodes", ns.get("nodes"))
    _set(data, "solver", "max_iter", ns.get("max_iter"))
    if ns.get("no_coupling"):
        _set(data, "solver", "coupling", False)
    for key, val in ns.items():
        if key.startswith("ck_"):
            _set(data, "check", key[3:], val)
    for key in ("param", "lo", "hi", "steps", "workers"):
        _set(data, "sweep", key, ns.get(key))
    return data


def _summary(report: dict) -> str:
    if "label" in report:
        return f"case {report['label']}  ratio={report['ratio']:.6g}  N/2={report['half_dim']:g}"
    if "verdict" in report:
        return f"{report['functional']}: fitted_C={report['fitted_C']} slope={report['slope']} verdict={report['verdict']}"
    if "c_star" in report:
        return f"sweep {report['param']}: {report['message']}  c*={report['c_star']}  width={report['width']}"
    if "status" in report:
        return f"status={report['status']}  iterations={len(report.get('iterations', []))}"
    if "ratio" in report:
        return f"integral={report['integral']} bound={report['bound']} ratio={report['ratio']}"
    return dumps(report).strip()


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    result = run_config(data, out_dir=args.out)
    if result.exit_code == EXIT_INVALID:
        print(f"error: {result.message}", file=sys.stderr)
        return EXIT_INVALID
    print(dumps(result.report) if args.json else _summary(result.report), end="" if args.json else "\n")
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
