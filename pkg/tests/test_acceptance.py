"""Acceptance suite: one PASS/FAIL line per criterion, printed even under capture."""
import math
import time
import warnings

import numpy as np
import pytest
from oracles import ode_solution, ode_threshold

from paraslab.diagnostics import (
    lemma21_check,
    lemma23_check,
    necessary_condition_check,
    sufficiency_hypothesis_check,
)
from paraslab.exponents import (
    CASE_LABELS,
    SystemParams,
    case_b_identity,
    case_condition_holds,
    case_de_margin,
    classify,
    derive_exponents,
)
from paraslab.harness import load_config, sweep_threshold
from paraslab.mild import PicardOptions, picard_evolve, verify_supersolution_caseA
from paraslab.profiles import LogModulator, atom_profile, make_optimal_profile, sample_to_grid, scale_profile
from paraslab.semigroup import GridField, TailCriterionWarning, TimeGrid, apply_semigroup_grid, gaussian

# largest monotonicity violation seen by any Picard run in this module
MONOTONE = {"worst": 0.0, "runs": 0}


def _track(value):
    MONOTONE["worst"] = max(MONOTONE["worst"], float(value))
    MONOTONE["runs"] += 1


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail} [{elapsed:.1f}s / {budget:g}s]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def test_criterion_1_classification(verdict):
    start = time.perf_counter()
    reference = [
        ((3, 2, 3), "A"),
        ((2, "5/3", 3), "B"),
        ((1, 3, 3), "C"),
        ((2, 1, 3), "D"),
        ((2, 1, 2), "E"),
        ((2, 1.5, 1.5), "F"),
    ]
    ok = True
    for args, label in reference:
        params = SystemParams(*args)
        holds = [lab for lab in CASE_LABELS if case_condition_holds(params, lab)]
        ok &= holds == [label] and classify(params).label == label
    rng = np.random.default_rng(20240601)
    count = 0
    while count < 10_000:
        N = int(rng.integers(1, 7))
        p = float(rng.uniform(0.05, 6))
        q = p * float(rng.uniform(1, 8))
        if p * q <= 1.0001:
            continue
        params = SystemParams(N, p, q)
        holds = [lab for lab in CASE_LABELS if case_condition_holds(params, lab)]
        ok &= holds == [classify(params).label]
        count += 1
    # identities on constructed sets
    b_sets = [SystemParams(*a) for a in [(2, "5/3", 3), (1, "13/5", 5), (3, "11/9", 3)]]
    ok &= all(classify(params).label == "B" for params in b_sets)
    worst_b = max(abs(case_b_identity(params)) for params in b_sets)
    worst_de = 0.0
    for args in [(2, 1, 3), (2, 1, 2), (1, 1, 4), (1, 1, 3), (3, "1/2", 5)]:
        params = SystemParams(*args)
        ok &= classify(params).label in ("D", "E")
        p, q, N = params.p, params.q, params.N
        lhs = (p * q - 1) * ((q + 1) / (p * q - 1) - N / 2)
        worst_de = max(worst_de, abs(lhs - case_de_margin(params)))
        ok &= case_de_margin(params) > 0
    ok &= worst_b < 1e-12 and worst_de < 1e-12
    detail = f"6 reference sets + {count} random samples partitioned; B identity {worst_b:.1e}, D/E identity {worst_de:.1e}"
    verdict(1, ok, detail, time.perf_counter() - start, 1.0)


def test_criterion_2_semigroup(verdict):
    start = time.perf_counter()
    errs = []
    for N, M in ((1, 2048), (2, 256)):
        f = GridField.from_function(N, 8.0, M, lambda r: np.where(r < 1.0, 1.0 - r, 0.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TailCriterionWarning)
            a = apply_semigroup_grid(apply_semigroup_grid(f, 1.0, 0.1), 1.0, 0.2)
            b = apply_semigroup_grid(f, 1.0, 0.3)
        law = np.max(np.abs(a.values - b.values)) / f.sup()
        mass = abs(b.mass() / f.mass() - 1)
        neg = max(0.0, -float(b.values.min()))
        errs.append(max(law, mass, neg))
    g = GridField.from_function(1, 16.0, 2048, lambda r: gaussian(1, r, 0.25))
    out = apply_semigroup_grid(g, 1.0, 0.25)
    gauss = float(np.max(np.abs(out.values - gaussian(1, out.radius, 0.5))))
    ok = max(errs) < 1e-9 and gauss < 1e-8
    detail = f"law/mass/positivity {max(errs):.1e} (tol 1e-9), Gaussian sup error {gauss:.1e} (tol 1e-8)"
    verdict(2, ok, detail, time.perf_counter() - start, 10.0)


def test_criterion_3_lemma21(verdict):
    start = time.perf_counter()
    t = np.geomspace(1e-4, 1e-1, 20)
    dev = 0.0
    for N in (1, 2, 3):
        rep = lemma21_check(atom_profile(N, 2.0), t)
        dev = max(dev, float(np.max(np.abs(rep.ratio - (4 * math.pi) ** (-N / 2)))))
    slopes = []
    for N, p in ((1, 3), (2, 2), (3, "5/3")):
        params = SystemParams(N, p, p)
        mu, _ = make_optimal_profile(params, "C", 1.0, 1.0)
        slopes.append(lemma21_check(mu, t).slope)
    ok = dev < 1e-10 and all(abs(s) <= 0.05 for s in slopes)
    detail = f"delta ratio deviation {dev:.1e}; case-C slopes {', '.join(f'{s:+.4f}' for s in slopes)}"
    verdict(3, ok, detail, time.perf_counter() - start, 30.0)


def test_criterion_4_lemma23(verdict):
    start = time.perf_counter()
    t = np.geomspace(1e-6, 0.9, 33)
    worst_cap = -math.inf
    finite = True
    for a in (-0.5, 0, 1, 2):
        for b in (-2, -1, 0, 1, 2.5):
            rep = lemma23_check(a, b, t)
            finite &= math.isfinite(rep.fitted_C)
            if b < 0:
                worst_cap = max(worst_cap, rep.fitted_C - 1 / (a + 1))
    ok = finite and worst_cap <= 1e-10
    detail = f"20 lattice points finite={finite}; max excess over 1/(a+1) for b<0: {worst_cap:.2e}"
    verdict(4, ok, detail, time.perf_counter() - start, 5.0)


def test_criterion_5_ode_oracle(verdict):
    start = time.perf_counter()
    worst = 0.0
    tg = TimeGrid.graded(1.0, 1024, 1.002)
    opts = PicardOptions(max_iter=500, tol_conv=1e-12)
    for p, q in ((2, 3), (1, 2)):
        params = SystemParams(1, p, q)
        # sub-blow-up: ODE blow-up at 2 t_end; near-blow-up: at 1.25 t_end
        for t_blow in (2.0, 1.25):
            A = ode_threshold(p, q, t_blow)
            f = GridField.constant(1, 1.0, 16, A)
            rep = picard_evolve(params, f, f, tg, options=opts)
            _track(rep.max_monotone_violation)
            u, v = ode_solution(p, q, A, A, rep.checkpoint_times)
            assert len(rep.checkpoint_times) == 8
            err = max(np.max(np.abs(np.array(rep.final_sup[0]) / u - 1)), np.max(np.abs(np.array(rep.final_sup[1]) / v - 1)))
            worst = max(worst, float(err)) if rep.status == "converged" else math.inf
    # coupling off: u is the linear flow S(D1 t) mu
    params = SystemParams(1, 4, 4, D1=0.5, D2=2.0)
    mu, nu = make_optimal_profile(params, "A", 1.0, 1.0)
    mg, ng = sample_to_grid(mu, 16.0, 2048), sample_to_grid(nu, 16.0, 2048)
    tg2 = TimeGrid.graded(0.5, 32)
    rep = picard_evolve(params, mg, ng, tg2, options=PicardOptions(coupling=False))
    lin = 0.0
    for k, i in enumerate(rep.checkpoint_indices):
        exact = apply_semigroup_grid(mg, 0.5, tg2.nodes[i], check_tail=False)
        lin = max(lin, float(np.max(np.abs(rep.u_checkpoints[k].values - exact.values))) / exact.sup())
    ok = worst < 1e-4 and lin < 1e-12
    detail = f"ODE max relative error {worst:.1e} (tol 1e-4); coupling-off deviation {lin:.1e} (tol 1e-12)"
    verdict(5, ok, detail, time.perf_counter() - start, 60.0)


# one refinement pair for the threshold dichotomy; the first step resolves
# the smoothing of the grid-capped singular datum (about h^2 / 4)
THRESHOLD_BASE = {
    "task": "sweep",
    "params": {"N": 1, "p": 4, "q": 4},
    "profile": {"c1": 1.0, "c2": 1.0},
    "sweep": {"param": "joint", "lo": 1e-3, "hi": 1e3, "steps": 24},
}


def _threshold_config(M, nodes):
    h = 16.0 / M
    return load_config({
        **THRESHOLD_BASE,
        "grid": {"L": 8.0, "M": M},
        "time": {"t_end": 1.0, "nodes": nodes, "first_step": h * h / 4},
    })


def test_criterion_7_threshold(verdict, monkeypatch):
    monkeypatch.setenv("PARASLAB_WORKERS", "4")
    start = time.perf_counter()
    coarse = sweep_threshold(_threshold_config(1024, 128))
    fine = sweep_threshold(_threshold_config(2048, 160))
    for res in (coarse, fine):
        for pt in res.points:
            _track(pt["max_monotone_violation"])
    ok = True
    for res in (coarse, fine):
        ok &= res.established and res.bracket_history[0] == (1e-3, 1e3) and not res.violations
        by_amp = {pt["amplitude"]: pt["status"] for pt in res.points}
        ok &= by_amp.get(1e-3) == "converged" and by_amp.get(1e3) == "diverged"
    if ok:
        drift = abs(fine.c_star / coarse.c_star - 1)
        ok = drift < 0.10
        detail = f"bracket [1e-3, 1e3] established; c* = {coarse.c_star:.5f} (M=1024), {fine.c_star:.5f} (M=2048), drift {drift:.1%}"
    else:
        detail = f"bracket not established ({coarse.message}; {fine.message})"
    verdict(7, ok, detail, time.perf_counter() - start, 600.0)


def test_criterion_6_monotonicity_and_scaling(verdict):
    start = time.perf_counter()
    params = SystemParams(1, 4, 4)
    mu, nu = make_optimal_profile(params, "A", 0.05, 0.05)
    L, M = 8.0, 2048
    tg = TimeGrid.graded(0.5, 64)
    base = picard_evolve(params, sample_to_grid(mu, L, M), sample_to_grid(nu, L, M), tg)
    _track(base.max_monotone_violation)
    ex = derive_exponents(params)
    scale_err = 0.0
    for T in (0.25, 4.0):
        mT, nT = scale_profile(mu, params, T, "u"), scale_profile(nu, params, T, "v")
        Ls = L / math.sqrt(T)
        rep = picard_evolve(params, sample_to_grid(mT, Ls, M), sample_to_grid(nT, Ls, M), tg.scaled(1 / T))
        _track(rep.max_monotone_violation)
        for got, ref, s in ((rep.final_sup[0], base.final_sup[0], ex.scal_u), (rep.final_sup[1], base.final_sup[1], ex.scal_v)):
            ref = T**s * np.asarray(ref)
            scale_err = max(scale_err, float(np.max(np.abs(np.asarray(got) / ref - 1))))
    # a converging run with several sweeps adds an interior check
    mid = picard_evolve(params, sample_to_grid(mu.scaled(3.0), L, 1024), sample_to_grid(nu.scaled(3.0), L, 1024), tg)
    _track(mid.max_monotone_violation)
    ok = MONOTONE["worst"] <= 1e-10 and scale_err <= 1e-3
    detail = (
        f"max monotonicity violation {MONOTONE['worst']:.1e} over {MONOTONE['runs']} runs (tol 1e-10); "
        f"scaling error {scale_err:.1e} for T in {{0.25, 4}} (tol 1e-3)"
    )
    verdict(6, ok, detail, time.perf_counter() - start, 120.0)


COHERENCE = {
    "A": (SystemParams(3, 2, 3), None, {"alpha": 1.3}),
    "B": (SystemParams(2, "5/3", 3), None, {"alpha": 0.5, "beta": 0.2, "r_star": 2.0}),
    "C": (SystemParams(1, 3, 3), None, {"beta": 0.25}),
    "D": (SystemParams(1, 1, 4), LogModulator(-1.0), {"r_star": 2.0}),
    "E": (SystemParams(1, 1, 3), LogModulator(-2.0), {"r_star": 2.0}),
    "F": (SystemParams(3, 1, 1.2), None, {}),
}


def test_criterion_8_coherence(verdict):
    start = time.perf_counter()
    notes = []
    ok = True
    for label, (params, h, extras) in COHERENCE.items():
        mu, nu = make_optimal_profile(params, label, 1.0, 1.0, h=h)
        nec = necessary_condition_check(params, label, mu, nu)
        suf = sufficiency_hypothesis_check(params, label, mu, nu, extras)
        bad = necessary_condition_check(params, label, mu.perturbed(0.1), nu)
        good = nec.verdict == "bounded" and abs(nec.slope) <= 0.05 and math.isfinite(suf.fitted_C)
        fails = bad.verdict == "unbounded-trend" and bad.slope > 0
        ok &= good and fails
        notes.append(f"{label}:{'ok' if good and fails else 'x'}(slope {nec.slope:+.3f}, gamma {suf.fitted_C:.3g}, perturbed {bad.slope:.3g})")
    verdict(8, ok, "; ".join(notes), time.perf_counter() - start, 300.0)


def test_criterion_9_supersolution(verdict):
    start = time.perf_counter()
    params = SystemParams(3, 2, 3)
    samples = [(r, t) for r in (0.0, 0.5, 1.0) for t in (0.1, 0.5, 0.9)]
    small = verify_supersolution_caseA(params, 1.3, *make_optimal_profile(params, "A", 1e-3, 1e-3), samples)
    large = verify_supersolution_caseA(params, 1.3, *make_optimal_profile(params, "A", 1e3, 1e3), samples)
    n_ok = int(np.sum((small.slack_u >= 0) & (small.slack_v >= 0)))
    n_neg = int(np.sum((large.slack_u < 0) | (large.slack_v < 0)))
    ok = n_ok == 9 and n_neg >= 1
    detail = f"c=1e-3: {n_ok}/9 nonnegative slacks (min {small.min_slack:.2e}); c=1e3: {n_neg}/9 negative"
    verdict(9, ok, detail, time.perf_counter() - start, 60.0)
