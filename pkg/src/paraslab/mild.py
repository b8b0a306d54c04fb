"""Monotone Picard iteration for the mild system and the case-A supersolution.

The mild system on a time grid 0 = s_0 < s_1 < ... < s_K = t_end is

    u(t) = S(D1 t) mu + ∫_0^t S(D1 (t - s)) v(s)^p ds,
    v(t) = S(D2 t) nu + ∫_0^t S(D2 (t - s)) u(s)^q ds.

The Duhamel integral at every node is accumulated by the recursion

    I_i = S(D dt_i) [I_{i-1} + w_a f_{i-1}] + w_b f_i,

which for the trapezoid rule (w_a = w_b = dt_i / 2) and the left-endpoint
rule (w_a = dt_i, w_b = 0) reproduces the product quadrature with one
semigroup application per node.  Both rules have positive weights, so each
sweep is monotone in the previous iterate.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .exponents import HypothesisError, SystemParams, classify
from .profiles import RadialProfile
from .semigroup import (
    GridField,
    TimeGrid,
    _check_tail,
    _clamp,
    apply_semigroup_radial,
    semigroup_values,
)

STATUSES = ("converged", "diverged", "max_iter")


class GeometryError(ValueError):
    """Initial fields do not share a grid."""


class MonotonicityError(ArithmeticError):
    """Picard iterates decreased somewhere by more than the tolerance."""


@dataclass(frozen=True)
class PicardOptions:
    max_iter: int = 200
    cap: float = 1e8
    growth_factor: Optional[float] = 10.0
    tol_conv: float = 1e-8
    rule: str = "trapezoid"
    coupling: bool = True
    p: Optional[float] = None
    q: Optional[float] = None
    n_checkpoints: int = 8
    monotone_tol: float = 1e-10
    check_tail: bool = True

    def __post_init__(self):
        if self.rule not in ("trapezoid", "left"):
            raise ValueError("rule must be 'trapezoid' or 'left'")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class MildRunReport:
    params: SystemParams
    timegrid: TimeGrid
    L: float
    M: int
    dim: int
    case: str
    status: str
    checkpoint_indices: list
    checkpoint_times: list
    iterations: list = field(default_factory=list)
    u_checkpoints: list = field(default_factory=list)
    v_checkpoints: list = field(default_factory=list)
    max_monotone_violation: float = 0.0
    cap_info: dict = field(default_factory=dict)
    options: Optional[PicardOptions] = None
    wall_time: float = 0.0

    @property
    def n_iter(self) -> int:
        return len(self.iterations)

    @property
    def final_sup(self) -> tuple[list, list]:
        last = self.iterations[-1]
        return last["sup_u"], last["sup_v"]

    def summary(self) -> dict:
        su, sv = self.final_sup if self.iterations else ([], [])
        return {
            "status": self.status,
            "iterations": self.n_iter,
            "final_sup_u": su[-1] if su else 0.0,
            "final_sup_v": sv[-1] if sv else 0.0,
            "max_monotone_violation": self.max_monotone_violation,
        }

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "case": self.case,
            "grid": {"L": self.L, "M": self.M, "N": self.dim},
            "timegrid": {
                **self.timegrid.to_dict(),
                "checkpoint_times": [float(t) for t in self.checkpoint_times],
                "rule": self.options.rule if self.options else "trapezoid",
            },
            "iterations": self.iterations,
            "status": self.status,
            "max_monotone_violation": self.max_monotone_violation,
            "cap_info": self.cap_info,
        }


def _rel_diff(new: np.ndarray, old: np.ndarray) -> float:
    scale = float(np.max(np.abs(new)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(new - old))) / scale


def _duhamel(source: np.ndarray, f0: np.ndarray, steps: np.ndarray, L: float, tau_scale: float, rule: str) -> np.ndarray:
    """Product-quadrature Duhamel integral at every node.

    ``source[i]`` is the source at node i+1 (s_{i+1}), ``f0`` at s_0 = 0.
    """
    out = np.empty_like(source)
    acc = np.zeros_like(f0)
    prev = f0
    for i, dt in enumerate(steps):
        if rule == "trapezoid":
            acc = semigroup_values(acc + 0.5 * dt * prev, L, tau_scale * dt) + 0.5 * dt * source[i]
        else:
            acc = semigroup_values(acc + dt * prev, L, tau_scale * dt)
        acc = _clamp(acc)
        out[i] = acc
        prev = source[i]
    return out


def picard_evolve(
    params: SystemParams,
    mu_grid: GridField,
    nu_grid: GridField,
    t_end: float | TimeGrid,
    max_iter: Optional[int] = None,
    options: Optional[PicardOptions] = None,
    n_nodes: int = 64,
    ratio: float = 1.15,
) -> MildRunReport:
    """Run the monotone Picard iteration until it converges or diverges."""
    opts = options or PicardOptions()
    if max_iter is not None:
        opts = PicardOptions(**{**opts.__dict__, "max_iter": int(max_iter)})
    if not mu_grid.same_geometry(nu_grid):
        raise GeometryError("mu and nu grids must share N, M and L")
    if mu_grid.dim != params.N:
        raise GeometryError(f"grid dimension {mu_grid.dim} does not match N={params.N}")
    tg = t_end if isinstance(t_end, TimeGrid) else TimeGrid.graded(float(t_end), n_nodes, ratio)
    p = params.p if opts.p is None else float(opts.p)
    q = params.q if opts.q is None else float(opts.q)
    D1, D2 = params.D1, params.D2
    L = mu_grid.L
    start = time.perf_counter()
    if opts.check_tail:
        _check_tail(mu_grid, D1 * tg.t_end)
        _check_tail(nu_grid, D2 * tg.t_end)

    nodes, steps = tg.nodes, tg.steps
    mu, nu = mu_grid.values, nu_grid.values
    U0 = np.stack([_clamp(semigroup_values(mu, L, D1 * t)) for t in nodes])
    V0 = np.stack([_clamp(semigroup_values(nu, L, D2 * t)) for t in nodes])
    cps = tg.checkpoint_indices(opts.n_checkpoints)

    def sups(a):
        return [float(a[i].max()) for i in cps]

    u, v = U0, V0
    iterations = []
    status = "max_iter"
    worst = 0.0
    prev_peak = max(max(sups(u)), max(sups(v)))
    for n in range(1, opts.max_iter + 1):
        if opts.coupling:
            with np.errstate(over="ignore"):
                fu = _duhamel(v**p, nu**p, steps, L, D1, opts.rule)
                fv = _duhamel(u**q, mu**q, steps, L, D2, opts.rule)
            u_new, v_new = U0 + fu, V0 + fv
        else:
            u_new, v_new = U0.copy(), V0.copy()
        for new, old in ((u_new, u), (v_new, v)):
            scale = max(float(np.max(new)), 1e-300)
            drop = float(np.max(old - new)) / scale
            worst = max(worst, drop)
            if drop > opts.monotone_tol and np.isfinite(scale):
                raise MonotonicityError(f"iterate decreased by {drop:.3e} (relative) in sweep {n}")
        diff = max(
            max(_rel_diff(u_new[i], u[i]) for i in cps),
            max(_rel_diff(v_new[i], v[i]) for i in cps),
        )
        su, sv = sups(u_new), sups(v_new)
        iterations.append({"n": n, "sup_u": su, "sup_v": sv, "diff": diff})
        u, v = u_new, v_new
        peak = max(float(u.max()), float(v.max()))
        if not math.isfinite(peak) or peak > opts.cap:
            status = "diverged"
            break
        cp_peak = max(max(su), max(sv))
        if (
            opts.growth_factor is not None
            and n >= 3
            and prev_peak > 0
            and cp_peak > opts.growth_factor * prev_peak
        ):
            status = "diverged"
            break
        prev_peak = cp_peak
        if diff < opts.tol_conv:
            status = "converged"
            break

    wall = time.perf_counter() - start
    return MildRunReport(
        params=params,
        timegrid=tg,
        L=L,
        M=mu_grid.M,
        dim=mu_grid.dim,
        case=classify(params).label,
        status=status,
        checkpoint_indices=cps,
        checkpoint_times=[float(nodes[i]) for i in cps],
        iterations=iterations,
        u_checkpoints=[mu_grid.with_values(u[i]) for i in cps],
        v_checkpoints=[mu_grid.with_values(v[i]) for i in cps],
        max_monotone_violation=worst,
        cap_info={"mu_cap": mu_grid.sup(), "nu_cap": nu_grid.sup(), "h": mu_grid.h},
        options=opts,
        wall_time=wall,
    )


# ---------------------------------------------------------------------------
# case-A supersolution


@dataclass(frozen=True)
class TabulatedRadial:
    """Radial function given by samples, interpolated monotonically in log-log.

    Below the first radius the first value is used; the function is treated
    as zero beyond the last radius.
    """

    dim: int
    radii: np.ndarray
    values: np.ndarray
    power: float = 0.0
    atom: float = 0.0

    @property
    def cutoff(self) -> float:
        return float(self.radii[-1])

    @property
    def amplitude(self) -> float:
        return float(np.max(self.values))

    def __post_init__(self):
        lr = np.log(np.asarray(self.radii, dtype=float))
        keep = np.concatenate([[True], np.diff(lr) > 1e-12])
        lv = np.log(np.maximum(np.asarray(self.values, dtype=float)[keep], 1e-300))
        object.__setattr__(self, "radii", np.exp(lr[keep]))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float)[keep])
        object.__setattr__(self, "_interp", PchipInterpolator(lr[keep], lv, extrapolate=True))

    def reduced_log(self, logr):
        logr = np.asarray(logr, dtype=float)
        lr = np.clip(logr, math.log(self.radii[0]), math.log(self.radii[-1]))
        out = np.exp(self._interp(lr))
        return np.where(out < 1e-290, 0.0, out)

    def density(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r < self.cutoff, self.reduced_log(np.log(np.maximum(r, 1e-300))), 0.0)


@dataclass
class SupersolutionSample:
    radius: np.ndarray
    t: np.ndarray
    w: np.ndarray
    ubar: np.ndarray
    vbar: np.ndarray
    lhs_u: np.ndarray
    lhs_v: np.ndarray
    alpha: float
    gamma: float

    @property
    def slack_u(self) -> np.ndarray:
        return self.ubar - self.lhs_u

    @property
    def slack_v(self) -> np.ndarray:
        return self.vbar - self.lhs_v

    @property
    def min_slack(self) -> float:
        return float(min(self.slack_u.min(), self.slack_v.min()))

    @property
    def verified(self) -> bool:
        return bool(np.all(self.slack_u >= 0) and np.all(self.slack_v >= 0))

    def rows(self) -> list[dict]:
        out = []
        for i in range(self.radius.size):
            out.append(
                {
                    "radius": float(self.radius[i]),
                    "t": float(self.t[i]),
                    "w": float(self.w[i]),
                    "ubar": float(self.ubar[i]),
                    "vbar": float(self.vbar[i]),
                    "lhs_u": float(self.lhs_u[i]),
                    "lhs_v": float(self.lhs_v[i]),
                    "slack_u": float(self.slack_u[i]),
                    "slack_v": float(self.slack_v[i]),
                }
            )
        return out

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "verified": self.verified,
            "min_slack": self.min_slack,
            "samples": self.rows(),
        }


def alpha_interval(params: SystemParams) -> tuple[float, float]:
    """Open interval of admissible alpha: (1, (pq + q)/(q + 1))."""
    return 1.0, (params.p * params.q + params.q) / (params.q + 1)


def _s_panels(t_marks: list[float], n_gauss: int = 8, depth: float = 1e-10):
    """Gauss nodes on panels graded geometrically toward 0 and toward each mark."""
    tmax = max(t_marks)
    tmin = min(t_marks)
    bounds = {0.0}
    bounds.update(tmin * 4.0 ** -np.arange(0, int(math.log(1 / depth, 4)) + 1))
    prev = 0.0
    for m in sorted(t_marks):
        gap = m - prev
        bounds.update(m - gap * 4.0 ** -np.arange(1, 7))
        bounds.update(prev + gap * np.linspace(0, 1, 5))
        prev = m
    b = np.array(sorted(x for x in bounds if 0.0 <= x <= tmax))
    b = b[b >= tmin * depth]
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    mid, half = 0.5 * (b[1:] + b[:-1]), 0.5 * (b[1:] - b[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _table_radii(s: float, R: float, extra: np.ndarray) -> np.ndarray:
    sig = math.sqrt(s)
    parts = [
        np.geomspace(1e-3 * sig, R, 48),
        np.clip(R + sig * np.linspace(-8, 8, 17), 1e-3 * sig, None),
        R + 12 * sig * np.linspace(0, 1, 13)[1:],
        extra,
    ]
    r = np.unique(np.concatenate(parts))
    return r[r > 0]


def verify_supersolution_caseA(
    params: SystemParams,
    alpha: float,
    mu: RadialProfile,
    nu: RadialProfile,
    samples,
    gamma_times: Optional[np.ndarray] = None,
    duhamel_rtol: float = 1e-5,
) -> SupersolutionSample:
    """Evaluate both sides of the supersolution inequalities at (radius, t) samples.

    With D = min(D1, D2), D' = max(D1, D2) and d = (D/D')^(-N/2), the
    comparison problem has diffusivity D' and data (mu_D, nu_D) = d (mu, nu):

        w    = S(t) mu_D^{alpha(q+1)/(p+1)} + S(t) nu_D^alpha
        ubar = 2 w^{(p+1)/(alpha(q+1))},   vbar = 2 w^{1/alpha}
        lhs_v = S(t) nu_D + d ∫_0^t S(t-s) ubar(s)^q ds   (<= vbar)
        lhs_u = S(t) mu_D + d ∫_0^t S(t-s) vbar(s)^p ds   (<= ubar)
    """
    if classify(params).label != "A":
        raise HypothesisError("the supersolution construction applies to case A only")
    lo, hi = alpha_interval(params)
    if not lo < alpha < hi:
        raise HypothesisError(f"alpha must lie in ({lo}, {hi:.6g}), got {alpha}")
    if mu.atom or nu.atom:
        raise HypothesisError("the construction needs functions, not point masses")
    N, p, q = params.N, params.p, params.q
    Dp = max(params.D1, params.D2)
    d = (params.D / Dp) ** (-N / 2)
    a_u = alpha * (q + 1) / (p + 1)
    e_u = (p + 1) / (alpha * (q + 1))
    e_v = 1.0 / alpha
    samples = np.asarray(samples, dtype=float).reshape(-1, 2)
    radii, times = samples[:, 0], samples[:, 1]
    if np.any(times <= 0):
        raise ValueError("sample times must be positive")
    muD, nuD = mu.scaled(d), nu.scaled(d)
    mu_pow = muD.raised(a_u)
    nu_pow = nuD.raised(alpha)

    def w_at(s, r):
        r = np.atleast_1d(r)
        return apply_semigroup_radial(mu_pow, Dp, s, r, rtol=1e-7) + apply_semigroup_radial(nu_pow, Dp, s, r, rtol=1e-7)

    w = np.array([w_at(t, r)[0] for r, t in samples])
    ubar = 2 * w**e_u
    vbar = 2 * w**e_v
    lin_u = np.array([apply_semigroup_radial(muD, Dp, t, [r])[0] for r, t in samples])
    lin_v = np.array([apply_semigroup_radial(nuD, Dp, t, [r])[0] for r, t in samples])

    duh_u = np.zeros(len(samples))
    duh_v = np.zeros(len(samples))
    if not (mu.is_zero and nu.is_zero):
        marks = sorted(set(times.tolist()))
        s_nodes, s_wts = _s_panels(marks)
        R = max(mu.cutoff, nu.cutoff)
        R = R if math.isfinite(R) else 1.0
        for s, ws in zip(s_nodes, s_wts):
            active = times > s
            if not np.any(active):
                continue
            rr = _table_radii(s, R, radii)
            ws_tab = w_at(s, rr)
            g_u = TabulatedRadial(N, rr, (2 * ws_tab**e_v) ** p)  # vbar^p feeds u
            g_v = TabulatedRadial(N, rr, (2 * ws_tab**e_u) ** q)  # ubar^q feeds v
            for t in np.unique(times[active]):
                ks = np.nonzero(times == t)[0]
                if g_u.amplitude > 0:
                    duh_u[ks] += ws * apply_semigroup_radial(g_u, Dp, t - s, radii[ks], rtol=duhamel_rtol)
                if g_v.amplitude > 0:
                    duh_v[ks] += ws * apply_semigroup_radial(g_v, Dp, t - s, radii[ks], rtol=duhamel_rtol)
    lhs_u = lin_u + d * duh_u
    lhs_v = lin_v + d * duh_v

    gt = np.geomspace(1e-4, 0.9, 17) if gamma_times is None else np.asarray(gamma_times)
    expo = alpha * (q + 1) / (p * q - 1)
    gamma = 0.0
    if not (mu.is_zero and nu.is_zero):
        for t in gt:
            sig = math.sqrt(Dp * t)
            scan = np.concatenate([[0.0], np.geomspace(1e-3 * sig, 1.0 + 2 * sig, 15)])
            gamma = max(gamma, t**expo * float(np.max(w_at(t, scan))))
    return SupersolutionSample(radii, times, w, ubar, vbar, lhs_u, lhs_v, alpha, float(gamma))
