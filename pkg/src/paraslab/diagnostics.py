"""Bound checks for the necessary and sufficient condition functionals.

Every check evaluates a functional on a parameter grid (ball radii sigma or
times t), divides by the shape of its bound with constant 1, and reports
the largest ratio as the fitted constant.  A trend slope is the least-squares
slope of log(ratio) against log(1/parameter) over the half of the grid
closest to the singular limit; the verdict is "unbounded-trend" when that
slope exceeds SLOPE_TOL (or a value is infinite) and "bounded" otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .exponents import HypothesisError, SystemParams, classify, derive_exponents
from .profiles import (
    InfiniteMassError,
    Modulator,
    OrliczProfile,
    OrliczSpec,
    RadialProfile,
    sphere_area,
    sup_ball_measure,
)
from .semigroup import apply_semigroup_radial, radial_sup

SLOPE_TOL = 0.05


@dataclass
class BoundCheckReport:
    functional: str
    grid: np.ndarray
    measured: np.ndarray
    bound: np.ndarray
    fitted_C: float
    slope: float
    verdict: str
    grid_name: str = "sigma"
    parts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.measured == 0, 0.0, self.measured / self.bound)
        return r

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"

    def to_dict(self) -> dict:
        out = {
            "functional": self.functional,
            "grid_name": self.grid_name,
            "grid": [float(x) for x in self.grid],
            "measured": [float(x) for x in self.measured],
            "bound": [float(x) for x in self.bound],
            "fitted_C": float(self.fitted_C),
            "slope": float(self.slope),
            "verdict": self.verdict,
        }
        if self.parts:
            out["parts"] = {
                k: {kk: [float(x) for x in vv] for kk, vv in v.items()} for k, v in self.parts.items()
            }
        if self.extra:
            out["extra"] = self.extra
        return out

    def csv_rows(self) -> list[list]:
        rows = [[self.grid_name, "measured", "bound", "ratio"]]
        for g, m, b, r in zip(self.grid, self.measured, self.bound, self.ratio):
            rows.append([repr(float(g)), repr(float(m)), repr(float(b)), repr(float(r))])
        return rows


def trend_slope(grid: np.ndarray, ratio: np.ndarray) -> float:
    """Slope of log(ratio) vs log(1/grid) over the asymptotic half of the grid."""
    grid = np.asarray(grid, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    if np.any(~np.isfinite(ratio)):
        return math.inf
    order = np.argsort(grid)
    g, r = grid[order], ratio[order]
    k = max(2, (len(g) + 1) // 2)
    g, r = g[:k], r[:k]
    pos = r > 0
    if pos.sum() < 2:
        return 0.0
    x = -np.log(g[pos])
    y = np.log(r[pos])
    if np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def make_report(functional, grid, measured, bound, grid_name="sigma", parts=None, extra=None) -> BoundCheckReport:
    grid = np.asarray(grid, dtype=float)
    measured = np.asarray(measured, dtype=float)
    bound = np.asarray(bound, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(measured == 0, 0.0, measured / bound)
    fitted = float(np.max(ratio)) if ratio.size else 0.0
    slope = trend_slope(grid, ratio)
    verdict = "unbounded-trend" if (slope > SLOPE_TOL or not math.isfinite(fitted)) else "bounded"
    return BoundCheckReport(
        functional, grid, measured, bound, fitted, slope, verdict, grid_name, parts or {}, extra or {}
    )


# ---------------------------------------------------------------------------
# origin ball masses in log variables


def _gl_geometric(lo_exp: float, n_panels: int, n: int = 12):
    """Gauss nodes on (0, 1] with geometric panels [10^-k-1, 10^-k]."""
    b = np.logspace(lo_exp, 0, n_panels + 1)
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (b[1:] + b[:-1]), 0.5 * (b[1:] - b[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


_X_NODES = _gl_geometric(-30, 30)


def scaled_origin_mass(prof, log_tau: np.ndarray) -> np.ndarray:
    """mu(B(0, tau)) / tau^(N - lam) for N - lam > 0, without the atom.

    With rho = tau x^(1/beta) the mass becomes
    (omega / beta) ∫_0^1 reduced(log tau + log(x)/beta) dx,
    which stays representable for tau far below the float range.
    """
    log_tau = np.atleast_1d(np.asarray(log_tau, dtype=float))
    N = prof.dim
    beta = N - prof.power
    if beta <= 0:
        raise ValueError("scaled origin mass needs lam < N")
    x, w = _X_NODES
    lr = log_tau[:, None] + np.log(x)[None, :] / beta
    cut = math.log(prof.cutoff) if math.isfinite(prof.cutoff) else math.inf
    vals = np.where(lr < cut, prof.reduced_log(lr), 0.0)
    return sphere_area(N) / beta * (vals @ w)


_Y_NODES = None


def _y_nodes():
    global _Y_NODES
    if _Y_NODES is None:
        b = np.concatenate([np.linspace(0, 10, 21), np.linspace(10, 700, 70)[1:]])
        x, w = np.polynomial.legendre.leggauss(10)
        mid, half = 0.5 * (b[1:] + b[:-1]), 0.5 * (b[1:] - b[:-1])
        _Y_NODES = ((mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel())
    return _Y_NODES


def log_tau_integral(F: Callable[[np.ndarray], np.ndarray], log_upper: float) -> float:
    """∫_0^upper F(tau) tau^-1 dtau with F taking log tau (vectorised).

    tau = upper exp(-l), l = e^y - 1; the part beyond y = 700 is added from
    the local exponential rate of the transformed integrand and is reported
    as ``inf`` when that rate is not negative.
    """
    y, w = _y_nodes()
    ell = np.expm1(y)
    vals = F(log_upper - ell) * np.exp(y)
    if not np.all(np.isfinite(vals)):
        return math.inf
    total = float(vals @ w)
    f1, f2 = F(np.array([log_upper - math.expm1(600.0)]))[0], F(np.array([log_upper - math.expm1(700.0)]))[0]
    f1, f2 = f1 * math.exp(600.0), f2 * math.exp(700.0)
    if f2 > 0 and f1 > 0:
        rate = math.log(f2 / f1) / 100.0
        if rate >= -1e-3:
            return math.inf
        total += f2 / (-rate)
    return total


def _log_range_integral(F, log_lo: float, log_hi: float, n_per_unit: float = 2.0) -> float:
    """∫ F(tau) tau^-1 dtau over [e^log_lo, e^log_hi] with F taking log tau."""
    if log_hi <= log_lo:
        return 0.0
    panels = max(1, int(math.ceil((log_hi - log_lo) * n_per_unit)))
    b = np.linspace(log_lo, log_hi, panels + 1)
    x, w = np.polynomial.legendre.leggauss(8)
    mid, half = 0.5 * (b[1:] + b[:-1]), 0.5 * (b[1:] - b[:-1])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    wts = (half[:, None] * w).ravel()
    return float(F(nodes) @ wts)


# ---------------------------------------------------------------------------
# necessary conditions


def _default_sigma(T: float) -> np.ndarray:
    return math.sqrt(T) * np.geomspace(1e-6, 1.0, 25)


def necessary_condition_check(
    params: SystemParams,
    case: Optional[str],
    mu: RadialProfile,
    nu: RadialProfile,
    T: float = 1.0,
    sigma_grid: Optional[Sequence[float]] = None,
) -> BoundCheckReport:
    """Evaluate the case's initial-trace functional on a sigma grid.

    (a): max over the two components of sup-ball mass / sigma power.
    (f): sup-ball masses for radii up to sqrt(T) against T^(N/2 - s_u), T^(N/2 - s_v).
    (b): origin tau-integral of [mu(B)/tau^(N-lam_mu)]^q tau^-1 on (0, sigma)
         plus sup-ball mass of nu, against [log(e + sqrt(T)/sigma)]^(-1/(pq-1)).
    (c): sum of sup-ball masses against [log(e + sqrt(T)/sigma)]^(-N/2).
    (d), (e): the tau-integral on (sigma, sqrt(T)) plus nu's sup-ball mass at
         sqrt(T), against T^(N/2 - (q+1)/(pq-1)); bounded iff the integral
         converges as sigma -> 0.

    The tau-integrals are centred at the origin.
    """
    actual = classify(params).label
    label = actual if case is None else str(case).upper()
    if label != actual:
        raise HypothesisError(f"case {label} does not match parameters (classified as {actual})")
    N, p, q = params.N, params.p, params.q
    ex = derive_exponents(params)
    pq1 = p * q - 1
    sqT = math.sqrt(T)
    sig = np.asarray(_default_sigma(T) if sigma_grid is None else sigma_grid, dtype=float)
    if np.any(sig <= 0) or np.any(sig > sqT * (1 + 1e-12)):
        raise ValueError("sigma grid must lie in (0, sqrt(T)]")
    fid = f"necessary_{label.lower()}"

    if label in ("A", "F"):
        m_mu = np.array([sup_ball_measure(mu, s) for s in sig])
        m_nu = np.array([sup_ball_measure(nu, s) for s in sig])
        if label == "A":
            b_mu, b_nu = sig ** (N - ex.lambda_mu), sig ** (N - ex.lambda_nu)
        else:
            # fixed horizon T: masses of balls up to radius sqrt(T) against T^(N/2 - s)
            b_mu = np.full_like(sig, T ** (N / 2 - ex.scal_u))
            b_nu = np.full_like(sig, T ** (N / 2 - ex.scal_v))
        with np.errstate(invalid="ignore"):
            r_mu = np.where(m_mu == 0, 0.0, m_mu / b_mu)
            r_nu = np.where(m_nu == 0, 0.0, m_nu / b_nu)
        measured = np.maximum(r_mu, r_nu)
        parts = {
            "mu": {"measured": m_mu, "bound": b_mu},
            "nu": {"measured": m_nu, "bound": b_nu},
        }
        return make_report(fid, sig, measured, np.ones_like(sig), parts=parts)

    if label == "C":
        m_mu = np.array([sup_ball_measure(mu, s) for s in sig])
        m_nu = np.array([sup_ball_measure(nu, s) for s in sig])
        bound = np.log(math.e + sqT / sig) ** (-N / 2)
        parts = {"mu": {"measured": m_mu}, "nu": {"measured": m_nu}}
        return make_report(fid, sig, m_mu + m_nu, bound, parts=parts)

    if label == "B":
        lam = ex.lambda_mu

        def F(logtau):
            if mu.atom > 0:
                return np.full_like(np.atleast_1d(logtau), np.inf)
            if mu.power >= N:
                return np.full_like(np.atleast_1d(logtau), np.inf)
            with np.errstate(over="ignore"):
                ratio = scaled_origin_mass(mu, logtau) * np.exp((lam - mu.power) * np.atleast_1d(logtau))
                return ratio**q

        integral = np.array([log_tau_integral(F, math.log(s)) for s in sig])
        m_nu = np.array([sup_ball_measure(nu, s) for s in sig])
        bound = np.log(math.e + sqT / sig) ** (-1.0 / pq1)
        parts = {"mu_integral": {"measured": integral}, "nu": {"measured": m_nu}}
        return make_report(fid, sig, integral + m_nu, bound, parts=parts)

    # cases D and E
    lam = (N + 2) / q if label == "D" else 0.0

    def mass_ratio(logtau):
        logtau = np.atleast_1d(logtau)
        if mu.atom > 0 or mu.power > N:
            return np.full_like(logtau, np.inf)
        if mu.is_zero:
            return np.zeros_like(logtau)
        if mu.power < N:
            # mu(B(0,tau)) / tau^(N - lam) = scaled * tau^(lam - power)
            ref = lam if label == "D" else N
            return scaled_origin_mass(mu, logtau) * np.exp((ref - mu.power) * logtau)
        lc = math.log(mu.cutoff) if math.isfinite(mu.cutoff) else math.inf
        red = lambda lr: np.where(lr < lc, mu.reduced_log(lr), 0.0)
        mass = np.array([sphere_area(N) * log_tau_integral(red, lt) for lt in logtau])
        return mass * np.exp(-(N - lam) * logtau) if label == "D" else mass

    def F(logtau):
        return mass_ratio(logtau) ** q

    integral = np.array([_log_range_integral(F, math.log(s), math.log(sqT)) for s in sig])
    nu_mass = sup_ball_measure(nu, sqT)
    measured = integral + nu_mass
    bound = np.full_like(sig, T ** (N / 2 - ex.scal_v))
    parts = {"mu_integral": {"measured": integral}, "nu": {"measured": np.full_like(sig, nu_mass)}}
    return make_report(fid, sig, measured, bound, parts=parts)


# ---------------------------------------------------------------------------
# sufficiency hypotheses


def _default_t() -> np.ndarray:
    return np.geomspace(1e-4, 1.0, 33)


def radial_lr_norm(prof, diffusivity: float, t: float, r: float, lo: float = 0.0, hi: float = 1.0, n_panels: int = 30) -> float:
    """(∫_{lo < |x| < hi} |S(t)mu|^r dx)^(1/r) by radial quadrature."""
    sig = math.sqrt(diffusivity * t)
    start = max(lo, 1e-3 * min(sig, hi))
    b = np.unique(np.concatenate([[lo], np.geomspace(start, hi, n_panels)]))
    b = b[(b >= lo) & (b <= hi)]
    x, w = np.polynomial.legendre.leggauss(8)
    mid, half = 0.5 * (b[1:] + b[:-1]), 0.5 * (b[1:] - b[:-1])
    rr = (mid[:, None] + half[:, None] * x).ravel()
    ww = (half[:, None] * w).ravel()
    vals = apply_semigroup_radial(prof, diffusivity, t, rr, rtol=1e-7)
    N = prof.dim
    return float((sphere_area(N) * np.sum(ww * np.abs(vals) ** r * rr ** (N - 1))) ** (1.0 / r))


def _linf(prof, t: float, D: float = 1.0) -> float:
    if prof.is_zero:
        return 0.0
    try:
        return radial_sup(prof, D, t)
    except InfiniteMassError:
        return math.inf


def sufficiency_hypothesis_check(
    params: SystemParams,
    case: Optional[str],
    mu: RadialProfile,
    nu: RadialProfile,
    extras: Optional[dict] = None,
    t_grid: Optional[Sequence[float]] = None,
) -> BoundCheckReport:
    """Measure the smallness hypothesis of the case's existence theorem.

    The report's ratio at time t is the left side divided by the t-shape of
    the right side, so the fitted constant is the smallest gamma for which
    the hypothesis holds on the grid (for (D)/(E) also at least
    sup nu(B(x, 1))^(1/q)).  Extras:

    (A) alpha in (1, (pq+q)/(q+1));  (B) alpha > 0, beta in (0, 1/(pq-1)),
    r_star in ((q+1)/(p+1), q);  (C) beta > 0 (Phi(mu) must stay locally integrable);  (D)/(E) r_star in
    (Nq/(N+2), q) and f (a Modulator; default: the q-th power of mu's
    modulator);  (F) none.
    """
    extras = dict(extras or {})
    actual = classify(params).label
    label = actual if case is None else str(case).upper()
    if label != actual:
        raise HypothesisError(f"case {label} does not match parameters (classified as {actual})")
    N, p, q = params.N, params.p, params.q
    pq1 = p * q - 1
    t = np.asarray(_default_t() if t_grid is None else t_grid, dtype=float)
    fid = f"sufficient_{label.lower()}"
    zero = mu.is_zero and nu.is_zero

    def need(name, lo, hi):
        if name not in extras:
            raise HypothesisError(f"case {label} needs extra '{name}'")
        val = float(extras[name])
        if not lo < val < hi:
            raise HypothesisError(f"{name}={val} outside the open interval ({lo}, {hi})")
        return val

    if label == "A":
        alpha = need("alpha", 1.0, (p * q + q) / (q + 1))
        a_u = alpha * (q + 1) / (p + 1)
        e = alpha * (q + 1) / pq1
        if zero:
            measured = np.zeros_like(t)
        else:
            mp, np_ = mu.raised(a_u), nu.raised(alpha)
            measured = np.array([_linf(mp, s) + _linf(np_, s) for s in t])
        bound = t**-e
        return make_report(fid, t, measured, bound, "t", extra={"alpha": alpha})

    if label == "C":
        beta = need("beta", 0.0, math.inf)
        spec = OrliczSpec.phi(beta)
        if zero:
            measured = np.zeros_like(t)
        else:
            pm, pn = OrliczProfile(mu, spec), OrliczProfile(nu, spec)
            measured = np.array([_linf(pm, s) + _linf(pn, s) for s in t])
        bound = t ** (-N / 2) * np.abs(np.log(t / 2)) ** (-N / 2 + beta)
        return make_report(fid, t, measured, bound, "t", extra={"beta": beta})

    if label == "B":
        alpha = need("alpha", 0.0, math.inf)
        beta = need("beta", 0.0, 1.0 / pq1)
        rs = need("r_star", (q + 1) / (p + 1), q)
        psi, phi = OrliczSpec.psi(alpha), OrliczSpec.phi(beta)
        lt = np.abs(np.log(t / 2))
        b1 = t ** (-(N / 2) * ((p + 1) / (q + 1) - 1 / rs)) * lt ** (-p / pq1 + alpha)
        b2 = t ** (-N / 2) * lt ** (-1 / pq1 + beta)
        if zero:
            m1 = m2 = np.zeros_like(t)
        else:
            pm, pn = OrliczProfile(mu, psi), OrliczProfile(nu, phi)
            m1 = np.array([0.0 if mu.is_zero else radial_lr_norm(pm, 1.0, s, rs) for s in t])
            m2 = np.array([_linf(pn, s) for s in t])
        with np.errstate(invalid="ignore"):
            ratio = np.maximum(np.where(m1 == 0, 0, m1 / b1), np.where(m2 == 0, 0, m2 / b2))
        parts = {"uloc_psi_mu": {"measured": m1, "bound": b1}, "linf_phi_nu": {"measured": m2, "bound": b2}}
        return make_report(fid, t, ratio, np.ones_like(t), "t", parts=parts,
                           extra={"alpha": alpha, "beta": beta, "r_star": rs})

    if label in ("D", "E"):
        rs = need("r_star", N * q / (N + 2), q)
        f = extras.get("f")
        if f is None:
            if mu.modulator is None:
                raise HypothesisError("cases D/E need a function f (or a modulated mu)")
            h = mu.modulator
            if label == "D":
                f_of = lambda s: np.asarray(h(np.asarray(s))) ** q
            else:
                # |x|^-N h(|x|) also feels the primitive of h / tau at the origin
                def f_of(s):
                    s = np.atleast_1d(np.asarray(s, dtype=float))
                    prim = np.array([
                        integrate.quad(lambda u: float(h(x * math.exp(-u))), 0, np.inf, limit=200)[0] for x in s
                    ])
                    return (np.asarray(h(s)) + prim) ** q
        elif isinstance(f, Modulator):
            f_of = lambda s: np.asarray(f(np.asarray(s)))
        else:
            f_of = f
        fint, _ = integrate.quad(lambda u: float(np.ravel(f_of(math.exp(-u)))[0]), 0, np.inf, limit=200)
        if not math.isfinite(fint):
            raise HypothesisError("f must satisfy ∫_0^1 f(τ)/τ dτ < ∞")
        shape = t ** (-(N / 2) * ((N + 2) / (N * q) - 1 / rs)) * f_of(np.sqrt(t)) ** (1 / q)
        if mu.atom > 0:
            m1 = np.full_like(t, np.inf)
        elif mu.is_zero:
            m1 = np.zeros_like(t)
        else:
            m1 = np.array([radial_lr_norm(mu, 1.0, s, rs) for s in t])
        nu_part = sup_ball_measure(nu, 1.0) ** (1 / q) if not nu.is_zero else 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            r1 = np.where(m1 == 0, 0.0, m1 / shape)
        ratio = np.maximum(r1, nu_part)
        parts = {"uloc_mu": {"measured": m1, "bound": shape}, "nu_ball": {"measured": np.full_like(t, nu_part)}}
        return make_report(fid, t, ratio, np.ones_like(t), "t", parts=parts,
                           extra={"r_star": rs, "f_integral": fint})

    # case F
    measured = np.array([_linf(mu, s) + _linf(nu, s) for s in t])
    return make_report(fid, t, measured, t ** (-N / 2), "t")


# ---------------------------------------------------------------------------
# lemmas


def lemma21_check(mu, t_grid: Sequence[float]) -> BoundCheckReport:
    """‖S(t)mu‖_∞ t^{N/2} / sup_x mu(B(x, sqrt t)) on a t grid."""
    t = np.asarray(t_grid, dtype=float)
    N = mu.dim
    if mu.is_zero:
        return make_report("lemma21", t, np.zeros_like(t), np.ones_like(t), "t")
    sup = np.array([radial_sup(mu, 1.0, s) for s in t])
    balls = np.array([sup_ball_measure(mu, math.sqrt(s)) for s in t])
    measured = sup * t ** (N / 2)
    return make_report("lemma21", t, measured, balls, "t")


def _as_function(f) -> Callable:
    if f is None:
        return lambda s: np.zeros_like(np.asarray(s, dtype=float))
    if isinstance(f, (int, float)):
        return lambda s: np.full_like(np.asarray(s, dtype=float), float(f))
    return lambda s: np.asarray(f(np.asarray(s, dtype=float)), dtype=float)


def lemma22_check(
    N: int,
    a: float,
    f,
    r_star: float,
    t_grid: Sequence[float],
    t_cut: float = 1e-2,
) -> BoundCheckReport:
    """Annulus estimate for mu = |x|^-a f(|x|) on B(0, 1).

    ``f`` is a Modulator, a constant, or None (f = 0).  The fitted constant
    uses times t <= t_cut; ``extra`` records the constant fitted with a
    tenfold smaller cutoff as a sensitivity measure.
    """
    if not 0 < a <= N:
        raise ValueError("a must lie in (0, N]")
    if not r_star > N / a:
        raise ValueError(f"r_star must exceed N/a = {N / a}")
    t = np.asarray(t_grid, dtype=float)
    fn = _as_function(f)
    if isinstance(f, (int, float)) and float(f) == 0 or f is None:
        return make_report("lemma22", t, np.zeros_like(t), np.ones_like(t), "t")
    if isinstance(f, Modulator):
        mu = RadialProfile(N, 1.0, a, modulator=f)
    else:
        mu = RadialProfile(N, float(f), a)
    measured = np.array([radial_lr_norm(mu, 1.0, s, r_star, lo=math.sqrt(s), hi=1.0) for s in t])
    g = fn(t ** (1 / 6)) + t ** ((min(a, N) * r_star - N) / (4 * r_star))
    if a == N:
        g = g + np.array([integrate.quad(lambda u: float(fn(math.sqrt(s) * math.exp(-u))), 0, np.inf, limit=200)[0] for s in t])
    bound = t ** (-(N / 2) * (a / N - 1 / r_star)) * g
    keep = t <= t_cut
    rep = make_report("lemma22", t[keep], measured[keep], bound[keep], "t")
    fine = t <= t_cut / 10
    if fine.sum() >= 2:
        c_fine = float(np.max(measured[fine] / bound[fine]))
        rep.extra["fitted_C_cut_tenth"] = c_fine
        rep.extra["cutoff_sensitivity"] = abs(rep.fitted_C - c_fine) / rep.fitted_C if rep.fitted_C else 0.0
    rep.extra["t_cut"] = t_cut
    return rep


def lemma23_log_integral(a: float, b: float, t: float) -> tuple[float, float, float]:
    """(∫_0^t s^a |log(s/2)|^b ds, t^{a+1} |log(t/2)|^b, their ratio).

    With s = 2 e^{-u} the integral is 2^{a+1} ∫_{u0}^∞ e^{-(a+1)u} u^b du,
    u0 = log(2/t), a smooth integrand for quad.
    """
    if not a > -1:
        raise ValueError("need a > -1")
    if not 0 < t < 1:
        raise ValueError("need 0 < t < 1")
    u0 = math.log(2.0 / t)
    k = a + 1
    f = lambda u: math.exp(-k * (u - u0)) * u**b
    val, _ = integrate.quad(f, u0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    scale = 2.0**k * math.exp(-k * u0)
    integral = scale * val
    bound = t**k * u0**b
    return integral, bound, integral / bound


def lemma23_check(a: float, b: float, t_grid: Sequence[float]) -> BoundCheckReport:
    t = np.asarray(t_grid, dtype=float)
    res = np.array([lemma23_log_integral(a, b, s) for s in t])
    rep = make_report("lemma23", t, res[:, 0], res[:, 1], "t")
    rep.extra.update({"a": a, "b": b})
    return rep
