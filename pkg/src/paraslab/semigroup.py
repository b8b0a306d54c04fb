"""The heat semigroup on periodic grids and on radial profiles.

Grid fields live on the periodic box [-L, L)^N sampled at x_j = -L + j h,
h = 2L/M, so the origin is the node with index M/2 on every axis.

The grid semigroup is a Fourier multiplier.  For kernels wider than three
cells the multiplier is exp(-D k^2 t); for narrower kernels it is the
discrete Fourier transform of the sampled, unit-mass-normalised Gaussian.
Both conserve mass exactly, and the second keeps the update a convex
combination of cell values, so positivity survives arbitrarily short steps.
When both are available they agree to roundoff.

The radial backend writes S(t)mu at |x| = r as a one-dimensional integral
over |y| = rho, having done the angular integral in closed form:

    ∫_{S^{N-1}} exp(z cos θ) dS = (2π)^{N/2} z^{1-N/2} I_{N/2-1}(z),
    z = r rho / (2 D t).
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from scipy import optimize, special

from .exponents import SystemParams


class TailCriterionError(ValueError):
    """The heat kernel does not fit into the periodic box."""


class TailCriterionWarning(UserWarning):
    """Periodic images may alias above the nominal 1e-12 level."""


class PositivityError(ArithmeticError):
    """A semigroup application produced a significantly negative value."""


class QuadratureError(ArithmeticError):
    """Radial quadrature missed its tolerance; ``estimate`` holds the error."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (achieved error estimate {estimate:.3e})")
        self.estimate = estimate


#: negatives smaller than this fraction of the max are roundoff and clamped
NEG_CLAMP = 1e-14
#: relative level below which a cell counts as outside the support
SUPPORT_LEVEL = 1e-12
_HEADER = struct.Struct("<qqd")

# ---------------------------------------------------------------------------
# grid fields


@dataclass(eq=False)
class GridField:
    """Nonnegative samples of a function on the periodic box [-L, L)^N."""

    L: float
    M: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        self.L = float(self.L)
        self.M = int(self.M)
        if not self.L > 0:
            raise ValueError("box half-width must be positive")
        if self.M < 2 or self.M % 2:
            raise ValueError("points per axis must be a positive even integer")
        if self.dim not in (1, 2, 3):
            raise ValueError("grid fields support N in {1, 2, 3}")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.M,) * self.dim:
            raise ValueError(f"values must have shape {(self.M,) * self.dim}, got {vals.shape}")
        self.values = vals

    @classmethod
    def constant(cls, dim: int, L: float, M: int, value: float) -> "GridField":
        return cls(L, M, dim, np.full((M,) * dim, float(value)))

    @classmethod
    def from_function(cls, dim: int, L: float, M: int, fn) -> "GridField":
        """Sample ``fn(radius)`` at the nodes."""
        tmp = cls(L, M, dim, np.zeros((M,) * dim))
        return cls(L, M, dim, np.asarray(fn(tmp.radius), dtype=float))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def cellvol(self) -> float:
        return self.h**self.dim

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.M)

    @property
    def radius(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.sqrt(sum(c * c for c in mesh))

    @property
    def origin_index(self) -> tuple:
        return (self.M // 2,) * self.dim

    def mass(self) -> float:
        return float(self.values.sum() * self.cellvol)

    def sup(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def lp_norm(self, r: float) -> float:
        if math.isinf(r):
            return float(np.abs(self.values).max())
        return float((np.sum(np.abs(self.values) ** r) * self.cellvol) ** (1.0 / r))

    def same_geometry(self, other: "GridField") -> bool:
        return self.dim == other.dim and self.M == other.M and self.L == other.L

    def with_values(self, values) -> "GridField":
        return GridField(self.L, self.M, self.dim, values)

    def support_halfwidth(self) -> float:
        """max_i |x_i| over cells above SUPPORT_LEVEL * max; inf if the
        field touches the box boundary (periodic, full support)."""
        vals = self.values
        vmax = vals.max() if vals.size else 0.0
        if vmax <= 0:
            return 0.0
        big = vals > SUPPORT_LEVEL * vmax
        for ax in range(self.dim):
            if np.take(big, 0, axis=ax).any():
                return math.inf
        idx = np.argwhere(big)
        return float(np.max(np.abs(self.axis[idx])))

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        body = np.ascontiguousarray(self.values, dtype="<f8").tobytes(order="C")
        return _HEADER.pack(self.dim, self.M, self.L) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridField":
        N, M, L = _HEADER.unpack_from(data, 0)
        vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
        if vals.size != M**N:
            raise ValueError("binary field size does not match its header")
        return cls(L, M, N, vals.reshape((M,) * N).astype(float))

    def write_bin(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read_bin(cls, path) -> "GridField":
        return cls.from_bytes(Path(path).read_bytes())

    def write_csv(self, path) -> None:
        if self.dim != 1:
            raise ValueError("CSV output is only defined for N = 1")
        data = np.column_stack([self.axis, self.values])
        np.savetxt(path, data, delimiter=",", header="x,value", comments="", fmt="%.17g")


# ---------------------------------------------------------------------------
# time grids


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Nodes in (0, t_end] graded geometrically toward 0 and toward t_end.

    Steps grow by ``ratio`` from the left end to the middle and shrink
    symmetrically towards t_end.  ``weights`` are the left-endpoint product
    weights (the step lengths); the implicit node s_0 = 0 precedes nodes[0].
    """

    t_end: float
    nodes: np.ndarray
    ratio: float

    @classmethod
    def graded(cls, t_end: float, n_nodes: int = 64, ratio: float = 1.15) -> "TimeGrid":
        if not t_end > 0:
            raise ValueError("t_end must be positive")
        if n_nodes < 2:
            raise ValueError("need at least two time nodes")
        if not 1.0 < ratio <= 2.0:
            raise ValueError("grading ratio must lie in (1, 2]")
        first = (n_nodes + 1) // 2
        second = n_nodes - first
        k = np.arange(first)
        with np.errstate(over="raise"):
            try:
                grow = ratio ** k.astype(float)
            except FloatingPointError as exc:
                raise ValueError("grading too strong for this many nodes") from exc
        steps = np.concatenate([grow, grow[:second][::-1]])
        steps = steps * (t_end / steps.sum())
        nodes = np.cumsum(steps)
        nodes[-1] = t_end
        return cls(float(t_end), nodes, float(ratio))

    @classmethod
    def graded_first_step(cls, t_end: float, n_nodes: int, first_step: float) -> "TimeGrid":
        """Graded grid whose smallest (first) step is ``first_step``."""
        if not 0 < first_step < t_end / n_nodes:
            raise ValueError("first_step must lie in (0, t_end / n_nodes)")

        def excess(r):
            return cls.graded(t_end, n_nodes, r).nodes[0] - first_step

        hi = 2.0
        if excess(hi) > 0:
            raise ValueError("first_step too small for this many nodes")
        ratio = optimize.brentq(excess, 1.0 + 1e-12, hi, xtol=1e-14)
        return cls.graded(t_end, n_nodes, ratio)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.nodes]))

    @property
    def weights(self) -> np.ndarray:
        return self.steps

    def checkpoint_indices(self, count: int = 8) -> list[int]:
        """Nodes nearest (in log t) to ``count`` log-spaced times up to t_end."""
        lo = max(self.nodes[0], self.t_end * 1e-2)
        targets = np.geomspace(lo, self.t_end, count)
        logs = np.log(self.nodes)
        idx = sorted({int(np.argmin(np.abs(logs - math.log(t)))) for t in targets})
        return idx

    def scaled(self, T: float) -> "TimeGrid":
        return TimeGrid(self.t_end * T, self.nodes * T, self.ratio)

    def to_dict(self) -> dict:
        return {"t_end": self.t_end, "n_nodes": int(self.nodes.size), "ratio": self.ratio}


# ---------------------------------------------------------------------------
# heat kernel and grid semigroup


def gaussian(N: int, x_norm, t: float, diffusivity: float = 1.0):
    """(4 pi D t)^(-N/2) exp(-|x|^2 / (4 D t))."""
    if not t > 0:
        raise ValueError("heat kernel needs t > 0")
    if not diffusivity > 0:
        raise ValueError("diffusivity must be positive")
    x = np.asarray(x_norm, dtype=float)
    tau = diffusivity * t
    out = (4 * math.pi * tau) ** (-N / 2) * np.exp(-(x * x) / (4 * tau))
    return out if out.ndim else float(out)


def heat_kernel(params: SystemParams, x_norm, t: float, diffusivity: float):
    return gaussian(params.N, x_norm, t, diffusivity)


def _axis_multiplier(M: int, h: float, tau: float) -> np.ndarray:
    """Fourier multiplier of one axis for the kernel G(., tau) (tau = D t)."""
    k = 2 * math.pi * sfft.fftfreq(M, d=h)
    if math.sqrt(2 * tau) >= 3 * h:
        return np.exp(-tau * k * k)
    j = np.arange(M)
    d = np.minimum(j, M - j) * h
    ker = np.exp(-(d * d) / (4 * tau)) if tau > 0 else (j == 0).astype(float)
    ker /= ker.sum()
    return sfft.fft(ker).real


def _check_tail(field: GridField, tau: float) -> None:
    width = 6 * math.sqrt(tau)
    support = field.support_halfwidth()
    if math.isinf(support) or field.sup() <= 0:
        return
    if field.L < width:
        raise TailCriterionError(
            f"kernel width 6*sqrt(Dt) = {width:.4g} exceeds the box half-width L = {field.L:.4g}"
        )
    if field.L < support + width:
        warnings.warn(
            f"box half-width {field.L:.4g} < support {support:.4g} + 6*sqrt(Dt) = {width:.4g}",
            TailCriterionWarning,
            stacklevel=3,
        )


def _clamp(values: np.ndarray) -> np.ndarray:
    vmax = float(values.max()) if values.size else 0.0
    floor = -NEG_CLAMP * max(vmax, 0.0)
    vmin = float(values.min()) if values.size else 0.0
    if vmin < floor:
        raise PositivityError(f"semigroup produced value {vmin:.3e} below -{NEG_CLAMP:g} * max")
    return np.maximum(values, 0.0)


def semigroup_values(values: np.ndarray, L: float, tau: float, workers: int | None = None) -> np.ndarray:
    """Apply G(., tau) to raw periodic samples without checks or clamping."""
    if tau == 0:
        return np.array(values, dtype=float, copy=True)
    M = values.shape[0]
    h = 2 * L / M
    mult = _axis_multiplier(M, h, tau)
    hat = sfft.rfftn(values, workers=workers)
    for ax in range(values.ndim):
        # the multiplier is even in k, so the rfft half-axis is a prefix
        m = mult[: hat.shape[ax]]
        shape = [1] * values.ndim
        shape[ax] = m.size
        hat = hat * m.reshape(shape)
    return sfft.irfftn(hat, s=values.shape, workers=workers)


def apply_semigroup_grid(field: GridField, diffusivity: float, t: float, check_tail: bool = True) -> GridField:
    """S(t) with diffusivity D on a periodic grid field."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not diffusivity > 0:
        raise ValueError("diffusivity must be positive")
    if t == 0:
        return field.with_values(field.values.copy())
    tau = diffusivity * t
    if check_tail:
        _check_tail(field, tau)
    return field.with_values(_clamp(semigroup_values(field.values, field.L, tau)))


def _ball_weights(field: GridField, rho: float) -> np.ndarray:
    """Periodic ball indicator around the origin; boundary cells weigh 1/2.

    Each cell is counted once per periodic image inside the ball, so for
    rho = L the antipodal node at distance L is counted for both of its
    images.
    """
    M, h = field.M, field.h
    j = np.arange(M)
    images = (j * h, (j - M) * h)
    tol = 1e-12 * rho
    out = np.zeros((M,) * field.dim)
    for combo in np.ndindex(*([2] * field.dim)):
        mesh = np.meshgrid(*[images[c] for c in combo], indexing="ij")
        dist = np.sqrt(sum(c * c for c in mesh))
        out += np.where(dist < rho - tol, 1.0, np.where(dist <= rho + tol, 0.5, 0.0))
    # the zero offset appears in both images of index 0; keep it once
    return out if rho <= field.L else np.minimum(out, 1.0)


def uloc_norm(field: GridField, r: float, rho: float) -> float:
    """sup over grid-centred balls B(x, rho) of the L^r norm on the ball."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    if rho > field.L:
        raise ValueError("rho must not exceed the box half-width")
    if r < 1:
        raise ValueError("r must lie in [1, inf]")
    if math.isinf(r):
        return float(np.abs(field.values).max())
    ind = _ball_weights(field, rho)
    powered = np.abs(field.values) ** r
    conv = sfft.irfftn(sfft.rfftn(powered) * sfft.rfftn(ind), s=powered.shape)
    best = max(float(conv.max()), 0.0) * field.cellvol
    return best ** (1.0 / r)


# ---------------------------------------------------------------------------
# radial backend


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _panels(bounds: np.ndarray, n: int):
    x, w = _gauss(n)
    mid = 0.5 * (bounds[1:] + bounds[:-1])
    half = 0.5 * (bounds[1:] - bounds[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def angular_factor(N: int, z) -> np.ndarray:
    """e^{-z} ∫_{S^{N-1}} e^{z cos θ} dS for z >= 0."""
    z = np.asarray(z, dtype=float)
    if N == 1:
        return 1.0 + np.exp(-2 * z)
    if N == 3:
        small = z < 1e-4
        zs = np.where(small, 1.0, z)
        series = 4 * math.pi * np.exp(-z) * (1 + z * z / 6)
        return np.where(small, series, 2 * math.pi * (-np.expm1(-2 * zs)) / zs)
    if N == 2:
        return 2 * math.pi * special.i0e(z)
    omega = 2 * math.pi ** (N / 2) / math.gamma(N / 2)
    small = z < 1e-6
    out = np.empty_like(z)
    zs = z[small]
    out[small] = omega * np.exp(-zs) * (1 + zs * zs / (2 * N))
    nu = N / 2 - 1
    mid = ~small & (z < 1e6)
    zb = z[mid]
    bessel = special.i1e(zb) if N == 4 else special.ive(nu, zb)
    out[mid] = (2 * math.pi) ** (N / 2) * zb ** (1 - N / 2) * bessel
    # Hankel expansion; scipy's ive returns nan for very large arguments
    big = z >= 1e6
    zl = z[big]
    m = 4 * nu * nu
    ive = (1 - (m - 1) / (8 * zl) + (m - 1) * (m - 9) / (128 * zl * zl)) / np.sqrt(2 * math.pi * zl)
    out[big] = (2 * math.pi) ** (N / 2) * zl ** (1 - N / 2) * ive
    return out


def radial_kernel(N: int, r, rho, tau: float) -> np.ndarray:
    """Spherical average kernel: S(t)f(r) = ∫ K(r, rho) f(rho) rho^{N-1} drho."""
    rho = np.asarray(rho, dtype=float)
    r, rho = np.broadcast_arrays(np.asarray(r, dtype=float), rho)
    arg = (r - rho) ** 2 / (4 * tau)
    live = arg < 745.0
    out = np.zeros(rho.shape)
    z = r[live] * rho[live] / (2 * tau)
    out[live] = (4 * math.pi * tau) ** (-N / 2) * np.exp(-arg[live]) * angular_factor(N, z)
    return out


def _split_bounds(bounds: np.ndarray, split: int) -> np.ndarray:
    """Subdivide every panel (last axis) into ``split`` equal parts."""
    if split == 1:
        return bounds
    frac = np.linspace(0.0, 1.0, split + 1)[:-1]
    lo, width = bounds[..., :-1, None], np.diff(bounds, axis=-1)[..., None]
    fine = (lo + width * frac).reshape(*bounds.shape[:-1], -1)
    return np.concatenate([fine, bounds[..., -1:]], axis=-1)


def _radial_batch(prof, radii: np.ndarray, tau: float, n: int, split: int) -> np.ndarray:
    """∫ K(r, rho) rho^{N-1} density(rho) drho for a batch of radii.

    Every radius gets the same number of panels, so the batch is one array
    computation; zero-length panels simply carry zero weight.

    * [0, b0]: the power singularity is removed by u = rho^(N - lam), with
      geometric panels in u down to 1e-30 b0^(N - lam); for lam = N the map
      rho = b0 exp(-(1 - w)/w) is used, with geometric panels in w down to
      1e-40 and the remainder added from the local power law.
    * [b0, end]: 40 geometric breakpoints, plus 25 breakpoints spanning
      r +- 12 sqrt(tau) where the kernel lives, plus the cutoff.
    """
    N = prof.dim
    lam = prof.power
    beta = N - lam
    sig = math.sqrt(tau)
    R = prof.cutoff
    r = radii[:, None]
    scale = np.where(radii > 0, np.minimum(sig, radii), sig)
    b0 = np.minimum(R, scale) / 4
    total = np.zeros_like(radii)
    x, w = _gauss(n)

    # singular region
    if beta > 1e-12:
        rel = _split_bounds(np.logspace(-30, 0, 16), split)
        mid, half = 0.5 * (rel[1:] + rel[:-1]), 0.5 * (rel[1:] - rel[:-1])
        un = (mid[:, None] + half[:, None] * x).ravel()
        uw = (half[:, None] * w).ravel()
        logrho = np.log(b0)[:, None] + np.log(un)[None, :] / beta
        weights = (b0**beta)[:, None] * uw[None, :] / beta
        tail = None
    elif beta > -1e-12:
        wb = _split_bounds(np.logspace(-40, 0, 41), split)
        mid, half = 0.5 * (wb[1:] + wb[:-1]), 0.5 * (wb[1:] - wb[:-1])
        wn = (mid[:, None] + half[:, None] * x).ravel()
        ww = (half[:, None] * w).ravel() / wn**2
        logrho = np.log(b0)[:, None] - ((1 - wn) / wn)[None, :]
        weights = np.broadcast_to(ww, logrho.shape)
        tail = 1e-40
    else:
        from .profiles import InfiniteMassError

        raise InfiniteMassError(f"density |x|^-{lam} is not integrable near the origin in N={N}")
    vals = radial_kernel(N, r, np.exp(logrho), tau) * prof.reduced_log(logrho)
    total += np.sum(weights * vals, axis=1)
    if tail is not None:
        w1, w2 = 10 * tail, tail
        lr = np.log(b0)[:, None] - np.array([(1 - w1) / w1, (1 - w2) / w2])[None, :]
        g = radial_kernel(N, r, np.exp(lr), tau) * prof.reduced_log(lr) / np.array([w1, w2]) ** 2
        live = g[:, 1] > 0
        if np.any(live):
            with np.errstate(divide="ignore"):
                e = np.log(g[live, 0] / g[live, 1]) / math.log(10.0)
            if np.any(~(e > -1)):
                from .profiles import InfiniteMassError

                raise InfiniteMassError("log-singular density is not integrable at the origin")
            total[live] += g[live, 1] * w2 / (e + 1)

    # regular region
    rend = np.maximum(np.minimum(R, radii + 14 * sig), b0)
    geo = b0[:, None] * (rend / b0)[:, None] ** np.linspace(0.0, 1.0, 40)[None, :]
    loc = np.clip(r + sig * np.linspace(-12, 12, 25)[None, :], b0[:, None], rend[:, None])
    bounds = np.sort(np.concatenate([geo, loc], axis=1), axis=1)
    bounds = _split_bounds(bounds, split)
    mid = 0.5 * (bounds[:, 1:] + bounds[:, :-1])
    half = 0.5 * (bounds[:, 1:] - bounds[:, :-1])
    rho = (mid[:, :, None] + half[:, :, None] * x).reshape(len(radii), -1)
    wts = (half[:, :, None] * w).reshape(len(radii), -1)
    with np.errstate(divide="ignore"):
        lr = np.log(rho)
    vals = radial_kernel(N, r, rho, tau) * prof.reduced_log(lr) * np.exp((N - 1 - lam) * lr)
    total += np.sum(wts * vals, axis=1)
    return total


def apply_semigroup_radial(prof, diffusivity: float, t: float, radii, rtol: float = 1e-8) -> np.ndarray:
    """S(t)mu at the given radii for a radial profile (or radial object).

    Composite Gauss-Legendre with 16 and 24 nodes per panel gives the error
    estimate; panels of the radii that miss ``rtol`` are split (up to three
    times).  Atoms contribute m G(r, D t) exactly.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not diffusivity > 0:
        raise ValueError("diffusivity must be positive")
    tau = diffusivity * t
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii < 0):
        raise ValueError("radii must be nonnegative")
    N = prof.dim
    out = np.zeros_like(radii)
    if getattr(prof, "atom", 0.0):
        out += prof.atom * gaussian(N, radii, t, diffusivity)
    if prof.amplitude == 0 or radii.size == 0:
        return out
    # absolute floor: values far below the local density level (e.g. just
    # outside a sharp cutoff at tiny Dt) only need absolute accuracy
    ref_r = np.clip(radii, math.sqrt(tau), prof.cutoff * (1 - 1e-12))
    ref_l = np.log(ref_r)
    with np.errstate(over="ignore"):
        ref = np.abs(prof.reduced_log(ref_l) * np.exp(-prof.power * ref_l))
    atol = 1e-13 * np.where(np.isfinite(ref), ref, 0.0)
    todo = np.arange(radii.size)
    result = np.zeros_like(radii)
    est = np.zeros_like(radii)
    for split in (1, 2, 4, 8):
        lo = _radial_batch(prof, radii[todo], tau, 16, split)
        hi = _radial_batch(prof, radii[todo], tau, 24, split)
        result[todo] = hi
        est[todo] = np.abs(hi - lo)
        ok = est[todo] <= rtol * np.abs(hi) + atol[todo]
        todo = todo[~ok]
        if todo.size == 0:
            break
    if todo.size:
        rel = (est[todo] - atol[todo]) / np.maximum(np.abs(result[todo]), 1e-300)
        if np.any(rel > 100 * rtol):
            i = todo[int(np.argmax(rel))]
            raise QuadratureError(
                f"radial quadrature at r={radii[i]:g}, Dt={tau:g} did not converge", float(rel.max())
            )
    return out + result


def radial_sup(prof, diffusivity: float, t: float, n_scan: int = 16) -> float:
    """‖S(t)mu‖_∞ from radius 0 plus a scan over radii up to the support."""
    R = prof.cutoff if math.isfinite(prof.cutoff) else 1.0
    sig = math.sqrt(diffusivity * t)
    scan = np.concatenate([[0.0], np.geomspace(1e-3 * sig, R + 2 * sig, n_scan - 1)])
    return float(np.max(apply_semigroup_radial(prof, diffusivity, t, scan)))
