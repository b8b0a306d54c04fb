import math
import warnings

import numpy as np
import pytest

from paraslab.exponents import SystemParams
from paraslab.profiles import (
    LogModulator,
    RadialProfile,
    atom_profile,
    constant_profile,
    make_optimal_profile,
    sample_to_grid,
)
from paraslab.semigroup import (
    GridField,
    PositivityError,
    TailCriterionError,
    TailCriterionWarning,
    TimeGrid,
    apply_semigroup_grid,
    apply_semigroup_radial,
    gaussian,
    heat_kernel,
    uloc_norm,
)


@pytest.mark.parametrize(
    "N, r, t, D, expected",
    [
        (1, 0.0, 1.0, 1.0, (4 * math.pi) ** -0.5),
        (3, 0.0, 0.25, 1.0, math.pi**-1.5),
        (2, 1.0, 0.25, 1.0, math.exp(-1) / math.pi),
        (2, 2.0, 0.5, 2.0, math.exp(-1) / (4 * math.pi)),
    ],
)
def test_gaussian_values(N, r, t, D, expected):
    assert gaussian(N, r, t, D) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_heat_kernel_unit_mass(N):
    from scipy import integrate

    from paraslab.profiles import sphere_area

    params = SystemParams(N, 2, 3)
    val, _ = integrate.quad(lambda r: heat_kernel(params, r, 0.3, 1.7) * r ** (N - 1), 0, np.inf)
    assert sphere_area(N) * val == pytest.approx(1.0, rel=1e-10)


def test_gaussian_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        gaussian(1, 0.0, 0.0)


# grid semigroup


@pytest.mark.parametrize("N, M", [(1, 64), (2, 32), (3, 16)])
def test_constant_field_is_fixed(N, M):
    f = GridField.constant(N, 2.0, M, 3.5)
    out = apply_semigroup_grid(f, 1.3, 0.7)
    np.testing.assert_allclose(out.values, 3.5, rtol=1e-13)


def test_zero_time_is_identity():
    rng = np.random.default_rng(0)
    f = GridField(4.0, 32, 2, rng.random((32, 32)))
    out = apply_semigroup_grid(f, 1.0, 0.0)
    np.testing.assert_array_equal(out.values, f.values)
    assert out.values is not f.values


def test_gaussian_in_gaussian_out():
    L, M, s, t = 16.0, 2048, 0.25, 0.25
    f = GridField.from_function(1, L, M, lambda r: gaussian(1, r, s))
    out = apply_semigroup_grid(f, 1.0, t)
    exact = gaussian(1, out.radius, s + t)
    assert np.max(np.abs(out.values - exact)) < 1e-8


@pytest.mark.parametrize("N, M", [(1, 2048), (2, 256)])
def test_semigroup_law_mass_and_positivity(N, M):
    L = 8.0
    f = GridField.from_function(N, L, M, lambda r: np.where(r < 1.0, 1.0 - r, 0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailCriterionWarning)
        a = apply_semigroup_grid(apply_semigroup_grid(f, 1.0, 0.1), 1.0, 0.2)
        b = apply_semigroup_grid(f, 1.0, 0.3)
    assert np.max(np.abs(a.values - b.values)) < 1e-9 * f.sup()
    assert b.mass() == pytest.approx(f.mass(), rel=1e-9)
    assert b.values.min() >= 0


def test_tail_warning_and_error():
    f = GridField.from_function(1, 4.0, 256, lambda r: np.where(r < 1.0, 1.0, 0.0))
    with pytest.warns(TailCriterionWarning):
        apply_semigroup_grid(f, 1.0, 0.3)
    with pytest.raises(TailCriterionError):
        apply_semigroup_grid(f, 1.0, 1.0)
    # unchecked evaluation still runs
    apply_semigroup_grid(f, 1.0, 1.0, check_tail=False)


def test_clamp_and_positivity_error():
    from paraslab.semigroup import _clamp

    np.testing.assert_array_equal(_clamp(np.array([1.0, -1e-15])), [1.0, 0.0])
    with pytest.raises(PositivityError):
        _clamp(np.array([1.0, -1e-3]))


# uniformly local norms


def test_uloc_of_constant():
    f = GridField.constant(1, 8.0, 1024, 3.0)
    # ||c||_{L^2(B(x,1))} = c sqrt(2) in one dimension
    assert uloc_norm(f, 2, 1.0) == pytest.approx(3.0 * math.sqrt(2), rel=1e-12)
    assert uloc_norm(f, math.inf, 1.0) == 3.0


@pytest.mark.parametrize("r", [1, 2, 3.5])
def test_uloc_supported_in_ball_equals_global_norm(r):
    f = GridField.from_function(2, 4.0, 128, lambda x: np.where(x < 0.5, 1 + x, 0.0))
    assert uloc_norm(f, r, 1.0) == pytest.approx(f.lp_norm(r), rel=1e-12)


def test_uloc_rejects_bad_arguments():
    f = GridField.constant(1, 2.0, 16, 1.0)
    with pytest.raises(ValueError):
        uloc_norm(f, 0.5, 1.0)
    with pytest.raises(ValueError):
        uloc_norm(f, 2, 3.0)


def test_case_d_uloc_rate():
    # ||S(t)mu||_{uloc} ~ h(sqrt t) t^(-1/(2q)) for the critical case-D datum
    params = SystemParams(1, 1, 4)
    h = LogModulator(-0.25)
    mu, _ = make_optimal_profile(params, "D", 1.0, 1.0, h=h)
    field = sample_to_grid(mu, 4.0, 16384)
    ts = np.geomspace(1e-4, 1e-2, 9)
    vals = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailCriterionWarning)
        for t in ts:
            vals.append(uloc_norm(apply_semigroup_grid(field, 1.0, t), 2.0, 1.0))
    y = np.log(np.array(vals) / h(np.sqrt(ts)))
    slope = np.polyfit(np.log(ts), y, 1)[0]
    assert abs(slope - (-0.125)) < 0.05


# radial semigroup


@pytest.mark.parametrize("N", [1, 2, 3])
def test_radial_atom_is_gaussian(N):
    radii = np.array([0.0, 0.1, 0.5, 1.3])
    out = apply_semigroup_radial(atom_profile(N, 2.0), 1.5, 0.2, radii)
    np.testing.assert_allclose(out, 2.0 * gaussian(N, radii, 0.2, 1.5), rtol=1e-14)


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_radial_constant(N):
    out = apply_semigroup_radial(constant_profile(N, 0.7), 1.0, 0.5, [0.0, 1.0, 3.0])
    np.testing.assert_allclose(out, 0.7, rtol=1e-8)


@pytest.mark.parametrize("N, lam", [(1, 0.5), (2, 1.2), (3, 0.0)])
def test_radial_matches_grid(N, lam):
    prof = RadialProfile(N, 1.0, lam)
    M = {1: 8192, 2: 512, 3: 96}[N]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailCriterionWarning)
        grid = apply_semigroup_grid(sample_to_grid(prof, 4.0, M), 1.0, 0.1)
    r = np.array([0.3, 0.7, 1.5])
    idx = grid.M // 2 + np.round(r / grid.h).astype(int)
    at = tuple([idx] + [np.full(3, grid.M // 2)] * (N - 1))
    nodes = grid.h * (idx - grid.M // 2)
    np.testing.assert_allclose(grid.values[at], apply_semigroup_radial(prof, 1.0, 0.1, nodes), rtol=5e-3)


def test_radial_monte_carlo():
    # S(t)mu(0) = E[density(|Y|)], |Y|^2 / (2t) ~ chi^2_3
    params = SystemParams(3, 2, 3)
    mu, _ = make_optimal_profile(params, "A", 1.0, 1.0)
    t = 0.01
    rng = np.random.default_rng(1)
    y = np.sqrt(2 * t * rng.chisquare(3, 10**7))
    samples = mu.density(y)
    mean = samples.mean()
    se = samples.std() / math.sqrt(samples.size)
    exact = apply_semigroup_radial(mu, 1.0, t, [0.0])[0]
    assert abs(mean - exact) < 3 * se


@pytest.mark.parametrize("r", [1.5, 2.0, 3.0])
def test_jensen(r):
    # (S(t)f)^r <= S(t)(f^r)
    f = GridField.from_function(2, 4.0, 128, lambda x: np.where(x < 1.0, 1 / (0.1 + x), 0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailCriterionWarning)
        lhs = apply_semigroup_grid(f, 1.0, 0.05).values ** r
        rhs = apply_semigroup_grid(f.with_values(f.values**r), 1.0, 0.05).values
    assert np.all(lhs <= rhs * (1 + 1e-10) + 1e-14)


@pytest.mark.parametrize("r, ell", [(1, 2), (1, math.inf), (2, math.inf)])
@pytest.mark.parametrize("t", [0.01, 0.1])
def test_smoothing_estimate(r, ell, t):
    N = 2
    f = GridField.from_function(N, 6.0, 256, lambda x: np.where(x < 0.5, 1 / (0.05 + x), 0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailCriterionWarning)
        out = apply_semigroup_grid(f, 1.0, t)
    inv = 1 / r - (0 if math.isinf(ell) else 1 / ell)
    bound = (4 * math.pi * t) ** (-N / 2 * inv) * f.lp_norm(r)
    assert out.lp_norm(ell) <= bound * (1 + 1e-10)


# serialization


@pytest.mark.parametrize("N, M", [(1, 8), (2, 6), (3, 4)])
def test_binary_roundtrip(tmp_path, N, M):
    rng = np.random.default_rng(N)
    f = GridField(1.5, M, N, rng.random((M,) * N))
    path = tmp_path / "f.bin"
    f.write_bin(path)
    g = GridField.read_bin(path)
    assert g.same_geometry(f)
    np.testing.assert_array_equal(g.values, f.values)
    assert path.stat().st_size == 24 + 8 * M**N


def test_binary_size_mismatch():
    f = GridField.constant(1, 1.0, 4, 1.0)
    with pytest.raises(ValueError):
        GridField.from_bytes(f.to_bytes()[:-8])


def test_csv_roundtrip(tmp_path):
    f = GridField.from_function(1, 2.0, 16, lambda r: np.exp(-r))
    path = tmp_path / "f.csv"
    f.write_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 0], f.axis)
    np.testing.assert_array_equal(data[:, 1], f.values)
    with pytest.raises(ValueError):
        GridField.constant(2, 1.0, 4, 1.0).write_csv(path)


@pytest.mark.parametrize("kwargs", [dict(L=0, M=4), dict(L=1, M=5), dict(L=1, M=0)])
def test_grid_field_validation(kwargs):
    with pytest.raises(ValueError):
        GridField.constant(1, kwargs["L"], kwargs["M"], 1.0)


# time grids


@pytest.mark.parametrize("t_end, n, ratio", [(1.0, 64, 1.15), (0.3, 17, 1.5), (5.0, 2, 2.0)])
def test_time_grid_weights(t_end, n, ratio):
    tg = TimeGrid.graded(t_end, n, ratio)
    assert tg.weights.sum() == pytest.approx(t_end, rel=1e-14)
    assert tg.nodes[-1] == t_end
    assert np.all(np.diff(tg.nodes) > 0)
    if n > 3:
        assert tg.steps[1] / tg.steps[0] == pytest.approx(ratio)


def test_graded_first_step():
    tg = TimeGrid.graded_first_step(1.0, 128, 1e-5)
    assert tg.nodes[0] == pytest.approx(1e-5, rel=1e-9)
    assert tg.weights.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        TimeGrid.graded_first_step(1.0, 10, 0.5)


def test_time_grid_scaled_and_checkpoints():
    tg = TimeGrid.graded(1.0, 64)
    sc = tg.scaled(4.0)
    np.testing.assert_allclose(sc.nodes, 4 * tg.nodes)
    idx = tg.checkpoint_indices(8)
    assert idx[-1] == 63 and idx == sorted(set(idx))


@pytest.mark.parametrize("ratio", [1.0, 2.5])
def test_time_grid_bad_ratio(ratio):
    with pytest.raises(ValueError):
        TimeGrid.graded(1.0, 8, ratio)
