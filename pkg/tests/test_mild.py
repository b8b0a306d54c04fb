import numpy as np
import pytest
from oracles import ode_solution

from paraslab.exponents import HypothesisError, SystemParams, derive_exponents
from paraslab.mild import (
    GeometryError,
    PicardOptions,
    alpha_interval,
    picard_evolve,
    verify_supersolution_caseA,
)
from paraslab.profiles import make_optimal_profile, sample_to_grid, scale_profile
from paraslab.semigroup import GridField, TimeGrid, apply_semigroup_grid

CASE_A_1D = SystemParams(1, 4, 4)


def case_a_fields(c, L=8.0, M=1024):
    mu, nu = make_optimal_profile(CASE_A_1D, "A", c, c)
    return sample_to_grid(mu, L, M), sample_to_grid(nu, L, M)


def test_zero_data_converges_at_once():
    z = GridField.constant(2, 4.0, 16, 0.0)
    rep = picard_evolve(SystemParams(2, 2, 3), z, z, 1.0)
    assert rep.status == "converged"
    assert rep.n_iter == 1
    assert rep.final_sup == ([0.0] * len(rep.checkpoint_indices),) * 2


def test_uncoupled_run_is_linear_flow():
    mu, nu = case_a_fields(1.0)
    tg = TimeGrid.graded(0.5, 32)
    rep = picard_evolve(CASE_A_1D, mu, nu, tg, options=PicardOptions(coupling=False))
    assert rep.status == "converged"
    for k, i in enumerate(rep.checkpoint_indices):
        exact = apply_semigroup_grid(mu, 1.0, tg.nodes[i], check_tail=False)
        np.testing.assert_allclose(rep.u_checkpoints[k].values, exact.values, rtol=0, atol=1e-12 * exact.sup())


@pytest.mark.parametrize("p, q, A, B", [(4, 4, 0.5, 0.5), (2, 3, 0.3, 0.6)])
def test_constant_data_follow_ode(p, q, A, B):
    params = SystemParams(1, p, q)
    tg = TimeGrid.graded(1.0, 64, 1.02)
    rep = picard_evolve(
        params,
        GridField.constant(1, 1.0, 16, A),
        GridField.constant(1, 1.0, 16, B),
        tg,
        options=PicardOptions(max_iter=500, tol_conv=1e-13),
    )
    assert rep.status == "converged"
    u, v = ode_solution(p, q, A, B, rep.checkpoint_times)
    np.testing.assert_allclose(rep.final_sup[0], u, rtol=1e-4)
    np.testing.assert_allclose(rep.final_sup[1], v, rtol=1e-4)


@pytest.mark.parametrize("c, status", [(0.05, "converged"), (50.0, "diverged")])
def test_case_a_amplitude_regimes(c, status):
    mu, nu = case_a_fields(c)
    rep = picard_evolve(CASE_A_1D, mu, nu, 0.5)
    assert rep.status == status


def test_iterates_are_monotone():
    mu, nu = case_a_fields(0.15)
    rep = picard_evolve(CASE_A_1D, mu, nu, 0.5)
    assert rep.max_monotone_violation <= 1e-10
    sups = np.array([it["sup_u"][-1] for it in rep.iterations])
    assert np.all(np.diff(sups) >= -1e-10 * sups[-1])


@pytest.mark.parametrize("T", [0.25, 4.0])
def test_scaling_covariance(T):
    mu, nu = make_optimal_profile(CASE_A_1D, "A", 0.05, 0.05)
    ex = derive_exponents(CASE_A_1D)
    L, M = 8.0, 2048
    tg = TimeGrid.graded(0.5, 64)
    base = picard_evolve(CASE_A_1D, sample_to_grid(mu, L, M), sample_to_grid(nu, L, M), tg)
    mT = scale_profile(mu, CASE_A_1D, T, "u")
    nT = scale_profile(nu, CASE_A_1D, T, "v")
    Ls = L / np.sqrt(T)
    rep = picard_evolve(CASE_A_1D, sample_to_grid(mT, Ls, M), sample_to_grid(nT, Ls, M), tg.scaled(1 / T))
    for got, ref, s in ((rep.final_sup[0], base.final_sup[0], ex.scal_u), (rep.final_sup[1], base.final_sup[1], ex.scal_v)):
        np.testing.assert_allclose(got, T**s * np.array(ref), rtol=1e-3)
    assert rep.checkpoint_times == pytest.approx(list(np.array(base.checkpoint_times) / T))


def test_geometry_mismatch():
    a = GridField.constant(1, 2.0, 16, 1.0)
    with pytest.raises(GeometryError):
        picard_evolve(CASE_A_1D, a, GridField.constant(1, 2.0, 32, 1.0), 0.1)
    with pytest.raises(GeometryError):
        picard_evolve(SystemParams(2, 4, 4), a, a, 0.1)


def test_options_validation():
    with pytest.raises(ValueError):
        PicardOptions(rule="simpson")
    with pytest.raises(ValueError):
        PicardOptions(max_iter=0)


def test_report_dict_schema():
    mu, nu = case_a_fields(0.05, M=256)
    d = picard_evolve(CASE_A_1D, mu, nu, 0.5).to_dict()
    assert set(d) >= {"params", "case", "grid", "timegrid", "iterations", "status", "cap_info"}
    assert set(d["iterations"][0]) == {"n", "sup_u", "sup_v", "diff"}


# supersolution for case A

CASE_A_3D = SystemParams(3, 2, 3)


def test_alpha_interval():
    assert alpha_interval(CASE_A_3D) == pytest.approx((1.0, 9 / 4))


@pytest.mark.parametrize("alpha", [1.0, 2.25, 3.0])
def test_alpha_out_of_range(alpha):
    mu, nu = make_optimal_profile(CASE_A_3D, "A", 1.0, 1.0)
    with pytest.raises(HypothesisError):
        verify_supersolution_caseA(CASE_A_3D, alpha, mu, nu, [(0.0, 0.5)])


def test_supersolution_needs_case_a():
    mu, nu = make_optimal_profile(SystemParams(1, 3, 3), "C", 1.0, 1.0)
    with pytest.raises(HypothesisError):
        verify_supersolution_caseA(SystemParams(1, 3, 3), 1.3, mu, nu, [(0.0, 0.5)])


def test_zero_data_has_zero_slack():
    mu, nu = make_optimal_profile(CASE_A_3D, "A", 0.0, 0.0)
    res = verify_supersolution_caseA(CASE_A_3D, 1.3, mu, nu, [(0.0, 0.5), (1.0, 0.1)])
    assert res.min_slack == 0.0
    assert res.verified


@pytest.mark.parametrize("c, verified", [(1e-3, True), (1e3, False)])
def test_supersolution_amplitudes(c, verified):
    mu, nu = make_optimal_profile(CASE_A_3D, "A", c, c)
    res = verify_supersolution_caseA(CASE_A_3D, 1.3, mu, nu, [(0.5, 0.1)], gamma_times=[0.1])
    assert res.verified is verified
    assert (res.min_slack >= 0) is verified
    assert len(res.rows()) == 1
