import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjselect.corpus import transient_mass_prediction
from hjselect.errors import ConfigError, NonConvergence
from hjselect.geometry import StarDomain, build_grid
from hjselect.hamiltonians import CustomHamiltonian, make_hamiltonian
from hjselect.hjsolver import (GridField, backtrace, control_lattice, invariant_report,
                               occupation_measure, residual, solve, update_operator)

DOM = StarDomain.interval(-1, 1)
GRID = build_grid(DOM, 0.02)
QUAD = {"kind": "quadratic", "a": 1.0}


def H_of(preset="mech", V=QUAD, **kw):
    return make_hamiltonian({"preset": preset, "V": V, **kw}, DOM)


def test_eikonal_constant_solution():
    H = H_of("eik", {"kind": "zero"})
    fld = solve(GRID, H, 0.5, 1.0)
    assert np.max(np.abs(fld.values - 2.0)) <= 1e-7
    assert residual(fld, H, 0.5, 1.0) <= 1e-7


def test_residual_of_non_solution():
    H = H_of()
    assert residual(GridField(GRID, np.zeros(GRID.n)), H, 0.0, 0.0) > 0.1


def test_quadratic_potential_value_at_origin():
    fld = solve(build_grid(DOM, 0.005), H_of(), 0.05, 0.0)
    assert abs(fld.value_at([0.0])[0]) <= 0.02


def test_discounted_value_matches_closed_form_at_large_lambda():
    # with V = 0 and C constant the solution is C / (kappa lambda) everywhere
    fld = solve(GRID, H_of(V={"kind": "zero"}, kappa=2.0), 0.3, 0.6)
    assert np.allclose(fld.values, 0.6 / (2.0 * 0.3), atol=1e-9)


@given(st.floats(0.05, 1.0), st.floats(-1, 1), st.integers(0, 2 ** 31))
def test_update_operator_monotone(lam, C, seed):
    rng = np.random.default_rng(seed)
    H = H_of("nonlin_u", epsilon=0.5)
    u = rng.uniform(-2, 2, GRID.n)
    v = u + rng.uniform(0, 1, GRID.n)
    assert np.all(update_operator(u, GRID, H, lam, C) <= update_operator(v, GRID, H, lam, C) + 1e-10)


@given(st.floats(0.05, 1.0), st.floats(-1, 1), st.floats(0.0, 1.0))
def test_comparison_in_C(lam, C1, dC):
    H = H_of()
    lo = solve(GRID, H, lam, C1).values
    hi = solve(GRID, H, lam, C1 + dC).values
    assert np.all(lo <= hi + 1e-9)


@pytest.mark.parametrize("preset,kw", [("mech", {}), ("eik", {}), ("nonlin_u", {"epsilon": 0.5})])
@pytest.mark.parametrize("lam,C", [(0.5, 1.0), (0.05, -0.2)])
def test_lipschitz_and_bounds(preset, kw, lam, C):
    H = H_of(preset, **kw)
    rep = invariant_report(solve(GRID, H, lam, C), H)
    assert rep["lipschitz_ok"] and rep["bounds_ok"]


def test_jacobi_iterates_contract():
    H = H_of()
    lam = 0.2
    u = np.full(GRID.n, 3.0)
    deltas = []
    for _ in range(40):
        new = update_operator(u, GRID, H, lam, 0.0)
        deltas.append(np.max(np.abs(new - u)))
        u = new
    ratios = np.array(deltas[11:]) / np.array(deltas[10:-1])
    dt = GRID.spacing / H.v_bound
    assert np.all(ratios <= 1 - 0.5 * lam * dt)


def test_uniform_bound_across_lambda():
    H = H_of()
    g = build_grid(DOM, 0.01)
    norms = [np.max(np.abs(solve(g, H, lam, 0.0).values)) for lam in (0.2, 0.1, 0.05, 0.025)]
    u0 = np.max(g.points[:, 0] ** 2 / math.sqrt(2))
    assert max(norms) <= 2 * u0 + 1e-9


def test_custom_path_matches_separable():
    g = build_grid(DOM, 0.1)
    mech = H_of()
    custom = CustomHamiltonian(
        lambda x, p, u: 0.5 * np.sum(p * p, -1) + u - np.sum(x * x, -1), kappa=1.0,
        p_bound=mech.p_bound, v_bound=mech.v_bound)
    a = solve(g, mech, 0.5, 0.1, K=6).values
    b = solve(g, custom, 0.5, 0.1, K=6).values
    assert np.max(np.abs(a - b)) <= 1e-3


def test_negative_lambda_rejected():
    with pytest.raises(ConfigError):
        solve(GRID, H_of(), -0.1, 0.0)


def test_iteration_cap():
    with pytest.raises(NonConvergence):
        solve(GRID, H_of(), 0.01, 0.0, max_sweeps=1)


def test_rest_trajectory():
    H = H_of(V={"kind": "zero"})
    fld = solve(GRID, H, 0.1, 0.0)
    traj = backtrace(fld, H, 0.1, 0.0, 0.0, [0.3], 1.0)
    assert np.all(traj.points == 0.3) and np.all(traj.controls == 0.0)


def test_trajectory_invariants():
    g = build_grid(DOM, 0.005)
    H = H_of()
    fld = solve(g, H, 0.05, 0.0)
    traj = backtrace(fld, H, 0.05, 0.0, 0.0, [0.8], 10.0)
    x = np.abs(traj.points[:, 0])
    assert np.all(np.diff(x) <= 1e-12) and x[-1] <= 2 * g.spacing
    assert np.all(np.abs(traj.controls) <= fld.M + 1e-12)
    assert np.all(DOM.in_closure(traj.points))
    assert np.all(np.diff(traj.alpha) >= 0)
    assert np.allclose(traj.alpha, np.abs(traj.times), atol=1e-9)


def test_alpha_bounds_nonlinear():
    H = H_of("nonlin_u", epsilon=0.5)
    fld = solve(build_grid(DOM, 0.01), H, 0.1, 0.0)
    traj = backtrace(fld, H, 0.1, 0.0, 0.0, [0.7], 5.0)
    # du_L = -(kappa + eps) along the whole path at level u = 0
    assert np.max(np.abs(traj.alpha - 1.5 * np.abs(traj.times))) <= 1.5 * traj.dt


def test_occupation_measure_mass_follows_transient():
    g = build_grid(DOM, 0.005)
    H = H_of()
    fld = solve(g, H, 0.05, 0.0)
    traj = backtrace(fld, H, 0.05, 0.0, 0.0, [0.8], 200.0)
    mu = occupation_measure(traj, g, control_lattice(1, fld.M, fld.K))
    assert mu.total_mass == pytest.approx(1.0, abs=1e-10)
    mass = mu.mass_near([0.0], 2 * g.spacing, [0.0], 2 * fld.M / fld.K)
    assert mass >= transient_mass_prediction(radius=2 * g.spacing) - 0.02


def test_solve_2d_smoke():
    dom = StarDomain.ball(1.0)
    g = build_grid(dom, 0.05)
    H = make_hamiltonian({"preset": "mech", "V": QUAD}, dom)
    fld = solve(g, H, 0.2, 0.0)
    assert fld.residual <= 1e-7
    r = np.linalg.norm(g.points, axis=1)
    # radially symmetric data: the field depends on |x| up to discretization error
    ring = np.abs(r - 0.5) < 0.03
    assert np.ptp(fld.values[ring]) <= 0.05
    assert invariant_report(fld, H)["lipschitz_ok"]
