import math

import numpy as np
import pytest

from hjselect.corpus import brute_force_lp
from hjselect.ergodic import critical_value, h_of_c
from hjselect.geometry import StarDomain, build_grid
from hjselect.hamiltonians import make_hamiltonian
from hjselect.hjsolver import ControlLattice
from hjselect.linprog import solve_lp
from hjselect.mather import (build_holonomic_lp, default_velocity_grid, holonomy_residual,
                             mather_extremes, mather_integrals, mather_measure, node_weights,
                             objective, wasserstein1, wasserstein1_to_hull)
from hjselect.measures import DiscreteMeasure

DOM = StarDomain.interval(-1, 1)
GRID = build_grid(DOM, 0.01)
QUAD = {"kind": "quadratic", "a": 1.0}
LIN = {"kind": "linear", "b": -1.0}
WELLS = {"kind": "cosine", "amplitude": 1.0, "wavevector": 2 * math.pi}


def H_of(V, preset="mech", **kw):
    return make_hamiltonian({"preset": preset, "V": V, **kw}, DOM)


def test_five_node_lp_against_enumeration():
    g = build_grid(DOM, 0.5)
    lat = ControlLattice(1.0, 1, np.array([[-1.0], [0.0], [1.0]]))
    hlp = build_holonomic_lp(g, lat, H_of(QUAD))
    p = hlp.problem
    assert p.shape == (4, 15)
    sol = solve_lp(p)
    assert sol.objective == pytest.approx(brute_force_lp(p.c, np.asarray(p.A), p.b), abs=1e-12)
    mu = hlp.measure(sol.x)
    assert mu.weights[2, 1] == pytest.approx(1.0)


@pytest.mark.parametrize("V,preset,value,x,tol", [
    (QUAD, "mech", 0.0, 0.0, 5 * 0.01 ** 2),
    (LIN, "mech", -1.0, 1.0, 1e-9),
    (QUAD, "eik", 0.0, 0.0, 1e-12),
])
def test_mather_measure_oracles(V, preset, value, x, tol):
    H = H_of(V, preset)
    mu, val = mather_measure(GRID, default_velocity_grid(GRID, H), H)
    assert val == pytest.approx(value, abs=tol)
    assert mu.mass_near([x], GRID.spacing, [0.0], 1e-9) > 0.99
    assert mu.total_mass == pytest.approx(1.0, abs=1e-10)
    assert holonomy_residual(mu) <= 1e-7
    assert objective(mu, H) == pytest.approx(val, abs=1e-9)


@pytest.mark.parametrize("V", [QUAD, LIN, WELLS])
def test_lp_value_is_minus_critical_value(V):
    H = H_of(V)
    _, val = mather_measure(GRID, default_velocity_grid(GRID, H), H)
    res = critical_value(GRID, H)
    assert val == pytest.approx(-res.value, abs=1e-12)
    assert abs(val + res.discount_value) <= max(1e-3, 5 * GRID.spacing)


def test_integrals_on_diracs():
    mu = DiscreteMeasure.dirac(GRID, np.zeros((1, 1)), GRID.n - 1, 0)
    assert mather_integrals(mu, H_of(LIN)) == (pytest.approx(-1.0), pytest.approx(-1.0))
    origin = int(GRID.nearest_node(np.zeros((1, 1)))[0])
    mu0 = DiscreteMeasure.dirac(GRID, np.zeros((1, 1)), origin, 0)
    I_u, _ = mather_integrals(mu0, H_of(QUAD, "nonlin_u", epsilon=0.5))
    assert I_u == pytest.approx(-1.5)
    w = node_weights(mu0, H_of(QUAD))
    assert w[origin] == pytest.approx(-1.0) and np.count_nonzero(w) == 1


def test_extremes_unique_and_two_wells():
    H = H_of(QUAD)
    assert len(mather_extremes(GRID, default_velocity_grid(GRID, H), H)) == 1
    H2 = H_of(WELLS)
    verts = mather_extremes(GRID, default_velocity_grid(GRID, H2), H2)
    centers = sorted(float(m.measure.x_marginal() @ GRID.points[:, 0]) for m in verts)
    assert centers == pytest.approx([-0.5, 0.5], abs=2 * GRID.spacing)
    for m in verts:
        assert m.I_u < 0
        assert abs(m.I_x) <= 1e-9
        assert holonomy_residual(m.measure) <= 1e-7


def test_wasserstein_between_diracs():
    v = np.array([[0.0], [0.5]])
    a = DiscreteMeasure.dirac(GRID, v, 10, 0)
    b = DiscreteMeasure.dirac(GRID, v, 40, 1)
    # (x, v) distance: sqrt(0.3^2 + 0.5^2)
    assert wasserstein1(a, b) == pytest.approx(math.hypot(0.3, 0.5), abs=1e-9)
    mid = DiscreteMeasure(GRID, v, 0.5 * (a.weights + b.weights))
    assert wasserstein1_to_hull(mid, [a, b]) == pytest.approx(0.0, abs=1e-9)


def test_mather_set_continuity_in_level():
    H = H_of(QUAD)
    vg = default_velocity_grid(GRID, H)
    base = mather_extremes(GRID, vg, H)
    dists = []
    for dc in (0.1, 0.05, 0.025):
        a = h_of_c(GRID, H, dc)
        mu, _ = mather_measure(GRID, vg, H, a)
        dists.append(wasserstein1_to_hull(mu, [m.measure for m in base]))
    assert all(b <= a + 1e-12 for a, b in zip(dists, dists[1:]))
