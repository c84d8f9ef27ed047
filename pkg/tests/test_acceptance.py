"""The ten acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line (see conftest) before asserting.
"""

import math

import numpy as np
import pytest

from hjselect.corpus import brute_force_lp
from hjselect.ergodic import (c_of_lambda, clear_caches, critical_value, discount_critical_value,
                              h_of_c, lp_critical_value)
from hjselect.geometry import StarDomain, build_grid
from hjselect.hamiltonians import make_hamiltonian
from hjselect.hjsolver import (backtrace, control_lattice, invariant_report, occupation_measure,
                               solve, update_operator)
from hjselect.linprog import LPProblem, solve_lp
from hjselect.mather import (default_velocity_grid, holonomy_residual, mather_extremes,
                             mather_measure, objective)
from hjselect.sweep import CRule, RRule, SweepConfig, characterization_zeta, converse_zeta, run_sweep

H_STEP = 0.005
SQRT2 = math.sqrt(2.0)
QUAD = {"kind": "quadratic", "a": 1.0}
LIN = {"kind": "linear", "b": -1.0}


@pytest.fixture(scope="module")
def domain():
    return StarDomain.interval(-1.0, 1.0)


@pytest.fixture(scope="module")
def grid(domain):
    return build_grid(domain, H_STEP)


def mech(V, domain):
    return make_hamiltonian({"preset": "mech", "kappa": 1.0, "V": V}, domain)


def check(entry, name):
    return next(e for e in entry.checklist if e["name"] == name)


_SWEEPS = {}


def sweep(grid, domain, V, r_rule, C_rule):
    key = (str(V), r_rule, C_rule)
    if key not in _SWEEPS:
        clear_caches()
        _SWEEPS[key] = run_sweep(SweepConfig(grid, mech(V, domain), r_rule=r_rule, C_rule=C_rule))
    return _SWEEPS[key]


def test_criterion_01_interior_minimum(grid, domain, criterion):
    H = mech(QUAD, domain)
    c_lp = lp_critical_value(grid, H)
    c_disc, _, _ = discount_critical_value(grid, H)
    mu, _ = mather_measure(grid, default_velocity_grid(grid, H), H)
    mass = mu.mass_near([0.0], 2 * grid.spacing, [0.0], 2 * grid.spacing)
    ok = abs(c_lp) <= 1e-3 and abs(c_disc) <= 1e-3 and mass >= 0.99
    criterion(1, "critical value, interior minimum", ok,
              f"c_LP {c_lp:.2e}, c_discount {c_disc:.2e}, mass near (0,0) {mass:.4f}")
    assert ok


def test_criterion_02_boundary_minimum(grid, domain, criterion):
    H = mech(LIN, domain)
    c_H = critical_value(grid, H).value
    lam = 0.0125
    rule = RRule("affine", 1.0)
    sigma = (c_of_lambda(grid, H, lam, rule) - c_H) / rule(lam)
    verts = mather_extremes(grid, default_velocity_grid(grid, H), H)
    minus_Ix = -min(m.I_x for m in verts)
    ok = abs(c_H - 1) <= 1e-3 and abs(sigma - 1) <= 0.02 and abs(sigma - minus_Ix) <= 0.02
    criterion(2, "critical value, boundary minimum", ok,
              f"c(H) {c_H:.6f}, sigma(0.0125) {sigma:.4f}, -I_x {minus_Ix:.4f}")
    assert ok


def test_criterion_03_selection_limit(grid, domain, criterion):
    rep = sweep(grid, domain, QUAD, RRule(), CRule("fixed_cH"))
    x = grid.points[:, 0]
    e_exact = float(np.max(np.abs(rep.u0 - x ** 2 / SQRT2)))
    e_sel = float(np.max(np.abs(rep.u0 - rep.selected)))
    tol = max(5 * grid.spacing, 0.01)
    ok = e_exact <= tol and e_sel <= tol
    criterion(3, "selection limit, eta = 0", ok,
              f"|u0 - x^2/sqrt2| {e_exact:.4f}, |u0 - sup E| {e_sel:.2e}, tol {tol}")
    assert ok


def test_criterion_04_zeta_shift(grid, domain, criterion):
    x = grid.points[:, 0]
    parts, ok = [], True
    for zeta in (1.0, 2.0):
        rep = sweep(grid, domain, QUAD, RRule(), CRule("affine", zeta=zeta))
        err = float(np.max(np.abs(rep.u0 - (zeta + x ** 2 / SQRT2))))
        conv = abs(rep.zeta_hat - converse_zeta(rep))
        ok &= err <= 0.03 and conv <= 0.05
        parts.append(f"zeta {zeta:g}: field err {err:.4f}, converse gap {conv:.2e}")
    criterion(4, "zeta shift and converse identity", ok, "; ".join(parts))
    assert ok


def test_criterion_05_characterization(grid, domain, criterion):
    rep = sweep(grid, domain, LIN, RRule("affine", 1.0), CRule("c_of_lambda"))
    gap = abs(rep.zeta_hat - characterization_zeta(rep))
    stab = check(rep, "zeta_rho_stabilize")
    ok = gap <= 0.05 and stab["pass"]
    criterion(5, "characterization identity", ok,
              f"|zeta - max(-rho I_u - eta I_x)| {gap:.2e}, zeta stable {stab['zeta_stable']}, "
              f"rho stable {stab['rho_stable']}")
    assert ok


def test_criterion_06_level_maps(grid, domain, criterion):
    H = mech(QUAD, domain)
    c_H = critical_value(grid, H).value
    levels = np.array([-0.5, -0.25, 0.0, 0.25, 0.5])
    h0 = np.array([h_of_c(grid, H, c) for c in levels])
    err = float(np.max(np.abs(h0[[0, -1]] - (levels[[0, -1]] - c_H))))
    ratios = [abs(h0[i] - h0[j]) / abs(levels[i] - levels[j])
              for i in range(len(levels)) for j in range(i + 1, len(levels))]
    lip_ok = all(0 < q <= 1 / H.kappa + 2e-3 for q in ratios)
    rep = sweep(grid, domain, QUAD, RRule(), CRule("fixed_c", c=0.5))
    lam_u = float(rep.lam_u(rep.records[-1])[rep.x_ref])
    ok = err <= 2e-3 and lip_ok and abs(lam_u - 0.5) <= 0.01
    criterion(6, "level maps", ok,
              f"|h0(c) - (c - c(H))| {err:.2e}, Lipschitz ratios in [{min(ratios):.4f}, {max(ratios):.4f}], "
              f"lambda u(x_ref) {lam_u:.4f}")
    assert ok


def test_criterion_07_h0_differentiability(grid, domain, criterion):
    rep = sweep(grid, domain, QUAD, RRule(), CRule("fixed_cH"))
    left, right = rep.h0_slopes
    inv = [1 / (-m.I_u) for m in rep.vertices]
    ok = abs(left - right) <= 2e-3 and abs(right - 1.0) <= 2e-3 and abs(left - 1.0) <= 2e-3
    # du_L = -kappa on every mech vertex, so the distinct-slope half has no mech instance;
    # the vertex min/max report covers it
    criterion(7, "h0 differentiability", ok,
              f"slopes ({left:.5f}, {right:.5f}), vertex 1/(-I_u) range [{min(inv):.4f}, {max(inv):.4f}]")
    assert ok


def test_criterion_08_occupation_convergence(grid, domain, criterion):
    H = mech(QUAD, domain)
    gaps, hol, alpha_dev = [], [], 0.0
    for lam in (0.2, 0.1, 0.05):
        fld = solve(grid, H, lam, 0.0)
        traj = backtrace(fld, H, lam, 0.0, 0.0, [0.8], 40.0 / lam)
        mu = occupation_measure(traj, grid, control_lattice(1, fld.M, fld.K))
        gaps.append(objective(mu, H) - 0.0)  # c(H) = 0, so the Mather value is 0
        hol.append(holonomy_residual(mu))
        alpha_dev = max(alpha_dev, float(np.max(np.abs(traj.alpha - np.abs(traj.times)))))
    mono = all(b < a for a, b in zip(gaps, gaps[1:])) and all(b < a for a, b in zip(hol, hol[1:]))
    ok = mono and gaps[-1] <= 0.02 and hol[-1] <= 0.02 and alpha_dev <= 0.005
    pred = 0.05 * 0.8 ** 2 / SQRT2
    criterion(8, "occupation-measure convergence", ok,
              f"gaps {[round(g, 4) for g in gaps]}, holonomy {[round(v, 4) for v in hol]}, "
              f"alpha dev {alpha_dev:.1e}; gap at lambda 0.05 tracks lambda u(0.8) = {pred:.4f}")
    assert ok


def _corpus_fields(domain):
    d2 = StarDomain.ball(1.0)
    g1, g2 = build_grid(domain, 0.01), build_grid(d2, 0.05)
    cases = [
        (g1, make_hamiltonian({"preset": "mech", "V": QUAD}, domain)),
        (g1, make_hamiltonian({"preset": "mech", "V": LIN}, domain)),
        (g1, make_hamiltonian({"preset": "mech", "V": {"kind": "zero"}}, domain)),
        (g1, make_hamiltonian({"preset": "mech", "V": {"kind": "cosine", "amplitude": 1.0,
                                                        "wavevector": 2 * math.pi}}, domain)),
        (g1, make_hamiltonian({"preset": "eik", "V": {"kind": "zero"}}, domain)),
        (g1, make_hamiltonian({"preset": "eik", "V": QUAD}, domain)),
        (g1, make_hamiltonian({"preset": "nonlin_u", "epsilon": 0.5, "V": QUAD}, domain)),
        (g2, make_hamiltonian({"preset": "mech", "V": QUAD}, d2)),
    ]
    for g, H in cases:
        for lam, C in ((0.5, 1.0), (0.1, 0.0), (0.05, 0.0)):
            yield g, H, solve(g, H, lam, C)


def test_criterion_09_comparison_suite(domain, criterion):
    rng = np.random.default_rng(2024)
    g = build_grid(domain, 0.02)
    Hs = [make_hamiltonian({"preset": "mech", "V": QUAD}, domain),
          make_hamiltonian({"preset": "nonlin_u", "epsilon": 0.5, "V": LIN}, domain),
          make_hamiltonian({"preset": "eik", "V": QUAD}, domain)]
    mono_fail = 0
    for k in range(200):
        H = Hs[k % len(Hs)]
        lam, C = rng.uniform(0.05, 1.0), rng.uniform(-1, 1)
        u = rng.uniform(-2, 2, g.n)
        v = u + rng.uniform(0, 1, g.n) * (rng.random(g.n) < 0.5)
        Tu, Tv = update_operator(u, g, H, lam, C), update_operator(v, g, H, lam, C)
        mono_fail += int(np.any(Tu > Tv + 1e-10))
    comp_fail = 0
    for k in range(20):
        H = Hs[k % len(Hs)]
        lam = rng.uniform(0.05, 1.0)
        C1, C2 = np.sort(rng.uniform(-1, 1, 2))
        comp_fail += int(np.any(solve(g, H, lam, C1).values > solve(g, H, lam, C2).values + 1e-9))
    inv_fail, n_inv = 0, 0
    for _, H, fld in _corpus_fields(domain):
        rep = invariant_report(fld, H)
        n_inv += 1
        inv_fail += int(not (rep["lipschitz_ok"] and rep["bounds_ok"]))
    ok = mono_fail == 0 and comp_fail == 0 and inv_fail == 0
    criterion(9, "comparison and monotonicity", ok,
              f"monotonicity failures {mono_fail}/200, comparison failures {comp_fail}/20, "
              f"invariant failures {inv_fail}/{n_inv}")
    assert ok


def test_criterion_10_lp_core(criterion):
    rng = np.random.default_rng(10)
    worst_gap, worst_dual = 0.0, 0.0
    for n in range(200):
        m = int(rng.integers(2, 5))
        k = int(rng.integers(m + 1, m + 5))
        x0 = rng.uniform(0.0, 1.0, k)
        # a capacity row with its own slack keeps every instance bounded
        A = np.zeros((m + 1, k + 1))
        A[:m, :k] = rng.normal(size=(m, k))
        A[m] = 1.0
        b = np.concatenate([A[:m, :k] @ x0, [x0.sum() + 1.0]])
        c = np.concatenate([rng.normal(size=k), [0.0]])
        sol = solve_lp(LPProblem(c, A, b))
        bf = brute_force_lp(c, A, b)
        worst_gap = max(worst_gap, abs(sol.objective - bf))
        worst_dual = max(worst_dual, abs(sol.objective - float(b @ sol.y)))
    ok = worst_gap <= 1e-9 and worst_dual <= 1e-9
    criterion(10, "LP core", ok, f"200 LPs, worst brute-force gap {worst_gap:.1e}, "
              f"worst duality gap {worst_dual:.1e}")
    assert ok
