"""Bundled oracle suite: preset problems whose answers are known in closed form
or by brute force.  Each manifest entry appears exactly once."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SeparationViolated
from .geometry import StarDomain, build_grid, check_separation
from .hamiltonians import CustomHamiltonian, make_hamiltonian, validate_assumptions

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Entry:
    id: str
    module: str
    description: str
    quick: bool
    run: object  # callable () -> (passed, detail)


_GRIDS = {}


def _interval_grid(h):
    key = ("interval", h)
    if key not in _GRIDS:
        _GRIDS[key] = build_grid(StarDomain.interval(-1.0, 1.0), h)
    return _GRIDS[key]


def _mech(V, kappa=1.0, grid=None):
    dom = StarDomain.interval(-1.0, 1.0) if grid is None else grid.domain
    return make_hamiltonian({"preset": "mech", "kappa": kappa, "V": V}, dom)


QUAD = {"kind": "quadratic", "a": 1.0}
LIN = {"kind": "linear", "b": -1.0}
ZERO = {"kind": "zero"}
TWO_WELLS = {"kind": "cosine", "amplitude": 1.0, "wavevector": 2 * math.pi}


def _ok(flag, detail):
    return bool(flag), detail


# ------------------------------------------------------------ geometry
def geometry_ball_separation():
    rep = check_separation(StarDomain.ball(1.0, theta=0.9), [0.1], raise_on_fail=False)
    return _ok(rep.passed and abs(rep.min_ratio - 1) < 1e-3, f"min ratio {rep.min_ratio:.6f}")


def geometry_interval_separation():
    rep = check_separation(StarDomain.interval(-1, 1, theta=0.9), [0.2], raise_on_fail=False)
    return _ok(rep.passed and abs(rep.min_ratio - 1) < 1e-9, f"min ratio {rep.min_ratio:.6f}")


def spike_profile(n=256, height=1.5, width=1):
    """Unit circle with a narrow outward spike: points beside the spike sit
    much closer to the boundary than their radial offset."""
    radii = np.ones(n)
    radii[:width] = height
    return radii


def geometry_spike_violation():
    dom = StarDomain.radial(spike_profile(), theta=0.99)
    try:
        check_separation(dom, [0.1])
    except SeparationViolated as exc:
        return True, f"raised with {len(exc.witnesses)} witnesses"
    return False, "no violation raised"


def geometry_disk_count():
    g = build_grid(StarDomain.ball(1.0), 0.5)
    brute = sum(1 for i in range(-2, 3) for j in range(-2, 3) if (0.5 * i) ** 2 + (0.5 * j) ** 2 <= 1)
    return _ok(g.n == brute == 13, f"{g.n} nodes, enumeration {brute}")


# ------------------------------------------------------------ hamiltonians
def ham_custom_legendre():
    # kappa is only declared; this H ignores u
    H = CustomHamiltonian(lambda x, p, u: 0.5 * np.sum(p * p, axis=-1), kappa=1.0, p_bound=4.0)
    val = float(H.L(np.zeros((1, 1)), np.ones((1, 1)), np.zeros(1))[0])
    return _ok(abs(val - 0.5) < 1e-4, f"L(v=1) = {val:.8f}")


def ham_nonlin_du():
    H = make_hamiltonian({"preset": "nonlin_u", "kappa": 1.0, "epsilon": 0.5, "V": QUAD},
                         StarDomain.interval(-1, 1))
    rng = np.random.default_rng(0)
    x, v = rng.uniform(-1, 1, (50, 1)), rng.uniform(-2, 2, (50, 1))
    du = H.du_L(x, v)
    return _ok(np.allclose(du, -1.5, atol=1e-12), f"du_L range [{du.min()}, {du.max()}]")


def ham_mech_assumptions():
    rep = validate_assumptions(_mech(QUAD), StarDomain.interval(-1, 1), 1024, 0)
    return _ok(rep.passed, ", ".join(f"{c.name}:{c.passed}" for c in rep.checks))


def ham_nonlin_c1_failure():
    dom = StarDomain.interval(-1, 1)
    H = make_hamiltonian({"preset": "nonlin_u", "kappa": 1.0, "epsilon": 1.5, "V": QUAD}, dom)
    c1 = validate_assumptions(H, dom, 1024, 0)["C1"]
    return _ok(not c1.passed and bool(c1.witness), f"C1 worst {c1.worst:.3g}")


# ------------------------------------------------------------ linprog
def brute_force_lp(c, A, b):
    """Minimum of c.x over basic feasible solutions, by enumerating bases."""
    m, n = A.shape
    best = math.inf
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xB = np.linalg.solve(B, b)
        if np.all(xB >= -1e-10):
            best = min(best, float(c[list(cols)] @ xB))
    return best


def lp_random_4x7():
    from .linprog import LPProblem, solve_lp
    rng = np.random.default_rng(7)
    A = rng.normal(size=(4, 7))
    b = A @ rng.uniform(0.1, 1.0, 7)
    c = np.abs(rng.normal(size=7))
    bf = brute_force_lp(c, A, b)
    sol = solve_lp(LPProblem(c, A, b))
    return _ok(sol.optimal and abs(sol.objective - bf) <= 1e-9, f"simplex {sol.objective:.12g} brute {bf:.12g}")


def lp_face_segment():
    from .linprog import LPProblem, sample_optimal_face
    verts = sample_optimal_face(LPProblem(np.zeros(2), np.ones((1, 2)), np.ones(1)), 8, seed=0)
    pts = sorted(tuple(np.round(v.x, 9)) for v in verts)
    return _ok(pts == [(0.0, 1.0), (1.0, 0.0)], f"vertices {pts}")


def lp_mather_two_wells():
    from .mather import default_velocity_grid, mather_extremes
    g = _interval_grid(0.01)
    H = _mech(TWO_WELLS)
    verts = mather_extremes(g, default_velocity_grid(g, H), H)
    centers = sorted(float(np.sum(v.measure.x_marginal() * g.points[:, 0])) for v in verts)
    near = [min(abs(c - 0.5), abs(c + 0.5)) for c in centers]
    ok = len(verts) == 2 and max(near) <= 2 * g.spacing and abs(centers[0] - centers[1]) > 0.5
    return _ok(ok, f"{len(verts)} vertices at {centers}")


# ------------------------------------------------------------ hjsolver
def solver_quadratic_origin():
    from .hjsolver import solve
    g = _interval_grid(0.005)
    fld = solve(g, _mech(QUAD), 0.05, 0.0, 0.0)
    u0 = float(fld.value_at([0.0])[0])
    return _ok(-0.02 <= u0 <= 0.02, f"u(0) = {u0:.3e}")


def _eik_zero():
    return make_hamiltonian({"preset": "eik", "kappa": 1.0, "V": ZERO}, StarDomain.interval(-1, 1))


def solver_eikonal_constant():
    from .hjsolver import solve
    fld = solve(_interval_grid(0.01), _eik_zero(), 0.5, 1.0, 0.0)
    err = float(np.max(np.abs(fld.values - 2.0)))
    return _ok(err <= 1e-7, f"max |u - 2| = {err:.2e}")


def solver_residual_nonsolution():
    from .hjsolver import GridField, residual
    g = _interval_grid(0.01)
    H = _mech(QUAD)
    fld = GridField(g, np.zeros(g.n), 0.0, 0.0, 0.0)
    res = residual(fld, H, 0.0, 0.0, 0.0)
    return _ok(res > 0.1, f"residual {res:.3f}")


def solver_residual_exact():
    from .hjsolver import GridField, residual
    g = _interval_grid(0.01)
    fld = GridField(g, np.full(g.n, 2.0), 0.5, 1.0, 0.0)
    res = residual(fld, _eik_zero(), 0.5, 1.0, 0.0)
    return _ok(res <= 1e-7, f"residual {res:.2e}")


def solver_rest_trajectory():
    from .hjsolver import backtrace, solve
    g = _interval_grid(0.01)
    H = _mech(ZERO)
    fld = solve(g, H, 0.1, 0.0, 0.0)
    traj = backtrace(fld, H, 0.1, 0.0, 0.0, [0.3], 2.0)
    moved = float(np.max(np.abs(traj.points - 0.3)))
    return _ok(moved == 0.0 and np.all(traj.controls == 0.0), f"max displacement {moved}")


def _quad_trajectory(lam=0.05, T=200.0):
    from .hjsolver import backtrace, solve
    g = _interval_grid(0.005)
    H = _mech(QUAD)
    fld = solve(g, H, lam, 0.0, 0.0)
    return g, H, fld, backtrace(fld, H, lam, 0.0, 0.0, [0.8], T)


def solver_trajectory_to_origin():
    g, _, _, traj = _quad_trajectory(T=10.0)
    x = np.abs(traj.points[:, 0])
    mono = bool(np.all(np.diff(x) <= 1e-12))
    return _ok(mono and x[-1] <= 2 * g.spacing, f"monotone={mono}, final |x| = {x[-1]:.2e}")


def solver_alpha_bounds():
    from .hjsolver import backtrace, solve
    g = _interval_grid(0.01)
    H = make_hamiltonian({"preset": "nonlin_u", "kappa": 1.0, "epsilon": 0.5, "V": QUAD},
                         StarDomain.interval(-1, 1))
    fld = solve(g, H, 0.1, 0.0, 0.0)
    traj = backtrace(fld, H, 0.1, 0.0, 0.0, [0.7], 5.0)
    t = np.abs(traj.times)
    dev = float(np.max(np.abs(traj.alpha - 1.5 * t)))
    return _ok(dev <= 1.5 * traj.dt, f"max |alpha - 1.5 t| = {dev:.2e}, dt = {traj.dt:.3g}")


def transient_mass_prediction(x0=0.8, lam=0.05, T=200.0, radius=0.01, rate=SQRT2):
    """Discounted mass left after the continuum path x0 exp(-rate t) enters the radius."""
    t_in = math.log(x0 / radius) / rate
    return (math.exp(-lam * t_in) - math.exp(-lam * T)) / (1 - math.exp(-lam * T))


def solver_occupation_mass():
    from .hjsolver import occupation_measure
    g, H, fld, traj = _quad_trajectory()
    mu = occupation_measure(traj, g, fld_controls(fld))
    cell_v = fld.M / fld.K
    mass = mu.mass_near([0.0], 2 * g.spacing, [0.0], 2 * cell_v)
    pred = transient_mass_prediction(radius=2 * g.spacing)
    # the nominal 0.95 is below what any path from 0.8 can reach; gate on the transient bound
    return _ok(mass >= pred - 0.02, f"mass {mass:.3f}, continuum prediction {pred:.3f}, nominal 0.95")


def fld_controls(fld):
    from .hjsolver import control_lattice
    return control_lattice(fld.grid.dimension, fld.M, fld.K)


# ------------------------------------------------------------ ergodic
def _c(V, a=0.0, r=0.0, h=0.01):
    from .ergodic import critical_value
    return critical_value(_interval_grid(h), _mech(V), a, r).value


def ergodic_quadratic():
    c = _c(QUAD)
    return _ok(abs(c) <= 1e-3, f"c = {c:.3e}")


def ergodic_linear():
    c = _c(LIN)
    return _ok(abs(c - 1) <= 1e-3, f"c = {c:.6f}")


def ergodic_level():
    c = _c(QUAD, a=0.5)
    return _ok(abs(c - 0.5) <= 1e-3, f"c = {c:.6f}")


def ergodic_scaled_quadratic():
    c = _c(QUAD, r=0.1)
    return _ok(abs(c) <= 1e-3, f"c(lambda) = {c:.3e}")


def ergodic_scaled_linear():
    c = _c(LIN, r=0.1)
    return _ok(abs(c - 1.1) <= 1e-3, f"c(lambda) = {c:.6f}")


def ergodic_h0():
    from .ergodic import h_of_c
    h = h_of_c(_interval_grid(0.01), _mech(QUAD), 0.5)
    return _ok(abs(h - 0.5) <= 2e-3, f"h0(0.5) = {h:.6f}")


# ------------------------------------------------------------ mather
def mather_five_nodes():
    from .hjsolver import ControlLattice
    from .linprog import solve_lp
    from .mather import build_holonomic_lp
    g = build_grid(StarDomain.interval(-1, 1), 0.5)
    lat = ControlLattice(1.0, 1, np.array([[-1.0], [0.0], [1.0]]))
    hlp = build_holonomic_lp(g, lat, _mech(QUAD, grid=g))
    p = hlp.problem
    sol = solve_lp(p)
    mu = hlp.measure(sol.x)
    bf = brute_force_lp(p.c, np.asarray(p.A), p.b)
    ok = abs(sol.objective) <= 1e-12 and abs(bf) <= 1e-12 and mu.weights[2, 1] > 1 - 1e-9
    return _ok(ok, f"value {sol.objective:.3g}, brute {bf:.3g}, shape {p.shape}")


def _mather(V, preset="mech"):
    from .mather import default_velocity_grid, mather_measure
    g = _interval_grid(0.01)
    H = make_hamiltonian({"preset": preset, "kappa": 1.0, "V": V}, g.domain)
    mu, val = mather_measure(g, default_velocity_grid(g, H), H)
    return g, H, mu, val


def mather_boundary():
    g, _, mu, val = _mather(LIN)
    ok = abs(val + 1) <= 1e-9 and mu.mass_near([1.0], 1e-9, [0.0], 1e-9) > 1 - 1e-9
    return _ok(ok, f"value {val:.6f}")


def mather_quadratic():
    g, _, mu, val = _mather(QUAD)
    ok = abs(val) <= 5 * g.spacing ** 2 and mu.mass_near([0.0], g.spacing, [0.0], 1e-9) > 0.99
    return _ok(ok, f"value {val:.2e}")


def mather_eikonal():
    g, _, mu, val = _mather(QUAD, "eik")
    ok = abs(val) <= 1e-12 and mu.mass_near([0.0], 1e-9, [0.0], 1e-9) > 1 - 1e-9
    return _ok(ok, f"value {val:.2e}")


def mather_integrals_boundary():
    from .mather import mather_integrals
    from .measures import DiscreteMeasure
    g = _interval_grid(0.01)
    mu = DiscreteMeasure.dirac(g, np.zeros((1, 1)), g.n - 1, 0)
    I_u, I_x = mather_integrals(mu, _mech(LIN))
    return _ok(abs(I_u + 1) < 1e-12 and abs(I_x + 1) < 1e-12, f"I_u {I_u}, I_x {I_x}")


def mather_integrals_nonlin():
    from .mather import mather_integrals
    from .measures import DiscreteMeasure
    g = _interval_grid(0.01)
    H = make_hamiltonian({"preset": "nonlin_u", "kappa": 1.0, "epsilon": 0.5, "V": QUAD}, g.domain)
    mu = DiscreteMeasure.dirac(g, np.zeros((1, 1)), int(g.nearest_node(np.zeros((1, 1)))[0]), 0)
    I_u, _ = mather_integrals(mu, H)
    return _ok(abs(I_u + 1.5) < 1e-12, f"I_u {I_u}")


def _extremes(V):
    from .mather import default_velocity_grid, mather_extremes
    g = _interval_grid(0.01)
    H = _mech(V)
    return g, mather_extremes(g, default_velocity_grid(g, H), H)


def mather_unique():
    _, verts = _extremes(QUAD)
    return _ok(len(verts) == 1, f"{len(verts)} vertices")


def mather_two_wells_integrals():
    _, verts = _extremes(TWO_WELLS)
    I_x = [m.I_x for m in verts]
    return _ok(len(verts) == 2 and max(abs(v) for v in I_x) <= 1e-9, f"I_x {I_x}")


# ------------------------------------------------------------ selection
def _selection(V, zeta=0.0, h=0.005):
    from .selection import selection_problem, sup_selected
    g = _interval_grid(h)
    H = _mech(V)
    prob = selection_problem(g, H, 0.0, zeta)
    return g, prob, sup_selected(prob)


def selection_quadratic():
    g, _, w = _selection(QUAD)
    err = float(np.max(np.abs(w.values - g.points[:, 0] ** 2 / SQRT2)))
    return _ok(err <= 5 * g.spacing, f"max error {err:.2e}")


def selection_zeta_two():
    g, _, w = _selection(QUAD, 2.0)
    err = float(np.max(np.abs(w.values - 2 - g.points[:, 0] ** 2 / SQRT2)))
    return _ok(err <= 5 * g.spacing, f"max error {err:.2e}")


def selection_zero_potential():
    g, _, w = _selection(ZERO, h=0.01)
    err = float(np.max(np.abs(w.values)))
    return _ok(err <= 5 * g.spacing, f"max |w| {err:.2e}")


def selection_raised_violates():
    from .selection import membership_check
    _, prob, w = _selection(QUAD)
    rep = membership_check(w.values + 0.1, prob)
    return _ok(not rep.member and rep.worst_measure_slack < -rep.measure_tol,
               f"worst measure slack {rep.worst_measure_slack:.3g}")


def selection_lowered_member():
    from .selection import membership_check
    _, prob, w = _selection(QUAD)
    rep = membership_check(w.values - 1.0, prob)
    return _ok(rep.member, f"worst slacks {rep.worst_subsolution_slack:.2e}, {rep.worst_measure_slack:.2e}")


def selection_dominance():
    from .selection import dominance_check, random_members
    _, prob, w = _selection(QUAD)
    rep = dominance_check(w, random_members(prob, 10, seed=1), prob)
    return _ok(rep.worst_excess <= rep.tol, f"worst excess {rep.worst_excess:.2e}")


# ------------------------------------------------------------ sweep
def _sweep(V, r_rule, C_rule, h=0.005):
    from .sweep import SweepConfig, run_sweep
    g = _interval_grid(h)
    return run_sweep(SweepConfig(g, _mech(V), r_rule=r_rule, C_rule=C_rule))


def _check(report, name):
    return next(e for e in report.checklist if e["name"] == name)


def sweep_eta_zero():
    from .sweep import CRule, RRule
    rep = _sweep(QUAD, RRule(), CRule())
    h = rep.grid.spacing
    gap = float(np.max(np.abs(rep.u0 - rep.selected)))
    return _ok(abs(rep.zeta_hat) <= 1e-9 and gap <= 5 * h, f"zeta {rep.zeta_hat:.2e}, |u0 - supE| {gap:.2e}")


def sweep_boundary_sigma():
    from .sweep import CRule, RRule
    rep = _sweep(LIN, RRule("affine", 1.0), CRule("c_of_lambda"))
    ok = abs(rep.sigma_hat - 1) <= 0.05 and abs(rep.zeta_hat - 1.0 * rep.sigma_hat) <= 0.05
    return _ok(ok, f"sigma {rep.sigma_hat:.4f}, zeta {rep.zeta_hat:.4f}")


def sweep_affine_zeta():
    from .sweep import CRule, RRule
    rep = _sweep(QUAD, RRule("affine", 2.0), CRule("affine", zeta=1.0))
    u0 = float(rep.u0[rep.x_ref])
    return _ok(abs(u0 - 1) <= 5 * rep.grid.spacing, f"u0(0) = {u0:.4f}")


def sweep_checklist_affine():
    from .sweep import CRule, RRule
    rep = _sweep(QUAD, RRule("affine", 1.0), CRule("affine", zeta=1.0))
    names = ("T1", "T2", "T3", "T5")
    res = {n: _check(rep, n)["pass"] for n in names}
    return _ok(all(res.values()), str(res))


def sweep_fixed_c():
    from .sweep import CRule, RRule
    rep = _sweep(QUAD, RRule(), CRule("fixed_c", c=0.5))
    t4 = _check(rep, "T4")
    return _ok(t4["pass"] and abs(rep.h0_limit - 0.5) <= 2e-3, f"T4 value {t4['value']:.2e}, h0 {rep.h0_limit:.4f}")


def sweep_two_sided_sigma():
    from .sweep import CRule, RRule
    res = []
    for eta in (1.0, -1.0):
        rep = _sweep(LIN, RRule("affine", eta), CRule("c_of_lambda"))
        res.append((eta, _check(rep, "T6")["pass"], rep.sigma_hat))
    return _ok(all(p for _, p, _ in res), str(res))


MANIFEST = [
    Entry("geometry.separation_ball", "geometry", "ball(1), theta 0.9, eps 0.1: ratio 1", False, geometry_ball_separation),
    Entry("geometry.separation_interval", "geometry", "interval(-1,1), theta 0.9, eps 0.2: ratio 1", True, geometry_interval_separation),
    Entry("geometry.separation_spike", "geometry", "radial spike, theta 0.99: violation", False, geometry_spike_violation),
    Entry("geometry.disk_lattice", "geometry", "unit disk, h 0.5: 13 nodes", False, geometry_disk_count),
    Entry("hamiltonians.custom_legendre", "hamiltonians", "numeric transform of p^2/2 at v=1 is 0.5", True, ham_custom_legendre),
    Entry("hamiltonians.nonlin_du", "hamiltonians", "nonlin_u(1, 0.5): du_L = -1.5", True, ham_nonlin_du),
    Entry("hamiltonians.mech_assumptions", "hamiltonians", "mech(x^2): all assumption checks pass", True, ham_mech_assumptions),
    Entry("hamiltonians.nonlin_c1_fails", "hamiltonians", "nonlin_u(1, 1.5): C1 fails with witness", True, ham_nonlin_c1_failure),
    Entry("linprog.random_4x7", "linprog", "random 4x7 LP matches basis enumeration", True, lp_random_4x7),
    Entry("linprog.face_segment", "linprog", "x1 + x2 = 1 face: two vertices", True, lp_face_segment),
    Entry("linprog.mather_two_wells", "linprog", "two equal wells: two near-Dirac vertices", True, lp_mather_two_wells),
    Entry("hjsolver.quadratic_origin", "hjsolver", "mech(x^2), lambda 0.05: |u(0)| <= 0.02", True, solver_quadratic_origin),
    Entry("hjsolver.eikonal_constant", "hjsolver", "eik(0), lambda 0.5, C 1: u = 2", True, solver_eikonal_constant),
    Entry("hjsolver.residual_nonsolution", "hjsolver", "u = 0 is not a solution: residual > 0.1", True, solver_residual_nonsolution),
    Entry("hjsolver.residual_exact", "hjsolver", "constant eikonal solution: residual <= 1e-7", True, solver_residual_exact),
    Entry("hjsolver.rest_trajectory", "hjsolver", "mech(0): stationary trajectory", True, solver_rest_trajectory),
    Entry("hjsolver.trajectory_to_origin", "hjsolver", "mech(x^2) from 0.8: monotone, ends within 2h", True, solver_trajectory_to_origin),
    Entry("hjsolver.alpha_bounds", "hjsolver", "nonlin_u(1, 0.5): alpha = 1.5 t up to dt", True, solver_alpha_bounds),
    Entry("hjsolver.occupation_mass", "hjsolver", "occupation mass near (0,0) vs transient prediction", True, solver_occupation_mass),
    Entry("ergodic.quadratic", "ergodic", "mech(x^2): c = 0", True, ergodic_quadratic),
    Entry("ergodic.linear", "ergodic", "mech(-x): c = 1", True, ergodic_linear),
    Entry("ergodic.level", "ergodic", "mech(x^2), a 0.5: c = 0.5", True, ergodic_level),
    Entry("ergodic.scaled_quadratic", "ergodic", "mech(x^2), r 0.1: c = 0", True, ergodic_scaled_quadratic),
    Entry("ergodic.scaled_linear", "ergodic", "mech(-x), r 0.1: c = 1.1", True, ergodic_scaled_linear),
    Entry("ergodic.h0", "ergodic", "mech(x^2): h0(0.5) = 0.5", True, ergodic_h0),
    Entry("mather.five_nodes", "mather", "5-node LP: Dirac at (0,0), value 0, brute force", True, mather_five_nodes),
    Entry("mather.boundary", "mather", "mech(-x): Dirac at (1,0), value -1", True, mather_boundary),
    Entry("mather.quadratic", "mather", "mech(x^2): near-Dirac at (0,0), value 0 +- 5h^2", True, mather_quadratic),
    Entry("mather.eikonal", "mather", "eik(x^2): Dirac at (0,0), value 0", True, mather_eikonal),
    Entry("mather.integrals_boundary", "mather", "delta(1,0), mech(-x): I_u = I_x = -1", True, mather_integrals_boundary),
    Entry("mather.integrals_nonlin", "mather", "delta(0,0), nonlin_u(1, 0.5): I_u = -1.5", True, mather_integrals_nonlin),
    Entry("mather.unique", "mather", "mech(x^2): one vertex", True, mather_unique),
    Entry("mather.two_wells_integrals", "mather", "two equal wells: two vertices with I_x = 0", True, mather_two_wells_integrals),
    Entry("selection.quadratic", "selection", "mech(x^2), zeta 0: x^2/sqrt2 within 5h", True, selection_quadratic),
    Entry("selection.zeta_two", "selection", "zeta 2: 2 + x^2/sqrt2 within 5h", True, selection_zeta_two),
    Entry("selection.zero_potential", "selection", "mech(0): w = 0", True, selection_zero_potential),
    Entry("selection.raised_violates", "selection", "selected + 0.1 violates a measure row", True, selection_raised_violates),
    Entry("selection.lowered_member", "selection", "selected - 1 is a member", True, selection_lowered_member),
    Entry("selection.dominance", "selection", "10 random members are dominated", True, selection_dominance),
    Entry("sweep.eta_zero", "sweep", "mech(x^2), eta 0, C = c(H): zeta 0 and u0 = sup E", False, sweep_eta_zero),
    Entry("sweep.boundary_sigma", "sweep", "mech(-x), eta 1, C = c(lambda): sigma 1, zeta = eta sigma", False, sweep_boundary_sigma),
    Entry("sweep.affine_zeta", "sweep", "mech(x^2), eta 2, zeta 1: u0(0) = 1", False, sweep_affine_zeta),
    Entry("sweep.checklist_affine", "sweep", "mech(x^2), affine zeta: T1-T3, T5 pass", False, sweep_checklist_affine),
    Entry("sweep.fixed_c", "sweep", "mech(x^2), C = 0.5: lambda u -> 0.5", False, sweep_fixed_c),
    Entry("sweep.two_sided_sigma", "sweep", "mech(-x), eta +-1: T6 on both sides", False, sweep_two_sided_sigma),
]


def run_corpus(quick=False, ids=None):
    """Run manifest entries; returns one result dict per entry, in manifest order."""
    out = []
    for e in MANIFEST:
        if quick and not e.quick:
            continue
        if ids is not None and e.id not in ids:
            continue
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                passed, detail = e.run()
        except Exception as exc:  # an entry that raises is a failed entry
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        out.append({"id": e.id, "module": e.module, "description": e.description,
                    "pass": bool(passed), "detail": detail})
    return out
