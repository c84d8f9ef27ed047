"""Selected limit solutions as linear programs over discrete subsolutions.

The feasible set is cut out by two families of rows on node values w:

* subsolution rows, one per (node, admissible control), transposing the
  semi-Lagrangian update:  w_i - Interp(w, x_i - dt v) <= dt (L(x_i, v, a) + c);
* measure rows, one per Mather vertex m:
  sum_i w_i omega_i^m + eta I_x^m + zeta >= 0,  omega_i^m = sum_j mu_ij du_L.

The selected field maximizes sum_i w_i; a per-node audit certifies that it is
the pointwise supremum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DominanceViolated, SelectionInfeasible
from .ergodic import frozen_cost, lp_critical_value
from .hjsolver import GridField, build_stencil, control_lattice, default_control_bound
from .linprog import LPProblem, solve_lp
from .mather import default_velocity_grid, mather_extremes, node_weights

AUDIT_NODES = 5
ROWGEN_ROUNDS = 60
ROWGEN_PER_NODE = 2


@dataclass(eq=False)
class SelectionProblem:
    grid: object
    H: object
    a: float
    c: float
    eta: float
    zeta: float
    vertices: list          # MatherVertex items at level a
    M: float | None = None  # control bound of the subsolution rows (solver default if None)
    K: int | None = None
    omegas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.vertices:
            raise ConfigError("selection needs at least one Mather vertex")
        bad = [k for k, m in enumerate(self.vertices) if not m.I_u < 0]
        if bad:
            raise ConfigError(f"Mather vertices {bad} have I_u >= 0")
        self.omegas = np.stack([node_weights(m.measure, self.H, self.a) for m in self.vertices])

    @property
    def measure_rhs(self):
        """Lower bounds: sum_i w_i omega_i^m >= -(eta I_x^m + zeta)."""
        return np.array([-(self.eta * m.I_x + self.zeta) for m in self.vertices])

    def stencil(self):
        M = default_control_bound(self.H) if self.M is None else float(self.M)
        return build_stencil(self.grid, control_lattice(self.grid.dimension, M, self.K))


def selection_problem(grid, H, eta=0.0, zeta=0.0, a=0.0, c=None, *, M=None, K=None,
                      n_directions=8, seed=0):
    """Assemble a SelectionProblem, computing c and the Mather vertices at level a."""
    if c is None:
        c = lp_critical_value(grid, H, a)
    vg = default_velocity_grid(grid, H, K)
    vertices = mather_extremes(grid, vg, H, a, 0.0, n_directions, seed)
    return SelectionProblem(grid, H, float(a), float(c), float(eta), float(zeta), vertices, M, K)


# ------------------------------------------------------------ row assembly
@dataclass
class _Rows:
    """Subsolution rows G w <= rhs as triplets, one row per (node, control)."""

    node: np.ndarray   # (R,)
    ctrl: np.ndarray   # (R,)
    coef_self: np.ndarray  # (R,) 1 - wself
    nb: np.ndarray     # (R, S)
    wt: np.ndarray     # (R, S)
    rhs: np.ndarray    # (R,)

    def matrix(self, sel, N):
        R = len(sel)
        S = self.nb.shape[1]
        rows = np.concatenate([np.arange(R), np.repeat(np.arange(R), S)])
        cols = np.concatenate([self.node[sel], self.nb[sel].ravel()])
        vals = np.concatenate([self.coef_self[sel], -self.wt[sel].ravel()])
        G = sp.csr_matrix((vals, (rows, cols)), shape=(R, N))
        G.sum_duplicates()
        return G

    def evaluate(self, w, sel=None):
        """Slack rhs - G w for the selected rows (all rows if sel is None)."""
        sel = slice(None) if sel is None else sel
        lhs = self.coef_self[sel] * w[self.node[sel]] - np.sum(self.wt[sel] * w[self.nb[sel]], axis=1)
        return self.rhs[sel] - lhs


def subsolution_rows(problem):
    """All subsolution rows with nontrivial coefficients; raises when a resting row is violated."""
    st = problem.stencil()
    grid = problem.grid
    Ltab = frozen_cost(grid, problem.H, st.controls, problem.a, 0.0)
    ok = st.feasible & np.isfinite(Ltab)
    rhs_all = st.dt * (Ltab + problem.c)
    coef = 1.0 - st.wself
    trivial = ok & (coef <= 1e-14)
    ti, tj = np.nonzero(trivial & (rhs_all < -1e-12))
    if len(ti):
        k = int(np.argmin(rhs_all[ti, tj]))
        raise SelectionInfeasible(
            f"resting row violated at node {grid.points[ti[k]].tolist()}: "
            f"L(x, v, a) + c = {rhs_all[ti[k], tj[k]] / st.dt:.3g} < 0")
    ii, jj = np.nonzero(ok & ~trivial)
    return _Rows(ii, jj, coef[ii, jj], st.nb[ii, jj], st.wt[ii, jj], rhs_all[ii, jj]), st


def _pruned_1d(rows):
    """Exact pruning in 1D: rows normalized by the self coefficient depend only on the
    neighbor node, so only the smallest bound per (node, neighbor) can bind."""
    nbr = np.where(rows.wt[:, 0] != 0.0, rows.nb[:, 0], rows.nb[:, 1])
    bound = rows.rhs / rows.coef_self
    order = np.lexsort((bound, nbr, rows.node))
    key = np.stack([rows.node[order], nbr[order]], axis=1)
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(key[1:] != key[:-1], axis=1)
    return order[first]


def _initial_rows_2d(rows):
    """Rows whose foot lands on a single neighbor node, one per (node, neighbor)."""
    single = np.count_nonzero(rows.wt > 1e-12, axis=1) == 1
    cand = np.flatnonzero(single)
    if len(cand) == 0:
        return np.zeros(0, dtype=np.int64)
    nbr = rows.nb[cand, np.argmax(rows.wt[cand], axis=1)]
    bound = rows.rhs[cand] / rows.coef_self[cand]
    order = np.lexsort((bound, nbr, rows.node[cand]))
    key = np.stack([rows.node[cand][order], nbr[order]], axis=1)
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(key[1:] != key[:-1], axis=1)
    return cand[order[first]]


# ------------------------------------------------------------ LP
def _build_lp(problem, rows, sel, objective):
    """Dual of  max objective . w  s.t.  G w <= rhs:  min rhs . mu  s.t.  G^T mu = objective, mu >= 0.

    One equality row per node keeps the basis at the node count; the node
    values are the multipliers of those rows.
    """
    N = problem.grid.n
    G = rows.matrix(sel, N)
    Wm = -sp.csr_matrix(problem.omegas)  # -sum omega w <= eta I_x + zeta
    At = sp.vstack([G, Wm]).T.tocsr()
    rhs = np.concatenate([rows.rhs[sel], -problem.measure_rhs])
    used = np.diff(At.indptr) > 0
    if np.any(objective[~used] != 0):
        raise SelectionInfeasible("selection LP unbounded; a node value is unconstrained")
    A = At[np.flatnonzero(used)].tocsc()
    if A.shape[0] * A.shape[1] <= 2_000_000:
        A = A.toarray()
    return LPProblem(rhs, A, objective[used], strict=False), used


def _solve(problem, rows, sel, objective, hint=None):
    lp, used = _build_lp(problem, rows, sel, objective)
    sol = solve_lp(lp, basis_hint=hint)
    if sol.status == "unbounded":
        raise SelectionInfeasible(
            "selection LP infeasible; the measure rows admit no subsolution "
            f"(rhs {problem.measure_rhs.tolist()})")
    if sol.status == "infeasible":
        raise SelectionInfeasible("selection LP unbounded; a Mather vertex has no node weight")
    w = np.zeros(problem.grid.n)
    w[used] = sol.y
    return w, sol


def _row_set(problem, rows, objective):
    """Solve with all binding rows present; row generation in 2D."""
    N = problem.grid.n
    if problem.grid.dimension == 1:
        sel = _pruned_1d(rows)
        w, sol = _solve(problem, rows, sel, objective)
        return w, sol, sel, 0
    sel = _initial_rows_2d(rows)
    tol = 1e-9 * (1 + np.abs(rows.rhs).max())
    for rnd in range(ROWGEN_ROUNDS):
        w, sol = _solve(problem, rows, sel, objective)
        slack = rows.evaluate(w)
        viol = np.flatnonzero(slack < -tol)
        if len(viol) == 0:
            return w, sol, sel, rnd + 1
        # most violated rows per node
        order = viol[np.lexsort((slack[viol], rows.node[viol]))]
        node = rows.node[order]
        rank = np.arange(len(order)) - np.searchsorted(node, node)
        add = order[rank < ROWGEN_PER_NODE]
        sel = np.union1d(sel, add)
    raise SelectionInfeasible(f"row generation did not close after {ROWGEN_ROUNDS} rounds")


def sup_selected(problem, audit_nodes=AUDIT_NODES, seed=0):
    """Maximal member of the feasible set, as a GridField (kind 'selected').

    ``info`` holds the binding measure rows, the audit results and whether the
    per-node fallback was used.
    """
    rows, st = subsolution_rows(problem)
    N = problem.grid.n
    w, sol, sel, rounds = _row_set(problem, rows, np.ones(N))
    h = problem.grid.spacing
    rng = np.random.default_rng(seed)
    audit = []
    fallback = False
    for j in rng.choice(N, size=min(audit_nodes, N), replace=False):
        e = np.zeros(N)
        e[j] = 1.0
        wj, _ = _solve(problem, rows, sel, e, hint=sol.basis)
        audit.append({"node": int(j), "x": problem.grid.points[j].tolist(),
                      "uniform": float(w[j]), "pointwise": float(wj[j]),
                      "gap": float(wj[j] - w[j])})
    if any(a["gap"] > 5 * h for a in audit):
        fallback = True
        w = pointwise_sup(problem, rows, sel, hint=sol.basis)
    meas = problem.omegas @ w - problem.measure_rhs
    info = {"measure_slack": meas.tolist(),
            "binding_vertices": [int(k) for k in np.flatnonzero(np.abs(meas) <= 1e-7 * (1 + np.abs(w).max()))],
            "audit": audit, "fallback": fallback, "n_rows": int(len(sel)),
            "rowgen_rounds": int(rounds), "lp_iterations": int(sol.iterations)}
    return GridField(problem.grid, w, 0.0, problem.c, 0.0, st.dt, st.controls.M, st.controls.K,
                     len(st.controls), float("nan"), 0, None, None, "selected", info)


def pointwise_sup(problem, rows=None, sel=None, hint=None):
    """max w(x_j) over the feasible set, separately for every node j."""
    if rows is None:
        rows, _ = subsolution_rows(problem)
    N = problem.grid.n
    if sel is None:
        _, sol, sel, _ = _row_set(problem, rows, np.ones(N))
        hint = sol.basis
    out = np.empty(N)
    for j in range(N):
        e = np.zeros(N)
        e[j] = 1.0
        wj, _ = _solve(problem, rows, sel, e, hint=hint)
        out[j] = wj[j]
    return out


def random_members(problem, n, seed=0):
    """Feasible fields maximizing random nonnegative node weightings."""
    rows, _ = subsolution_rows(problem)
    N = problem.grid.n
    rng = np.random.default_rng(seed)
    _, sol, sel, _ = _row_set(problem, rows, np.ones(N))
    out = []
    for _ in range(n):
        wts = rng.random(N)
        w, _ = _solve(problem, rows, sel, wts, hint=sol.basis)
        out.append(GridField(problem.grid, w, kind="member"))
    return out


# ------------------------------------------------------------ checks
@dataclass
class MembershipReport:
    member: bool
    worst_subsolution_slack: float
    worst_subsolution_row: dict | None
    worst_measure_slack: float
    worst_measure_vertex: int
    subsolution_tol: float
    measure_tol: float

    def to_dict(self):
        return dict(self.__dict__)


def membership_check(w, problem):
    """Evaluate every subsolution row and measure row at w (a GridField or array)."""
    values = np.asarray(getattr(w, "values", w), dtype=float)
    rows, st = subsolution_rows(problem)
    slack = rows.evaluate(values)
    k = int(np.argmin(slack))
    sub_tol = 5 * problem.grid.spacing * st.dt
    meas = problem.omegas @ values - problem.measure_rhs
    m = int(np.argmin(meas))
    meas_tol = 1e-6 * (1 + np.abs(values).max())
    worst_row = {"node": int(rows.node[k]), "x": problem.grid.points[rows.node[k]].tolist(),
                 "v": st.controls.points[rows.ctrl[k]].tolist()}
    member = bool(slack[k] >= -sub_tol and meas[m] >= -meas_tol)
    return MembershipReport(member, float(slack[k]), worst_row, float(meas[m]), m, sub_tol, meas_tol)


@dataclass
class DominanceReport:
    n_samples: int
    worst_excess: float
    tol: float

    def to_dict(self):
        return dict(self.__dict__)


def dominance_check(w_star, samples, problem):
    """Every sample must lie below w_star + 5h nodewise."""
    ws = np.asarray(getattr(w_star, "values", w_star), dtype=float)
    tol = 5 * problem.grid.spacing
    worst = -np.inf
    for k, s in enumerate(samples):
        sv = np.asarray(getattr(s, "values", s), dtype=float)
        excess = sv - ws
        i = int(np.argmax(excess))
        worst = max(worst, float(excess[i]))
        if excess[i] > tol:
            raise DominanceViolated(
                f"sample {k} exceeds the selected field by {excess[i]:.3g} at "
                f"{problem.grid.points[i].tolist()}")
    return DominanceReport(len(samples), float(worst), tol)
