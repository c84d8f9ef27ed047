"""Holonomic-measure linear programs, Mather measures and their integrals.

Holonomy is tested against the piecewise-linear hats of the grid.  The
directional derivative of a hat along (x_i, v_j) is taken upwind, through the
same foot point x_i - dt v_j that the semi-Lagrangian scheme uses:

    <D phi_k(x_i), v_j>  ~  (phi_k(x_i) - I[phi_k](x_i - dt v_j)) / dt.

Where that foot has no stencil the forward foot x_i + dt v_j is used instead.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InfeasibleDiscretization
from .geometry import INTERIOR, interpolation_stencil
from .hjsolver import ControlLattice, control_lattice, default_control_bound
from .linprog import LPProblem, sample_optimal_face, solve_lp
from .measures import DiscreteMeasure

_DENSE_LIMIT = 2_000_000  # matrix entries below which the LP is stored densely


@dataclass(eq=False)
class HolonomicLP:
    problem: LPProblem
    grid: object
    velocities: np.ndarray   # (J, dim)
    cols: np.ndarray         # (n_vars, 2) node index, velocity index
    hat_nodes: np.ndarray    # nodes whose hat contributes a row
    dt: float

    def measure(self, x):
        w = np.zeros((self.grid.n, len(self.velocities)))
        np.add.at(w, (self.cols[:, 0], self.cols[:, 1]), np.where(x > 1e-12, x, 0.0))
        return DiscreteMeasure(self.grid, self.velocities, w / w.sum())


def _velocity_points(velocity_grid):
    if isinstance(velocity_grid, ControlLattice):
        return velocity_grid.points
    v = np.asarray(velocity_grid, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def holonomy_matrix(grid, velocities, dt=None):
    """Sparse matrix D (n_nodes x n_pairs) with D[k, (i,j)] = dt * <D phi_k(x_i), v_j>.

    Returns (D, pairs, ok) where pairs lists (i, j) for every node-velocity
    pair and ok marks pairs with a usable stencil.
    """
    V = _velocity_points(velocities)
    N, J, d = grid.n, len(V), grid.dimension
    if dt is None:
        dt = grid.spacing / np.max(np.linalg.norm(V, axis=1))
    ii = np.repeat(np.arange(N), J)
    jj = np.tile(np.arange(J), N)
    x = grid.points[ii]
    back_idx, back_w, back_ok = interpolation_stencil(grid, x - dt * V[jj])
    fwd_idx, fwd_w, fwd_ok = interpolation_stencil(grid, x + dt * V[jj])
    if d == 2:
        back_ok &= grid.domain.in_closure(x - dt * V[jj])
        fwd_ok &= grid.domain.in_closure(x + dt * V[jj])
    use_back = back_ok
    use_fwd = ~back_ok & fwd_ok
    ok = use_back | use_fwd
    S = back_idx.shape[1]
    rows, cols, vals = [ii], [np.arange(N * J)], [np.where(use_back, 1.0, -1.0)]
    for s in range(S):
        wb = np.where(use_back, -back_w[:, s], 0.0)
        wf = np.where(use_fwd, fwd_w[:, s], 0.0)
        for idx, w in ((back_idx[:, s], wb), (fwd_idx[:, s], wf)):
            nz = w != 0.0
            rows.append(idx[nz])
            cols.append(np.flatnonzero(nz))
            vals.append(w[nz])
    D = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N * J))
    D.sum_duplicates()
    D.data[np.abs(D.data) < 1e-14] = 0.0
    D.eliminate_zeros()
    return D, np.stack([ii, jj], axis=1), ok, dt


# constraint data per grid, keyed by velocity lattice and finiteness pattern of L
_CONSTRAINTS = weakref.WeakKeyDictionary()
_CONSTRAINT_LOCK = threading.Lock()


def _constraints(grid, V, finite):
    key = (V.shape, V.tobytes(), finite.tobytes())
    with _CONSTRAINT_LOCK:
        hit = _CONSTRAINTS.get(grid, {}).get(key)
    if hit is not None:
        return hit
    D, pairs, ok, dt = holonomy_matrix(grid, V)
    keep = ok & finite
    D = D[:, np.flatnonzero(keep)]
    interior = np.flatnonzero(grid.node_mask == INTERIOR)
    Dk = D[interior]
    nonzero_rows = np.asarray(abs(Dk).sum(axis=1)).ravel() > 0
    hat_nodes = interior[nonzero_rows]
    A = sp.vstack([sp.csr_matrix(np.ones((1, D.shape[1]))), Dk[nonzero_rows] / dt]).tocsc()
    b = np.zeros(A.shape[0])
    b[0] = 1.0
    if A.shape[0] * A.shape[1] <= _DENSE_LIMIT:
        A = A.toarray()
    out = (A, b, keep, hat_nodes, dt)
    with _CONSTRAINT_LOCK:
        _CONSTRAINTS.setdefault(grid, {})[key] = out
    return out


def build_holonomic_lp(grid, velocity_grid, H, a=0.0, r=0.0):
    """LP over measures on (node, velocity) pairs: mass one, holonomy at interior hats,
    objective L((1+r) x_i, v_j, a)."""
    V = _velocity_points(velocity_grid)
    N, J = grid.n, len(V)
    ii = np.repeat(np.arange(N), J)
    jj = np.tile(np.arange(J), N)
    cost = H.L((1.0 + r) * grid.points[ii], V[jj], np.full(N * J, float(a)))
    A, b, keep, hat_nodes, dt = _constraints(grid, V, np.isfinite(cost))
    pairs = np.stack([ii, jj], axis=1)[keep]
    return HolonomicLP(LPProblem(cost[keep], A, b), grid, V, pairs, hat_nodes, dt)


# warm-start bases keyed by grid and velocity lattice
_BASES = weakref.WeakKeyDictionary()
_BASIS_LOCK = threading.Lock()


def _basis_key(V):
    # A and b do not depend on the level or the scaling, so any earlier
    # optimal basis is primal feasible and phase 1 can be skipped
    return (V.shape, float(np.abs(V).max()))


def clear_bases():
    with _BASIS_LOCK:
        _BASES.clear()


def solve_holonomic(hlp, r=0.0):
    key = _basis_key(hlp.velocities)
    with _BASIS_LOCK:
        hint = _BASES.get(hlp.grid, {}).get(key)
    sol = solve_lp(hlp.problem, basis_hint=hint)
    if sol.status == "infeasible":
        raise InfeasibleDiscretization("holonomic LP is infeasible; the lattice must contain v = 0")
    if not sol.optimal:
        raise InfeasibleDiscretization(f"holonomic LP returned status {sol.status}")
    if np.all(sol.basis < hlp.problem.shape[1]):
        with _BASIS_LOCK:
            _BASES.setdefault(hlp.grid, {})[key] = sol.basis.copy()
    return sol


def default_velocity_grid(grid, H, K=None):
    return control_lattice(grid.dimension, default_control_bound(H), K)


def mather_measure(grid, velocity_grid, H, a=0.0, r=0.0):
    """Minimizing holonomic measure and the LP value (= minus the critical value)."""
    hlp = build_holonomic_lp(grid, velocity_grid, H, a, r)
    sol = solve_holonomic(hlp, r)
    return hlp.measure(sol.x), sol.objective


def mather_integrals(measure, H, a=0.0):
    """(I_u, I_x): integrals of du_L and <dx_L, x> at level a."""
    ii, jj = np.nonzero(measure.weights > 0)
    w = measure.weights[ii, jj]
    x = measure.grid.points[ii]
    v = measure.velocities[jj]
    I_u = float(np.sum(w * H.du_L(x, v, a)))
    I_x = float(np.sum(w * np.sum(H.dx_L(x, v, a) * x, axis=-1)))
    return I_u, I_x


def node_weights(measure, H, a=0.0):
    """omega_i = sum_j mu_ij du_L(x_i, v_j) at level a, per node."""
    out = np.zeros(measure.grid.n)
    ii, jj = np.nonzero(measure.weights > 0)
    du = H.du_L(measure.grid.points[ii], measure.velocities[jj], a)
    np.add.at(out, ii, measure.weights[ii, jj] * du)
    return out


@dataclass
class MatherVertex:
    measure: DiscreteMeasure
    I_u: float
    I_x: float
    value: float


def mather_extremes(grid, velocity_grid, H, a=0.0, r=0.0, n_directions=8, seed=0):
    """Vertices of the optimal face of the holonomic LP, with their integrals."""
    hlp = build_holonomic_lp(grid, velocity_grid, H, a, r)
    sol = solve_holonomic(hlp, r)
    out = []
    for s in sample_optimal_face(hlp.problem, n_directions, seed=seed, solution=sol):
        mu = hlp.measure(s.x)
        I_u, I_x = mather_integrals(mu, H, a)
        out.append(MatherVertex(mu, I_u, I_x, float(hlp.problem.c @ s.x)))
    return out


def holonomy_residual(measure, dt=None, hat_scale=1.0):
    """max over interior hats of |sum_ij mu_ij <D phi_k(x_i), v_j>| (unit-height hats)."""
    D, pairs, ok, dt = holonomy_matrix(measure.grid, measure.velocities, dt)
    w = measure.weights[pairs[:, 0], pairs[:, 1]]
    if np.any((w > 0) & ~ok):
        raise InfeasibleDiscretization("measure charges a pair without a holonomy stencil")
    res = (D @ np.where(ok, w, 0.0)) / dt
    interior = measure.grid.node_mask == INTERIOR
    return float(hat_scale * np.max(np.abs(res[interior])))


def objective(measure, H, a=0.0, r=0.0):
    """Integral of L((1+r) x, v, a) against the measure."""
    ii, jj = np.nonzero(measure.weights > 0)
    L = H.L((1.0 + r) * measure.grid.points[ii], measure.velocities[jj],
            np.full(len(ii), float(a)))
    return float(np.sum(measure.weights[ii, jj] * L))


def _flat_support(measure):
    ii, jj = np.nonzero(measure.weights > 0)
    pts = np.concatenate([measure.grid.points[ii], measure.velocities[jj]], axis=1)
    return pts, measure.weights[ii, jj]


def wasserstein1(mu, nu):
    """W1 distance on (x, v) space between two lattice measures, by transport LP."""
    return wasserstein1_to_hull(mu, [nu])


def wasserstein1_to_hull(mu, vertices):
    """W1 distance from ``mu`` to the convex hull of ``vertices``.

    Transport plan pi >= 0 with row sums mu and column sums sum_k t_k nu_k,
    t in the simplex.
    """
    p, a = _flat_support(mu)
    supports = [_flat_support(nu) for nu in vertices]
    q = np.unique(np.concatenate([s[0] for s in supports]), axis=0)
    nus = np.zeros((len(vertices), len(q)))
    for k, (pts, w) in enumerate(supports):
        for pt, wt in zip(pts, w):
            nus[k, np.flatnonzero(np.all(np.abs(q - pt) < 1e-12, axis=1))[0]] += wt
    P, Q, Kv = len(p), len(q), len(vertices)
    cost = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2).ravel()
    n = P * Q + Kv
    rows = []
    rhs = []
    for i in range(P):
        row = np.zeros(n)
        row[i * Q:(i + 1) * Q] = 1.0
        rows.append(row)
        rhs.append(a[i])
    for j in range(Q):
        row = np.zeros(n)
        row[j:P * Q:Q] = 1.0
        row[P * Q:] = -nus[:, j]
        rows.append(row)
        rhs.append(0.0)
    row = np.zeros(n)
    row[P * Q:] = 1.0
    rows.append(row)
    rhs.append(1.0)
    A = np.array(rows)
    sol = solve_lp(LPProblem(np.concatenate([cost, np.zeros(Kv)]), A, np.array(rhs), strict=False))
    return float(sol.objective)
