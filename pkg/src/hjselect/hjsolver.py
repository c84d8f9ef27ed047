"""Semi-Lagrangian solver for the rectified state-constraint problem

    H((1+r) x, Du, lambda (1+r) u) = C   on the fixed base grid,

together with policy backtracing and discounted occupation measures.
"""

from __future__ import annotations

import math
import threading
import warnings
import weakref
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, EmptyTrajectory, NoFeasibleControl, NonConvergence
from .geometry import interpolation_stencil, interpolate
from .measures import DiscreteMeasure

TOL_FP = 1e-9
TOL_RES = 1e-7
MAX_SWEEPS = 10000


class ControlSaturation(UserWarning):
    """An optimal control sits on the edge of the control lattice."""


@dataclass(frozen=True, eq=False)
class ControlLattice:
    M: float
    K: int
    points: np.ndarray  # (J, dim)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def index_of_zero(self):
        return int(np.argmin(np.linalg.norm(self.points, axis=1)))

    def saturated(self):
        """Mask of controls on the outer shell of the lattice."""
        return np.linalg.norm(self.points, axis=1) > self.M * (1 - 0.5 / self.K)


def control_lattice(dim, M, K=None):
    """Centered lattice of (2K+1)^dim controls restricted to |v| <= M."""
    if M <= 0:
        raise ConfigError("control bound M must be positive")
    K = (20 if dim == 1 else 8) if K is None else int(K)
    ks = np.arange(-K, K + 1)
    if dim == 1:
        ints = ks[:, None]
    else:
        ints = np.stack([a.ravel() for a in np.meshgrid(ks, ks, indexing="ij")], axis=-1)
        ints = ints[np.linalg.norm(ints, axis=1) <= K + 1e-12]
    return ControlLattice(float(M), K, ints * (float(M) / K))


@dataclass(eq=False)
class Stencil:
    """Foot-point interpolation data of every (node, control) pair."""

    grid: object
    controls: ControlLattice
    dt: float
    nb: np.ndarray      # (N, J, S) neighbor indices (self index where unused)
    wt: np.ndarray      # (N, J, S)
    wself: np.ndarray   # (N, J)
    feasible: np.ndarray  # (N, J)
    orders: np.ndarray  # Gauss-Seidel node orderings


_STENCILS = weakref.WeakKeyDictionary()
_STENCIL_LOCK = threading.Lock()


def _orders(grid):
    N = grid.n
    if grid.dimension == 1:
        fwd = np.arange(N)
        return np.stack([fwd, fwd[::-1]])
    multi = np.stack(np.unravel_index(grid.active, grid.shape), axis=-1)
    out = []
    for s0, s1 in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
        out.append(np.lexsort((s1 * multi[:, 1], s0 * multi[:, 0])))
    return np.stack(out)


def build_stencil(grid, controls):
    with _STENCIL_LOCK:
        per_grid = _STENCILS.setdefault(grid, {})
        key = (controls.M, controls.K, len(controls))
        if key in per_grid:
            return per_grid[key]
    N, J, d = grid.n, len(controls), grid.dimension
    dt = grid.spacing / controls.M
    feet = (grid.points[:, None, :] - dt * controls.points[None, :, :]).reshape(-1, d)
    idx, w, ok = interpolation_stencil(grid, feet)
    if d == 2:
        ok &= grid.domain.in_closure(feet)
    self_idx = np.repeat(np.arange(N), J)
    is_self = idx == self_idx[:, None]
    wself = np.where(is_self, w, 0.0).sum(axis=1)
    w = np.where(is_self, 0.0, w)
    nb = np.where((idx < 0) | (w == 0.0), self_idx[:, None], idx)
    S = idx.shape[1]
    st = Stencil(grid, controls, dt, nb.reshape(N, J, S), w.reshape(N, J, S),
                 wself.reshape(N, J), ok.reshape(N, J), _orders(grid))
    with _STENCIL_LOCK:
        _STENCILS.setdefault(grid, {})[key] = st
    return st


@dataclass(eq=False)
class GridField:
    """Node values of a discrete solution plus scheme metadata."""

    grid: object
    values: np.ndarray
    lam: float = 0.0
    C: float = 0.0
    r: float = 0.0
    dt: float = math.nan
    M: float = math.nan
    K: int = 0
    n_controls: int = 0
    residual: float = math.nan
    sweeps: int = 0
    policy: np.ndarray | None = None
    history: np.ndarray | None = field(default=None, repr=False)
    kind: str = "solution"
    info: dict = field(default_factory=dict)

    def value_at(self, x):
        return interpolate(self.grid, self.values, np.asarray(x, float).reshape(-1, self.grid.dimension))

    def metadata(self):
        return {"kind": self.kind, "lambda": self.lam, "C": self.C, "r": self.r, "dt": self.dt,
                "M": self.M, "K": self.K, "n_controls": self.n_controls,
                "residual": self.residual, "sweeps": self.sweeps,
                "h": self.grid.spacing, "n_nodes": self.grid.n}


def running_cost(H, grid, controls, r):
    """Separable data (L0 table, kappa, eps) at the scaled nodes, or None for custom H."""
    sep = H.separable()
    if sep is None:
        return None
    L0fn, kappa, eps = sep
    x = (1.0 + r) * grid.points
    table = L0fn(x[:, None, :], controls.points[None, :, :])
    return np.asarray(table, dtype=float), kappa, eps


def default_control_bound(H):
    M = H.v_bound
    if M is None:
        raise ConfigError("Hamiltonian has no v_bound; set it or build from a config")
    return min(M, H.velocity_cap)


def _bracket(lam_eff, u_cap):
    if lam_eff > 0:
        return -u_cap / lam_eff, u_cap / lam_eff
    return -u_cap, u_cap


def solve_tabulated(stencil, L0, kappa, eps, lam, C, r=0.0, u_cap=100.0, u_init=None,
                    tol_fp=TOL_FP, tol_res=TOL_RES, max_sweeps=MAX_SWEEPS):
    """Fixed point for the running cost L0 - kappa s - eps sin(s), s = lambda (1+r) u."""
    grid = stencil.grid
    lp = lam * (1.0 + r)
    lo, hi = _bracket(lp, u_cap)
    table = np.where(stencil.feasible, L0, np.inf)
    table = np.ascontiguousarray(table, dtype=float)
    if u_init is not None:
        u = np.array(u_init, dtype=float)
    elif lp > 0:
        # resting forever is admissible, so its cost is a supersolution start
        rest = table[:, stencil.controls.index_of_zero()]
        u = np.clip(np.where(np.isfinite(rest), (rest + C) / (kappa * lp), hi), lo, hi)
    else:
        u = np.zeros(grid.n)
    history = np.zeros(max_sweeps)
    args = (stencil.nb, stencil.wt, stencil.wself, table, stencil.dt, float(C),
            float(kappa * lp), float(eps), float(lp), float(lo), float(hi))
    sweeps = _kernels.solve_loop(stencil.orders, u, *args, int(max_sweeps), float(tol_fp), history)
    if sweeps < 0:
        i = -sweeps - 1
        raise NoFeasibleControl(f"no admissible control at node {grid.points[i].tolist()}")
    out = np.empty_like(u)
    policy = np.empty(grid.n, dtype=np.int64)
    _kernels.jacobi(u, *args, out, policy)
    res = float(np.max(np.abs(out - u))) / stencil.dt
    if sweeps >= max_sweeps and res > tol_res:
        raise NonConvergence(f"no convergence after {max_sweeps} sweeps (residual {res:.3g})")
    return GridField(grid, u, lam, C, r, stencil.dt, stencil.controls.M, stencil.controls.K,
                     len(stencil.controls), res, int(sweeps), policy, history[:sweeps])


def _generic_solve(stencil, H, lam, C, r, u_cap, tol_fp, max_sweeps, u_init=None):
    """Per-node bisection for Hamiltonians without separable structure (slow)."""
    grid = stencil.grid
    lp = lam * (1.0 + r)
    lo, hi = _bracket(lp, u_cap)
    x = (1.0 + r) * grid.points
    V = stencil.controls.points
    u = np.zeros(grid.n) if u_init is None else np.array(u_init, dtype=float)

    def node(i, u):
        feas = stencil.feasible[i]
        if not feas.any():
            raise NoFeasibleControl(f"no admissible control at node {grid.points[i].tolist()}")
        R = np.einsum("js,js->j", stencil.wt[i], u[stencil.nb[i]])[feas]
        ws = stencil.wself[i][feas]
        xv = np.broadcast_to(x[i], (feas.sum(), grid.dimension))

        def F(val):
            L = H.L(xv, V[feas], np.full(len(ws), lp * val))
            return np.max((1 - ws) * val - R - stencil.dt * (L + C))
        a, b = lo, hi
        for _ in range(_kernels.BISECT_STEPS):
            mid = 0.5 * (a + b)
            if F(mid) > 0:
                b = mid
            else:
                a = mid
        root = 0.5 * (a + b)
        L = H.L(xv, V[feas], np.full(len(ws), lp * root))
        j = int(np.flatnonzero(feas)[np.argmin(R + ws * root + stencil.dt * (L + C))])
        return root, j

    history = []
    for sweep in range(max_sweeps):
        delta = 0.0
        for i in stencil.orders[sweep % len(stencil.orders)]:
            val, _ = node(i, u)
            delta = max(delta, abs(val - u[i]))
            u[i] = val
        history.append(delta)
        if delta < tol_fp:
            break
    new = np.empty_like(u)
    policy = np.empty(grid.n, dtype=np.int64)
    for i in range(grid.n):
        new[i], policy[i] = node(i, u)
    res = float(np.max(np.abs(new - u))) / stencil.dt
    if len(history) >= max_sweeps and history[-1] >= tol_fp:
        raise NonConvergence(f"no convergence after {max_sweeps} sweeps (residual {res:.3g})")
    return GridField(grid, u, lam, C, r, stencil.dt, stencil.controls.M, stencil.controls.K,
                     len(stencil.controls), res, len(history), policy, np.array(history))


def solve(grid, H, lam, C, r=0.0, *, M=None, K=None, u_init=None, tol_fp=TOL_FP,
          tol_res=TOL_RES, max_sweeps=MAX_SWEEPS, max_doublings=2):
    """Solve H((1+r)x, Du, lambda (1+r) u) = C on ``grid`` with state constraints."""
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    if (1.0 + r) * grid.domain.max_radius > grid.domain.ambient_radius * (1 + 1e-12):
        raise ConfigError("(1+r) * domain leaves the ambient ball")
    M = default_control_bound(H) if M is None else float(M)
    for attempt in range(max_doublings + 1):
        controls = control_lattice(grid.dimension, M, K)
        stencil = build_stencil(grid, controls)
        sep = running_cost(H, grid, controls, r)
        if sep is None and lam > 0:
            fld = _generic_solve(stencil, H, lam, C, r, H.u_cap, tol_fp, max_sweeps, u_init)
        else:
            if sep is None:
                L0 = H.L((1.0 + r) * grid.points[:, None, :], controls.points[None, :, :],
                         np.zeros((grid.n, len(controls))))
                kappa, eps = H.kappa, 0.0
            else:
                L0, kappa, eps = sep
            fld = solve_tabulated(stencil, L0, kappa, eps, lam, C, r, H.u_cap, u_init,
                                  tol_fp, tol_res, max_sweeps)
        if not _saturated(fld, stencil, H, lam, C, r):
            return fld
        can_grow = M * 2 <= H.velocity_cap + 1e-12 and attempt < max_doublings
        warnings.warn(ControlSaturation(
            f"optimal control on the lattice edge |v| = {M:g}"
            + ("; rerunning with doubled bound" if can_grow else "")), stacklevel=2)
        if not can_grow:
            return fld
        M *= 2.0
    return fld


def _q_table(fld, stencil, H, lam, C, r):
    """Per-control update values at the converged field, shape (N, J)."""
    u = fld.values
    lp = lam * (1.0 + r)
    R = np.einsum("njs,njs->nj", stencil.wt, u[stencil.nb])
    slot = lp * u
    sep = running_cost(H, stencil.grid, stencil.controls, r)
    if sep is None:
        L = H.L((1.0 + r) * stencil.grid.points[:, None, :], stencil.controls.points[None],
                np.broadcast_to(slot[:, None], stencil.wself.shape))
    else:
        L0, kappa, eps = sep
        L = L0 - (kappa * slot + eps * np.sin(slot))[:, None]
    Q = R + stencil.wself * u[:, None] + stencil.dt * (L + C)
    return np.where(stencil.feasible, Q, np.inf)


def _saturated(fld, stencil, H, lam, C, r):
    sat = stencil.controls.saturated()
    if not sat.any() or stencil.controls.M >= H.velocity_cap - 1e-12:
        return False
    Q = _q_table(fld, stencil, H, lam, C, r)
    inner = np.where(sat[None, :], np.inf, Q).min(axis=1)
    outer = np.where(sat[None, :], Q, np.inf).min(axis=1)
    return bool(np.any(outer < inner - 1e-12))


def update_operator(values, grid, H, lam, C, r=0.0, M=None, K=None):
    """Explicit application of the scheme update T(u) at every node."""
    M = default_control_bound(H) if M is None else M
    stencil = build_stencil(grid, control_lattice(grid.dimension, M, K))
    fld = GridField(grid, np.asarray(values, dtype=float), lam, C, r)
    sep = running_cost(H, grid, stencil.controls, r)
    u = fld.values
    if sep is None and lam > 0:
        raise ConfigError("update_operator needs a separable Hamiltonian when lambda > 0")
    if sep is None:
        L0 = H.L((1.0 + r) * grid.points[:, None, :], stencil.controls.points[None, :, :],
                 np.zeros(stencil.wself.shape))
        kappa, eps = H.kappa, 0.0
    else:
        L0, kappa, eps = sep
    lp = lam * (1.0 + r)
    lo, hi = _bracket(lp, H.u_cap)
    table = np.ascontiguousarray(np.where(stencil.feasible, L0, np.inf))
    out = np.empty_like(u)
    policy = np.empty(grid.n, dtype=np.int64)
    _kernels.jacobi(u.copy(), stencil.nb, stencil.wt, stencil.wself, table, stencil.dt,
                    float(C), float(kappa * lp), float(eps), float(lp), float(lo), float(hi),
                    out, policy)
    return out


def residual(fld, H, lam, C, r=0.0):
    """sup_i |u_i - T(u)_i| / dt for the scheme that produced ``fld``."""
    M = fld.M if np.isfinite(fld.M) else default_control_bound(H)
    K = fld.K if fld.K else None
    controls = control_lattice(fld.grid.dimension, M, K)
    stencil = build_stencil(fld.grid, controls)
    if H.separable() is None and lam > 0:
        Q = _q_table(fld, stencil, H, lam, C, r)
        # implicit solve is not needed for the residual of a fixed point check
        return float(np.max(np.abs(Q.min(axis=1) - fld.values))) / stencil.dt
    Tu = update_operator(fld.values, fld.grid, H, lam, C, r, M, K)
    return float(np.max(np.abs(Tu - fld.values))) / stencil.dt


def invariant_report(fld, H):
    """Discrete Lipschitz and sup-norm invariants of a separable solution.

    Lipschitz: difference quotients along lattice edges stay below p_bound + h.
    Bounds: |u| <= u_cap, and with g(s) = kappa s + eps sin(s) and s = lambda (1+r) u, every node has
    min L0 + C <= g(s_i) <= L0(x_i, 0) + C (resting forever is admissible).
    """
    grid, u = fld.grid, fld.values
    nb = grid.neighbor_index
    has = nb >= 0
    rows = np.nonzero(has)[0]
    lip = float(np.max(np.abs(u[nb[has]] - u[rows]), initial=0.0)) / grid.spacing
    out = {"lipschitz": lip, "p_bound": H.p_bound,
           "lipschitz_ok": H.p_bound is None or lip <= (H.p_bound + grid.spacing) * (1 + 1e-9)}
    capped = bool(np.all(np.abs(u) <= H.u_cap))
    sep = running_cost(H, grid, control_lattice(grid.dimension, fld.M, fld.K or None), fld.r)
    lp = fld.lam * (1.0 + fld.r)
    if sep is None or lp <= 0:
        out["bounds_ok"] = capped
        return out
    L0, kappa, eps = sep
    stencil = build_stencil(grid, control_lattice(grid.dimension, fld.M, fld.K or None))
    L0 = np.where(stencil.feasible, L0, np.inf)
    s = lp * u
    g = kappa * s + eps * np.sin(s)
    tol = 1e-7 * (1 + np.abs(g).max())
    lower = float(np.min(L0)) + fld.C
    upper = L0[:, stencil.controls.index_of_zero()] + fld.C
    out["bounds_ok"] = capped and bool(np.all(g >= lower - tol) and np.all(g <= upper + tol))
    return out


@dataclass
class Trajectory:
    dt: float
    points: np.ndarray      # (N+1, dim) continuous positions gamma(0), gamma(-dt), ...
    nodes: np.ndarray       # (N+1,) nearest active node of each position
    control_index: np.ndarray  # (N,)
    controls: np.ndarray    # (N, dim)
    alpha: np.ndarray       # (N+1,) alpha at each position, alpha[0] = 0
    weights: np.ndarray     # (N+1,) exp(-lambda alpha)
    lam: float

    @property
    def times(self):
        return -self.dt * np.arange(len(self.points))


def backtrace(fld, H, lam, C, r, x0, T):
    """Follow the argmin control of the converged update backward from x0 for time T."""
    grid = fld.grid
    d = grid.dimension
    M = fld.M if np.isfinite(fld.M) else default_control_bound(H)
    controls = control_lattice(d, M, fld.K or None)
    dt = grid.spacing / controls.M
    V = controls.points
    lp = lam * (1.0 + r)
    n_steps = int(math.ceil(T / dt - 1e-9))
    y = np.asarray(x0, dtype=float).reshape(d)
    if not grid.domain.in_closure(y[None])[0]:
        raise ConfigError("backtrace start point lies outside the closed domain")
    pts = np.empty((n_steps + 1, d))
    ctrl = np.empty(n_steps, dtype=np.int64)
    pts[0] = y
    k = 0
    while k < n_steps:
        uy = interpolate(grid, fld.values, y[None])[0]
        feet = y[None, :] - dt * V
        vals = interpolate(grid, fld.values, feet)
        ok = np.isfinite(vals)
        if d == 2:
            ok &= grid.domain.in_closure(feet)
        xs = np.broadcast_to((1.0 + r) * y, V.shape)
        L = H.L(xs, V, np.full(len(V), lp * uy))
        q = np.where(ok & np.isfinite(L), vals + dt * (L + C), np.inf)
        j = int(np.argmin(q))
        if not np.isfinite(q[j]):
            raise NoFeasibleControl(f"no admissible control at {y.tolist()}")
        ctrl[k] = j
        y = feet[j]
        pts[k + 1] = y
        k += 1
        if np.all(V[j] == 0.0):
            # a resting step repeats forever
            pts[k:] = y
            ctrl[k - 1:] = j
            break
    nodes = grid.nearest_node(pts)
    dul = H.du_L((1.0 + r) * pts[:-1], V[ctrl])
    alpha = np.concatenate([[0.0], np.cumsum(-dt * dul)])
    return Trajectory(dt, pts, nodes, ctrl, V[ctrl], alpha, np.exp(-lam * alpha), lam)


def occupation_measure(traj, grid, velocity_grid):
    """Discounted occupation measure of a trajectory on the (node, velocity) lattice."""
    n = len(traj.control_index)
    if n == 0:
        raise EmptyTrajectory("trajectory has no steps")
    w = traj.weights[:-1] * traj.dt
    if not w.sum() > 0:
        raise EmptyTrajectory("trajectory weights vanish")
    V = velocity_grid.points if isinstance(velocity_grid, ControlLattice) else np.asarray(velocity_grid)
    dist = np.linalg.norm(traj.controls[:, None, :] - V[None, :, :], axis=2)
    vj = np.argmin(dist, axis=1)
    weights = np.zeros((grid.n, len(V)))
    np.add.at(weights, (traj.nodes[:-1], vj), w)
    weights /= weights.sum()
    return DiscreteMeasure(grid, np.asarray(V, float), weights)
