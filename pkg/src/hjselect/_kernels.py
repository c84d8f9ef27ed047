"""Gauss-Seidel kernels for the semi-Lagrangian fixed point.

Per node i and control j the scheme data are: stencil neighbors ``nb[i, j, :]``
with weights ``wt[i, j, :]``, the node's own interpolation weight
``wself[i, j]`` and the running cost ``L0[i, j]`` (``inf`` marks an infeasible
control).  With ``lp = lambda (1 + r)`` the node value u solves

    u = min_j [ R_j + wself_j u + dt (L0_j + C - kappa lp u - eps sin(lp u)) ],

R_j being the neighbor part of the interpolant.  For eps = 0 the root is
explicit; otherwise it is bracketed and bisected.

Two interchangeable implementations live here: numba kernels (default) and
numpy fallbacks vectorized over controls, chosen by ``HJSELECT_DISABLE_NUMBA``.
"""

import math

import numpy as np

from ._accel import jit, numba_enabled

BISECT_STEPS = 50


def _node_solve_py(i, u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi):
    J = L0.shape[1]
    S = nb.shape[2]
    best = math.inf
    best_j = -1
    if eps == 0.0:
        blocked = False
        first = -1
        for j in range(J):
            c0 = L0[i, j]
            if c0 == math.inf:
                continue
            if first < 0:
                first = j
            R = 0.0
            for s in range(S):
                w = wt[i, j, s]
                if w != 0.0:
                    R += w * u[nb[i, j, s]]
            a = (1.0 - wself[i, j]) + dt * kl
            b = R + dt * (c0 + C)
            if a <= 1e-14:
                if b < 0.0:
                    blocked = True
                continue
            val = b / a
            if val < best:
                best = val
                best_j = j
        if blocked:
            return lo, first
        if best_j < 0:
            return math.nan, -1
        if best > hi:
            best = hi
        if best < lo:
            best = lo
        return best, best_j
    # nonlinear coupling: F(v) = max_j [a_j v + dt eps sin(lp v) - b_j] is increasing
    a_lo = lo
    a_hi = hi
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (a_lo + a_hi)
        F = -math.inf
        for j in range(J):
            c0 = L0[i, j]
            if c0 == math.inf:
                continue
            R = 0.0
            for s in range(S):
                w = wt[i, j, s]
                if w != 0.0:
                    R += w * u[nb[i, j, s]]
            a = (1.0 - wself[i, j]) + dt * kl
            term = a * mid + dt * eps * math.sin(lp * mid) - R - dt * (c0 + C)
            if term > F:
                F = term
        if F == -math.inf:
            return math.nan, -1
        if F > 0.0:
            a_hi = mid
        else:
            a_lo = mid
    root = 0.5 * (a_lo + a_hi)
    best_j = -1
    best = -math.inf
    for j in range(J):
        c0 = L0[i, j]
        if c0 == math.inf:
            continue
        R = 0.0
        for s in range(S):
            w = wt[i, j, s]
            if w != 0.0:
                R += w * u[nb[i, j, s]]
        a = (1.0 - wself[i, j]) + dt * kl
        term = a * root - R - dt * c0
        if term > best + 1e-15:
            best = term
            best_j = j
    return root, best_j


def _solve_loop_py(orders, u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi,
                   max_sweeps, tol_fp, history):
    n_orders = orders.shape[0]
    N = u.shape[0]
    for sweep in range(max_sweeps):
        order = orders[sweep % n_orders]
        delta = 0.0
        for k in range(N):
            i = order[k]
            val, j = node_solve(i, u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi)
            if j < 0:
                return -(i + 1)
            d = abs(val - u[i])
            if d > delta:
                delta = d
            u[i] = val
        history[sweep] = delta
        if delta < tol_fp:
            return sweep + 1
    return max_sweeps


def _jacobi_py(u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi, out, policy):
    for i in range(u.shape[0]):
        val, j = node_solve(i, u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi)
        out[i] = val
        policy[i] = j


node_solve = jit(_node_solve_py)
_solve_loop_nb = jit(_solve_loop_py)
_jacobi_nb = jit(_jacobi_py)


# ---------------------------------------------------------------- numpy path
def _neighbor_part(u, nb, wt):
    return np.einsum("js,js->j", wt, u[nb])


def _node_solve_np(i, u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi):
    c0 = L0[i]
    feas = np.isfinite(c0)
    if not feas.any():
        return math.nan, -1
    R = np.where(feas, _neighbor_part(u, nb[i], wt[i]), 0.0)
    a = (1.0 - wself[i]) + dt * kl
    b = R + dt * (np.where(feas, c0, 0.0) + C)
    if eps == 0.0:
        flat = feas & (a <= 1e-14)
        live = feas & ~flat
        if np.any(b[flat] < 0.0):
            return lo, int(np.flatnonzero(feas)[0])
        if not live.any():
            return math.nan, -1
        vals = np.where(live, b / np.where(live, a, 1.0), np.inf)
        j = int(np.argmin(vals))
        return float(min(max(vals[j], lo), hi)), j
    a_lo, a_hi = lo, hi
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (a_lo + a_hi)
        F = np.max(np.where(feas, a * mid + dt * eps * math.sin(lp * mid) - b, -np.inf))
        if F > 0.0:
            a_hi = mid
        else:
            a_lo = mid
    root = 0.5 * (a_lo + a_hi)
    term = np.where(feas, a * root - R - dt * np.where(feas, c0, 0.0), -np.inf)
    # lowest index among near-ties, matching the compiled kernel
    best = term.max()
    j = int(np.flatnonzero(term >= best - 1e-15)[0])
    return root, j


def _solve_loop_np(orders, u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi,
                   max_sweeps, tol_fp, history):
    N = u.shape[0]
    for sweep in range(max_sweeps):
        order = orders[sweep % len(orders)]
        delta = 0.0
        for i in order:
            val, j = _node_solve_np(i, u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi)
            if j < 0:
                return -(int(i) + 1)
            delta = max(delta, abs(val - u[i]))
            u[i] = val
        history[sweep] = delta
        if delta < tol_fp:
            return sweep + 1
    return max_sweeps


def _jacobi_np(u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi, out, policy):
    for i in range(u.shape[0]):
        out[i], policy[i] = _node_solve_np(i, u, nb, wt, wself, L0, dt, C, kl, eps, lp, lo, hi)


def solve_loop(*args):
    """Run Gauss-Seidel sweeps; returns sweeps used, or -(i+1) if node i has no control."""
    if numba_enabled():
        return _solve_loop_nb(*args)
    return _solve_loop_np(*args)


def jacobi(*args):
    """One explicit (Jacobi) application of the update, writing values and argmins."""
    if numba_enabled():
        return _jacobi_nb(*args)
    return _jacobi_np(*args)
