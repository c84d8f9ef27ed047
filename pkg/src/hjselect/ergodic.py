"""Critical values c(H), c(lambda) and the level maps h_lambda(c)."""

from __future__ import annotations

import threading
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._accel import worker_count
from .errors import BracketFailure, CrossCheckFailed
from .hjsolver import build_stencil, control_lattice, default_control_bound, solve_tabulated
from .mather import build_holonomic_lp, clear_bases, solve_holonomic

DELTAS = (0.02, 0.01, 0.005)
BISECT_STEPS = 40


def lagrange_at_zero(xs, ys):
    """Value at 0 of the polynomial through (xs, ys)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    total = 0.0
    for i in range(len(xs)):
        w = 1.0
        for j in range(len(xs)):
            if j != i:
                w *= (0.0 - xs[j]) / (xs[i] - xs[j])
        total += w * ys[i]
    return float(total)


@dataclass
class CriticalValueResult:
    value: float
    method: str = "lp_dual"
    lp_value: float = float("nan")
    discount_value: float | None = None
    sequence: list = field(default_factory=list)  # (delta, -delta w(x_ref))
    discrepancy: float | None = None
    spread: float | None = None  # max over nodes minus min of the extrapolated -delta w

    def to_dict(self):
        return {"value": self.value, "method": self.method, "lp_value": self.lp_value,
                "discount_value": self.discount_value,
                "sequence": [list(map(float, s)) for s in self.sequence],
                "discrepancy": self.discrepancy, "spread": self.spread}


def frozen_cost(grid, H, controls, a, r):
    """Table L((1+r) x_i, v_j, a) for the frozen Hamiltonian."""
    sep = H.separable()
    x = (1.0 + r) * grid.points
    if sep is not None:
        L0, kappa, eps = sep
        return L0(x[:, None, :], controls.points[None]) - kappa * a - eps * np.sin(a)
    return H.L(x[:, None, :], controls.points[None], np.full((grid.n, len(controls)), float(a)))


def lp_critical_value(grid, H, a=0.0, r=0.0, K=None):
    controls = control_lattice(grid.dimension, default_control_bound(H), K)
    hlp = build_holonomic_lp(grid, controls, H, a, r)
    return -solve_holonomic(hlp, r).objective


def discount_critical_value(grid, H, a=0.0, r=0.0, deltas=DELTAS, K=None):
    """Extrapolate -delta w_delta(x_ref) to delta = 0 for delta w + H((1+r)x, Dw, a) = 0."""
    controls = control_lattice(grid.dimension, default_control_bound(H), K)
    stencil = build_stencil(grid, controls)
    L0 = frozen_cost(grid, H, controls, a, r)
    ref = int(grid.nearest_node(np.zeros((1, grid.dimension)))[0])
    seq, fields = [], []
    for d in deltas:
        fld = solve_tabulated(stencil, L0, 1.0, 0.0, d, 0.0, 0.0, H.u_cap)
        fields.append(-d * fld.values)
        seq.append((d, float(-d * fld.values[ref])))
    value = lagrange_at_zero([s[0] for s in seq], [s[1] for s in seq])
    extrap = np.array([lagrange_at_zero(deltas, [f[i] for f in fields]) for i in range(grid.n)])
    return value, seq, float(extrap.max() - extrap.min())


def critical_value(grid, H, a=0.0, r=0.0, cross_check=True, K=None):
    """Ergodic constant of (x, p) -> H((1+r) x, p, a) on the base grid.

    The LP value is returned; the discount route is run alongside as a gate.
    """
    if not cross_check:
        c = lp_critical_value(grid, H, a, r, K)
        return CriticalValueResult(c, "lp_dual", c)
    with ThreadPoolExecutor(max_workers=min(2, worker_count())) as ex:
        f_lp = ex.submit(lp_critical_value, grid, H, a, r, K)
        f_disc = ex.submit(discount_critical_value, grid, H, a, r, DELTAS, K)
        c_lp = f_lp.result()
        c_disc, seq, spread = f_disc.result()
    gap = abs(c_disc - c_lp)
    res = CriticalValueResult(c_lp, "lp_dual", c_lp, c_disc, seq, gap, spread)
    tol = max(1e-3, 5 * grid.spacing)
    if gap > tol:
        raise CrossCheckFailed(
            f"LP critical value {c_lp:.6g} and discount value {c_disc:.6g} differ by {gap:.3g} > {tol:.3g}")
    return res


def c_of_lambda(grid, H, lam, r_rule=None, cross_check=True):
    """c(lambda) = critical value on (1 + r(lambda)) Omega, via the rectified problem."""
    r = 0.0 if r_rule is None else float(r_rule(lam))
    return critical_value(grid, H, 0.0, r, cross_check).value


# (a, c) evaluation pairs per grid and Hamiltonian
_PAIRS = weakref.WeakKeyDictionary()
_PAIR_LOCK = threading.Lock()


def _cached_level_value(grid, H, a, r):
    key = (id(H), round(float(r), 15), float(a))
    with _PAIR_LOCK:
        hit = _PAIRS.get(grid, {}).get(key)
    # the stored H reference pins the id, so a hit is never a recycled id
    if hit is not None and hit[0] is H:
        return hit[1]
    c = lp_critical_value(grid, H, a, r)
    with _PAIR_LOCK:
        _PAIRS.setdefault(grid, {})[key] = (H, c)
    return c


def h_of_c(grid, H, c, r=0.0, steps=BISECT_STEPS):
    """Level a with critical value of H((1+r)x, p, a) equal to c (bisection in a)."""
    kappa_eff = H.mono_kappa
    c0 = _cached_level_value(grid, H, 0.0, r)
    if c == c0:
        return 0.0
    span = 2.0 * (c - c0) / kappa_eff
    lo, hi = sorted((0.0, span))
    f_lo = _cached_level_value(grid, H, lo, r) - c
    f_hi = _cached_level_value(grid, H, hi, r) - c
    if not (f_lo <= 0.0 <= f_hi):
        raise BracketFailure(
            f"critical value is not increasing across [{lo:.4g}, {hi:.4g}] "
            f"(residuals {f_lo:.3g}, {f_hi:.3g})")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        f_mid = _cached_level_value(grid, H, mid, r) - c
        if f_mid < f_lo - 1e-12 or f_mid > f_hi + 1e-12:
            raise BracketFailure("critical value is not monotone in the level")
        if f_mid > 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
    return 0.5 * (lo + hi)


def clear_caches():
    """Drop cached level values and LP warm-start bases."""
    with _PAIR_LOCK:
        _PAIRS.clear()
    clear_bases()
