"""Two-phase revised simplex for ``min c.x  s.t.  A x = b, x >= 0``.

The basis inverse is kept explicitly as a dense matrix and updated by
rank-one (eta) transforms, with a fresh inversion every ``REFACTOR`` pivots.
``A`` may be a dense array or a scipy sparse matrix; only column access and
``A.T @ y`` are needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg.blas import dger

from .errors import ConfigError, IterationCapExceeded, NumericallySingularBasis

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
COND_LIMIT = 1e12
REFACTOR = 500  # upper bound; drift checks may refactor sooner
DRIFT_CHECK = 50
DRIFT_TOL = 1e-9
HARRIS_DELTA = 1e-9
PERTURB = 1e-7
ART_PIVOT_TOL = 1e-7  # relative; keeps roundoff entries from forcing an exit


@dataclass
class LPProblem:
    c: np.ndarray
    A: object  # ndarray or scipy sparse matrix, m x n
    b: np.ndarray
    strict: bool = True  # enforce m <= n

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        if sp.issparse(self.A):
            self.A = sp.csc_matrix(self.A, dtype=float)
        else:
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        m, n = self.A.shape
        if len(self.c) != n or len(self.b) != m:
            raise ConfigError("LP dimensions do not match")
        if self.strict and m > n:
            raise ConfigError("LP needs at least as many columns as rows")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))):
            raise ConfigError("LP data must be finite")
        rowmax = _row_absmax(self.A)
        if not np.all(np.isfinite(rowmax)):
            raise ConfigError("LP matrix entries must be finite")
        if np.any(rowmax == 0):
            raise ConfigError("LP matrix has an all-zero row")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class LPSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float
    y: np.ndarray | None
    basis: np.ndarray | None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == "optimal"


def _row_absmax(A):
    if sp.issparse(A):
        return np.asarray(abs(A).max(axis=1).todense()).ravel()
    return np.abs(A).max(axis=1)


class _Simplex:
    """Working state on the equilibrated problem with artificial columns."""

    def __init__(self, A, b, art_rows, max_iter):
        self.A = A
        self.sparse = sp.issparse(A)
        self.b = b
        self.m, self.n = A.shape
        self.art_rows = np.asarray(art_rows, dtype=np.int64)
        self.n_total = self.n + len(self.art_rows)
        self.max_iter = max_iter
        self.iterations = 0
        self.rhs = b  # working right-hand side; differs from b while perturbed

    def column(self, j):
        if j >= self.n:
            col = np.zeros(self.m)
            col[self.art_rows[j - self.n]] = 1.0
            return col
        if self.sparse:
            s, e = self.A.indptr[j], self.A.indptr[j + 1]
            col = np.zeros(self.m)
            col[self.A.indices[s:e]] = self.A.data[s:e]
            return col
        return self.A[:, j].copy()

    def basis_matrix(self, basis):
        basis = np.asarray(basis, dtype=np.int64)
        B = np.zeros((self.m, len(basis)))
        real = basis < self.n
        sub = self.A[:, basis[real]]
        B[:, real] = sub.toarray() if self.sparse else sub
        art = np.flatnonzero(~real)
        B[self.art_rows[basis[art] - self.n], art] = 1.0
        return B

    def ftran(self, j):
        """B^{-1} a_j, touching only the nonzeros of column j."""
        if j >= self.n:
            return self.Binv[:, self.art_rows[j - self.n]].copy()
        if self.sparse:
            s, e = self.A.indptr[j], self.A.indptr[j + 1]
            return self.Binv[:, self.A.indices[s:e]] @ self.A.data[s:e]
        return self.Binv @ self.A[:, j]

    def drifted(self):
        """Accuracy probe of the updated inverse: |B^{-1} (B z) - z| for a fixed z."""
        z = np.linspace(1.0, 2.0, self.m)
        real = self.basis < self.n
        w = self.A[:, self.basis[real]] @ z[real]
        np.add.at(w, self.art_rows[self.basis[~real] - self.n], z[~real])
        return np.abs(self.Binv @ w - z).max() > DRIFT_TOL

    def refactor(self, basis):
        B = self.basis_matrix(basis)
        try:
            Binv = sla.inv(B, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericallySingularBasis("basis matrix is singular") from exc
        cond = np.abs(B).sum(axis=0).max() * np.abs(Binv).sum(axis=0).max()
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise NumericallySingularBasis(f"basis condition estimate {cond:.3g} exceeds 1e12")
        self.Binv = np.asfortranarray(Binv)
        self.basis = np.array(basis, dtype=np.int64)
        self.xB = np.maximum(Binv @ self.rhs, 0.0)
        self.since_refactor = 0

    def perturb(self, seed=0):
        """Shift real basic values up by small random amounts (anti-stalling).

        This is the same as solving with right-hand side ``b + B xi``.
        """
        xi = np.random.default_rng(seed).uniform(1.0, 2.0, self.m) * PERTURB * (1 + np.abs(self.b).max())
        xi[self.basis >= self.n] = 0.0
        self.xB = self.xB + xi
        self.rhs = self.rhs + self.basis_matrix(self.basis) @ xi

    def dual_simplex(self, cost):
        """Restore the true right-hand side and repair primal feasibility.

        Assumes the basis is (nearly) dual feasible for ``cost``.  Raises
        NumericallySingularBasis when a negative row has no entering column,
        which certifies primal infeasibility.
        """
        if self.rhs is not self.b:
            self.rhs = self.b
            self.refactor(self.basis)
        tol = FEAS_TOL * (1 + np.abs(self.b).max())
        while True:
            xB = self.Binv @ self.b
            r = int(np.argmin(xB))
            if xB[r] >= -tol:
                self.xB = np.maximum(xB, 0.0)
                return
            if self.iterations >= self.max_iter:
                raise IterationCapExceeded(f"simplex exceeded {self.max_iter} iterations")
            y = self.Binv.T @ cost[self.basis]
            d = np.maximum(self.reduced_costs(cost, y)[: self.n], 0.0)
            row = self.A.T @ self.Binv[r] if self.sparse else self.Binv[r] @ self.A
            row[self.basis[self.basis < self.n]] = 0.0
            cand = np.flatnonzero(row < -PIVOT_TOL)
            if len(cand) == 0:
                raise NumericallySingularBasis("dual simplex cleanup found no entering column")
            q = int(cand[np.argmin(d[cand] / -row[cand])])
            alpha = self.ftran(q)
            self.basis[r] = q
            self.iterations += 1
            self.since_refactor += 1
            if self.since_refactor >= REFACTOR:
                self.refactor(self.basis)
            else:
                self.pivot_update(alpha, r)

    def reduced_costs(self, cost, y):
        d = np.empty(self.n_total)
        d[: self.n] = cost[: self.n] - self.A.T @ y
        d[self.n:] = cost[self.n:] - y[self.art_rows]
        return d

    def run(self, cost, phase):
        """Iterate to optimality for ``cost``; returns 'optimal' or 'unbounded'.

        Artificial columns never enter.  In phase 2 basic artificials sit at
        zero and are pivoted out as soon as an entering column touches them.
        """
        m = self.m
        degenerate = 0
        scale = max(1.0, np.abs(cost).max())
        tol_d = 1e-11 * scale
        y = None
        while True:
            if self.iterations >= self.max_iter:
                raise IterationCapExceeded(f"simplex exceeded {self.max_iter} iterations")
            if y is None:
                y = self.Binv.T @ cost[self.basis]
            d = self.reduced_costs(cost, y)
            d[self.basis] = 0.0
            d[self.n:] = 0.0
            bland = degenerate >= 3 * m
            if bland:
                cand = np.flatnonzero(d < -tol_d)
                q = int(cand[0]) if len(cand) else -1
            else:
                q = int(np.argmin(d))
                q = q if d[q] < -tol_d else -1
            if q < 0:
                if self.since_refactor == 0:
                    return "optimal"
                # confirm optimality with fresh factors
                self.refactor(self.basis)
                y = None
                continue
            alpha = self.ftran(q)
            r = self._ratio_test(alpha, bland, phase)
            if r < 0:
                return "unbounded"
            theta = self.xB[r] / alpha[r]
            theta = max(theta, 0.0)
            degenerate = degenerate + 1 if theta <= 1e-12 else 0
            self.xB -= theta * alpha
            self.xB[r] = theta
            np.maximum(self.xB, 0.0, out=self.xB)
            self.basis[r] = q
            self.iterations += 1
            self.since_refactor += 1
            if self.since_refactor >= REFACTOR:
                self.refactor(self.basis)
                y = None
                continue
            y = y + d[q] * self.pivot_update(alpha, r)
            if self.since_refactor % DRIFT_CHECK == 0 and self.drifted():
                self.refactor(self.basis)
                y = None

    def pivot_update(self, alpha, r):
        """In-place eta update of the basis inverse for a pivot on row ``r``."""
        piv = self.Binv[r] / alpha[r]
        a = alpha.copy()
        a[r] -= 1.0
        self.Binv = dger(-1.0, a, piv, a=self.Binv, overwrite_a=True)
        return piv

    def _ratio_test(self, alpha, bland, phase):
        pos = alpha > PIVOT_TOL
        if phase == 2:
            # zero-level artificials leave on any nonzero entry
            art = self.basis >= self.n
            force = art & (np.abs(alpha) > ART_PIVOT_TOL * max(1.0, np.abs(alpha).max()))
            if np.any(force):
                idx = np.flatnonzero(force)
                return int(idx[np.argmax(np.abs(alpha[idx]))])
        if not np.any(pos):
            return -1
        idx = np.flatnonzero(pos)
        ratios = self.xB[idx] / alpha[idx]
        if bland:
            best = ratios.min()
            tie = idx[ratios <= best + 1e-12]
            return int(tie[np.argmin(self.basis[tie])])
        relaxed = ((self.xB[idx] + HARRIS_DELTA) / alpha[idx]).min()
        ok = idx[ratios <= relaxed]
        return int(ok[np.argmax(alpha[ok])])


def _crash_columns(A, m, c):
    """Positive unit-vector columns, one per row where available.

    Among several candidates for a row the one with the least cost per unit
    of the row entry is taken.
    """
    cols = -np.ones(m, dtype=np.int64)
    if sp.issparse(A):
        single = np.flatnonzero(np.diff(A.indptr) == 1)
        rows = A.indices[A.indptr[single]]
        vals = A.data[A.indptr[single]]
    else:
        nz = A != 0
        single = np.flatnonzero(nz.sum(axis=0) == 1)
        rows = np.argmax(nz[:, single], axis=0) if len(single) else np.zeros(0, dtype=np.int64)
        vals = A[rows, single]
    keep = vals > 0
    single, rows, vals = single[keep], rows[keep], vals[keep]
    # stable sort by (row, unit cost, column) then take the first per row
    order = np.lexsort((single, c[single] / vals, rows))
    rows_sorted = rows[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = rows_sorted[1:] != rows_sorted[:-1]
    cols[rows_sorted[first]] = single[order][first]
    return cols


def solve_lp(problem, basis_hint=None, max_iter=None):
    """Solve ``problem`` by two-phase revised simplex.

    ``basis_hint`` is an optional list of m column indices; when it is a
    nonsingular primal-feasible basis, phase 1 is skipped.
    """
    if not isinstance(problem, LPProblem):
        problem = LPProblem(*problem)
    A0, b0, c = problem.A, problem.b, problem.c
    m, n = A0.shape
    # row equilibration and sign normalization so that b >= 0
    scale = 1.0 / _row_absmax(A0)
    sign = np.where(b0 < 0, -1.0, 1.0)
    rs = scale * sign
    if sp.issparse(A0):
        A = sp.csc_matrix(sp.diags(rs) @ A0)
    else:
        A = A0 * rs[:, None]
    b = b0 * rs
    if max_iter is None:
        max_iter = 50 * (m + n)

    cost2 = np.zeros(n)
    cost2[:n] = c
    solver = None
    if basis_hint is not None:
        solver = _try_hint(A, b, cost2, basis_hint, max_iter)
    if solver is None:
        crash = _crash_columns(A, m, c)
        art_rows = np.flatnonzero(crash < 0)
        solver = _Simplex(A, b, art_rows, max_iter)
        basis = crash.copy()
        basis[art_rows] = n + np.arange(len(art_rows))
        # crash columns are unit vectors scaled by their entry
        solver.refactor(basis)
        if np.any(solver.xB[basis >= n] > FEAS_TOL * (1 + np.abs(b).max())):
            cost1 = np.zeros(solver.n_total)
            cost1[n:] = 1.0
            solver.run(cost1, phase=1)
            infeas = solver.xB[solver.basis >= n].sum()
            if infeas > FEAS_TOL * (1 + np.abs(b).max()):
                return LPSolution("infeasible", None, np.nan, None, None, solver.iterations)
        if len(art_rows):
            _drive_out_artificials(solver)
    cost2 = np.concatenate([cost2, np.zeros(solver.n_total - n)])
    solver.perturb()
    status = solver.run(cost2, phase=2)
    if status == "unbounded":
        return LPSolution("unbounded", None, -np.inf, None, None, solver.iterations)
    solver.dual_simplex(cost2)
    # the repair pivots keep dual feasibility only up to tolerance; confirm
    if solver.run(cost2, phase=2) == "unbounded":
        return LPSolution("unbounded", None, -np.inf, None, None, solver.iterations)
    if solver.since_refactor:
        solver.refactor(solver.basis)
    x = np.zeros(n)
    real = solver.basis < n
    x[solver.basis[real]] = solver.xB[real]
    y_scaled = solver.Binv.T @ cost2[solver.basis]
    y = y_scaled * rs
    return LPSolution("optimal", x, float(c @ x), y, solver.basis.copy(), solver.iterations)


def _try_hint(A, b, cost, basis_hint, max_iter):
    """Solver state on a hinted basis, or None when the hint is unusable.

    A primal-feasible hint skips phase 1.  A dual-feasible one (typical when
    only ``b`` changed) is made primal feasible by dual simplex pivots.
    """
    m, n = A.shape
    basis = np.asarray(basis_hint, dtype=np.int64)
    if len(basis) != m or np.any(basis < 0) or np.any(basis >= n) or len(set(basis.tolist())) != m:
        return None
    solver = _Simplex(A, b, np.zeros(0, dtype=np.int64), max_iter)
    try:
        solver.refactor(basis)
    except NumericallySingularBasis:
        return None
    tol = FEAS_TOL * (1 + np.abs(b).max())
    if np.all(solver.Binv @ b >= -tol):
        return solver
    d = solver.reduced_costs(cost, solver.Binv.T @ cost[solver.basis])
    if np.any(d < -1e-9 * (1 + np.abs(cost).max())):
        return None
    try:
        solver.dual_simplex(cost)
    except NumericallySingularBasis:
        return None
    return solver


def _drive_out_artificials(solver):
    """Pivot zero-level artificials out of the basis where a real column allows it."""
    n = solver.n
    for r in np.flatnonzero(solver.basis >= n):
        row = solver.Binv[r]
        if solver.sparse:
            vals = solver.A.T @ row
        else:
            vals = row @ solver.A
        vals[solver.basis[solver.basis < n]] = 0.0
        q = int(np.argmax(np.abs(vals)))
        if abs(vals[q]) <= 1e-7:
            continue  # redundant row; artificial stays basic at zero
        alpha = solver.ftran(q)
        solver.basis[r] = q
        solver.pivot_update(alpha, r)
        solver.xB -= (solver.xB[r] / alpha[r]) * alpha
        solver.xB[r] = 0.0
    solver.refactor(solver.basis)


def reduced_costs(problem, solution):
    return problem.c - problem.A.T @ solution.y


def sample_optimal_face(problem, n_directions=8, seed=0, solution=None, band=None):
    """Distinct vertices of the optimal face found by random objectives.

    The face is the feasible set restricted to columns whose reduced cost at
    the optimum lies within ``band`` (default 1e-7 (1 + |z*|)).
    """
    if not isinstance(problem, LPProblem):
        problem = LPProblem(*problem)
    if solution is None:
        solution = solve_lp(problem)
    if not solution.optimal:
        return []
    z = solution.objective
    band = 1e-7 * (1 + abs(z)) if band is None else band
    d = reduced_costs(problem, solution)
    face_cols = np.flatnonzero(d <= band)
    A = problem.A[:, face_cols]
    keep = _row_absmax(A) > 0
    if np.any(np.abs(problem.b[~keep]) > FEAS_TOL):
        return [solution]
    A, b = A[keep], problem.b[keep]
    rng = np.random.default_rng(seed)
    found = [solution]
    for _ in range(n_directions):
        g = rng.standard_normal(len(face_cols))
        sub = solve_lp(LPProblem(g, A, b, strict=False))
        if not sub.optimal:
            continue
        x = np.zeros(problem.shape[1])
        x[face_cols] = sub.x
        if any(np.max(np.abs(x - s.x)) <= 1e-6 for s in found):
            continue
        found.append(LPSolution("optimal", x, float(problem.c @ x), solution.y,
                                face_cols[sub.basis[sub.basis < len(face_cols)]], sub.iterations))
    return found
