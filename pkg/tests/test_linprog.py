import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from hjselect.corpus import brute_force_lp
from hjselect.errors import ConfigError
from hjselect.linprog import LPProblem, reduced_costs, sample_optimal_face, solve_lp


def bounded_instance(seed):
    """Random standard-form LP with a capacity row, so it is feasible and bounded."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    k = int(rng.integers(m + 1, 10))
    x0 = rng.uniform(0, 1, k) * (rng.random(k) < 0.7)
    A = np.zeros((m + 1, k + 1))
    A[:m, :k] = rng.normal(size=(m, k))
    A[m] = 1.0
    b = np.concatenate([A[:m, :k] @ x0, [x0.sum() + 1.0]])
    c = np.concatenate([rng.normal(size=k), [0.0]])
    return c, A, b


def assert_kkt(p, sol):
    A, b, c = p.A, p.b, p.c
    x, y = sol.x, sol.y
    assert np.max(np.abs(A @ x - b)) <= 1e-8 * (1 + np.abs(b).max())
    assert np.all(x >= -1e-12)
    red = c - A.T @ y
    assert np.all(red >= -1e-8)
    assert np.all(x * red <= 1e-7)
    assert abs(c @ x - b @ y) <= 1e-7 * (1 + abs(c @ x))


@given(st.integers(0, 10 ** 6))
def test_matches_basis_enumeration(seed):
    c, A, b = bounded_instance(seed)
    sol = solve_lp(LPProblem(c, A, b))
    assert sol.optimal
    assert sol.objective == pytest.approx(brute_force_lp(c, A, b), abs=1e-9)
    assert_kkt(LPProblem(c, A, b), sol)


@given(st.integers(0, 10 ** 6), st.floats(0.1, 10.0))
def test_scaling_equivariance(seed, s):
    c, A, b = bounded_instance(seed)
    x1 = solve_lp(LPProblem(c, A, b)).x
    sol = solve_lp(LPProblem(c, A, s * b))
    # the same optimal basis stays optimal after scaling the right-hand side
    assert sol.objective == pytest.approx(s * (c @ x1), abs=1e-8 * (1 + s))


def test_sparse_matches_dense():
    c, A, b = bounded_instance(3)
    d = solve_lp(LPProblem(c, A, b))
    s = solve_lp(LPProblem(c, sp.csc_matrix(A), b))
    assert s.objective == pytest.approx(d.objective, abs=1e-12)


def test_infeasible_and_unbounded():
    assert solve_lp(LPProblem([1.0, 1.0], [[1.0, 1.0]], [-1.0])).status == "infeasible"
    assert solve_lp(LPProblem([-1.0, 0.0], [[1.0, -1.0]], [0.0])).status == "unbounded"


def test_basis_hint_gives_same_answer():
    c, A, b = bounded_instance(11)
    first = solve_lp(LPProblem(c, A, b))
    again = solve_lp(LPProblem(c + 1e-3, A, b), basis_hint=first.basis)
    cold = solve_lp(LPProblem(c + 1e-3, A, b))
    assert again.objective == pytest.approx(cold.objective, abs=1e-12)


def test_problem_validation():
    with pytest.raises(ConfigError):
        LPProblem([1.0], [[1.0], [1.0]], [1.0, 1.0])
    with pytest.raises(ConfigError):
        LPProblem([1.0, 1.0], [[0.0, 0.0]], [1.0])
    with pytest.raises(ConfigError):
        LPProblem([np.nan, 1.0], [[1.0, 1.0]], [1.0])


def test_segment_face_vertices():
    verts = sample_optimal_face(LPProblem(np.zeros(2), np.ones((1, 2)), np.ones(1)), 8, seed=0)
    pts = sorted(tuple(np.round(v.x, 9)) for v in verts)
    assert pts == [(0.0, 1.0), (1.0, 0.0)]


def test_simplex_face_all_vertices():
    # minimize 0 over the unit simplex in R^4: every vertex is optimal
    verts = sample_optimal_face(LPProblem(np.zeros(4), np.ones((1, 4)), np.ones(1)), 64, seed=1)
    pts = {tuple(np.round(v.x, 9)) for v in verts}
    assert pts <= {tuple(e) for e in np.eye(4)}
    assert len(pts) >= 3


def test_unique_optimum_single_vertex():
    c, A, b = bounded_instance(5)
    verts = sample_optimal_face(LPProblem(c, A, b), 8, seed=0)
    assert len(verts) == 1


def test_reduced_costs_nonnegative():
    c, A, b = bounded_instance(7)
    p = LPProblem(c, A, b)
    sol = solve_lp(p)
    assert np.all(reduced_costs(p, sol) >= -1e-9)


@given(st.integers(0, 10 ** 6))
def test_dual_feasible_hint_after_rhs_change(seed):
    c, A, b = bounded_instance(seed)
    first = solve_lp(LPProblem(c, A, b))
    rng = np.random.default_rng(seed + 1)
    x1 = rng.uniform(0, 1, A.shape[1] - 1) * (rng.random(A.shape[1] - 1) < 0.7)
    b2 = np.concatenate([A[:-1, :-1] @ x1, [x1.sum() + 1.0]])
    p2 = LPProblem(c, A, b2)
    warm = solve_lp(p2, basis_hint=first.basis)
    cold = solve_lp(p2)
    assert warm.optimal and warm.objective == pytest.approx(cold.objective, abs=1e-9)
    assert_kkt(p2, warm)


def test_degenerate_circulation_lp():
    # cycle flows on a ring with b = (1, 0, ..., 0): every vertex is highly degenerate
    n = 40
    rng = np.random.default_rng(5)
    cols, cost = [], []
    for i in range(n):
        for step in (-1, 0, 1):
            col = np.zeros(n + 1)
            col[0] = 1.0
            if step:
                col[1 + i] -= 1.0
                col[1 + (i + step) % n] += 1.0
            cols.append(col)
            cost.append(rng.uniform(0, 1) + abs(step))
    A = np.array(cols).T
    A = A[:-1]  # ring rows sum to zero; drop one
    b = np.zeros(n)
    b[0] = 1.0
    sol = solve_lp(LPProblem(np.array(cost), A, b))
    rest = np.array(cost)[1::3]
    assert sol.objective == pytest.approx(rest.min(), abs=1e-12)
