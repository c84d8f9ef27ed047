import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjselect.ergodic import (c_of_lambda, critical_value, discount_critical_value, h_of_c,
                              lagrange_at_zero, lp_critical_value)
from hjselect.geometry import StarDomain, build_grid
from hjselect.hamiltonians import make_hamiltonian
from hjselect.sweep import RRule

DOM = StarDomain.interval(-1, 1)
GRID = build_grid(DOM, 0.01)
QUAD = {"kind": "quadratic", "a": 1.0}
LIN = {"kind": "linear", "b": -1.0}


def H_of(V, preset="mech", **kw):
    return make_hamiltonian({"preset": preset, "V": V, **kw}, DOM)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_lagrange_extrapolation_exact_on_quadratics(a, b, c):
    xs = np.array([0.02, 0.01, 0.005])
    assert lagrange_at_zero(xs, a + b * xs + c * xs ** 2) == pytest.approx(a, abs=1e-9)


@pytest.mark.parametrize("V,a,r,expected", [
    (QUAD, 0.0, 0.0, 0.0), (LIN, 0.0, 0.0, 1.0), (QUAD, 0.5, 0.0, 0.5),
    (QUAD, 0.0, 0.1, 0.0), (LIN, 0.0, 0.1, 1.1),
])
def test_critical_values(V, a, r, expected):
    res = critical_value(GRID, H_of(V), a, r)
    assert res.value == pytest.approx(expected, abs=1e-3)
    assert res.discrepancy <= max(1e-3, 5 * GRID.spacing)


def test_methods_agree_on_presets():
    for H in (H_of(QUAD), H_of(LIN), H_of(QUAD, "eik"), H_of(QUAD, "nonlin_u", epsilon=0.5)):
        c_lp = lp_critical_value(GRID, H)
        c_disc, _, _ = discount_critical_value(GRID, H)
        assert abs(c_lp - c_disc) <= max(1e-3, 5 * GRID.spacing)


def test_c_of_lambda_uses_scaling_rule():
    H = H_of(LIN)
    assert c_of_lambda(GRID, H, 0.1, RRule("affine", 1.0)) == pytest.approx(1.1, abs=1e-3)
    assert c_of_lambda(GRID, H, 0.1) == pytest.approx(1.0, abs=1e-3)


def test_sigma_ratio_bounded():
    H = H_of(LIN)
    c_H = critical_value(GRID, H).value
    K = 1.0 + 1.0  # sup |<dx_L, x>| + 1 for V = -x on [-1, 1]
    for lam in (0.2, 0.1, 0.05):
        r = lam
        assert abs((critical_value(GRID, H, 0, r).value - c_H) / r) <= K


def test_h0_oracle_and_lipschitz():
    H = H_of(QUAD)
    cs = [-0.5, -0.2, 0.1, 0.5]
    hs = [h_of_c(GRID, H, c) for c in cs]
    assert hs[0] == pytest.approx(-0.5, abs=2e-3)
    assert hs[-1] == pytest.approx(0.5, abs=2e-3)
    for i in range(len(cs) - 1):
        q = (hs[i + 1] - hs[i]) / (cs[i + 1] - cs[i])
        assert 0 < q <= 1 / H.mono_kappa + 2e-3


def test_h0_nonlinear_monotone():
    H = H_of(QUAD, "nonlin_u", epsilon=0.5)
    hs = [h_of_c(GRID, H, c) for c in (-0.3, 0.0, 0.3)]
    assert hs[0] < hs[1] < hs[2] and abs(hs[1]) <= 1e-9
    # kappa a + eps sin a = c at the minimum point
    assert hs[2] + 0.5 * np.sin(hs[2]) == pytest.approx(0.3, abs=2e-3)


def test_uniqueness_anchor():
    # the scaled critical value equals c(lambda) only at level zero
    H = H_of(LIN)
    target = critical_value(GRID, H, 0.0, 0.1).value
    assert abs(h_of_c(GRID, H, target, r=0.1)) <= 2e-3
