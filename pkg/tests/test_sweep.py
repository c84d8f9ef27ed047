import json
import math

import numpy as np
import pytest

from hjselect import io
from hjselect.errors import ConfigError
from hjselect.geometry import StarDomain, build_grid
from hjselect.hamiltonians import make_hamiltonian
from hjselect.sweep import (CRule, RRule, SweepConfig, SweepReport, geometric_schedule, run_sweep,
                            verify_theorems)

DOM = StarDomain.interval(-1, 1)
GRID = build_grid(DOM, 0.01)
QUAD = make_hamiltonian({"preset": "mech", "V": {"kind": "quadratic", "a": 1.0}}, DOM)
TOL = 5 * GRID.spacing


@pytest.fixture(scope="module")
def zero_rule():
    return run_sweep(SweepConfig(GRID, QUAD))


def names(rep):
    return {e["name"]: e for e in rep.checklist}


def test_schedule():
    assert geometric_schedule() == pytest.approx([0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625])


def test_limit_and_checklist(zero_rule):
    rep = zero_rule
    assert np.max(np.abs(rep.u0 - GRID.points[:, 0] ** 2 / math.sqrt(2))) <= TOL
    assert rep.zeta_hat == 0.0 and rep.sigma_hat is None
    checks = names(rep)
    for key in ("T1", "T2", "T3", "T5", "zeta_rho_stabilize", "bounded", "cauchy"):
        assert checks[key]["pass"], key
    assert all(rec.residual <= 1e-7 for rec in rep.records)


def test_eta_zero_shortcut(zero_rule):
    rep = run_sweep(SweepConfig(GRID, QUAD, r_rule=RRule("affine", 0.0), C_rule=CRule("affine", 0.0)))
    assert np.max(np.abs(rep.u0 - zero_rule.u0)) <= TOL


def test_rectified_bounded_and_converging(zero_rule):
    rep = zero_rule
    errs = [np.max(np.abs(rep.normalized(rec) - rep.u0)) for rec in rep.records]
    assert np.all(np.isfinite(errs))
    assert errs[-1] <= errs[0]


def test_report_roundtrip(zero_rule):
    d = zero_rule.to_dict()
    back = SweepReport.from_dict(json.loads(io.dumps(d)), GRID, QUAD)
    assert io.dumps(back.to_dict()) == io.dumps(d)
    assert [e["pass"] for e in verify_theorems(back)] == [e["pass"] for e in zero_rule.checklist]


def test_thread_count_does_not_change_output(monkeypatch):
    cfg = dict(r_rule=RRule("affine", 1.0), C_rule=CRule("affine", zeta=1.0))
    monkeypatch.setenv("HJSELECT_THREADS", "1")
    one = io.dumps(run_sweep(SweepConfig(GRID, QUAD, **cfg)).to_dict())
    monkeypatch.setenv("HJSELECT_THREADS", "4")
    four = io.dumps(run_sweep(SweepConfig(GRID, QUAD, **cfg)).to_dict())
    assert one == four


def test_checkpoint_resume(tmp_path):
    cfg = dict(checkpoint_dir=str(tmp_path), config_hash="abc")
    first = run_sweep(SweepConfig(GRID, QUAD, **cfg))
    assert len(list(tmp_path.iterdir())) == len(first.records)
    second = run_sweep(SweepConfig(GRID, QUAD, **cfg))
    assert io.dumps(first.to_dict()) == io.dumps(second.to_dict())


def test_boundary_sigma_two_sided():
    H = make_hamiltonian({"preset": "mech", "V": {"kind": "linear", "b": -1.0}}, DOM)
    for eta in (1.0, -1.0):
        rep = run_sweep(SweepConfig(GRID, H, r_rule=RRule("affine", eta), C_rule=CRule("c_of_lambda")))
        assert rep.sigma_hat == pytest.approx(1.0, abs=0.05)
        assert names(rep)["T6"]["pass"]


def test_fixed_c_level():
    rep = run_sweep(SweepConfig(GRID, QUAD, C_rule=CRule("fixed_c", c=0.5)))
    t4 = names(rep)["T4"]
    assert t4["pass"] and rep.h0_limit == pytest.approx(0.5, abs=2e-3)


@pytest.mark.parametrize("kwargs", [
    {"lambdas": [0.2, 0.1]},
    {"lambdas": [0.1, 0.2, 0.05]},
    {"r_rule": RRule("bogus")},
    {"C_rule": CRule("table", table=((0.2, 0.0),))},
    {"r_rule": RRule("table", table=((0.2, 0.0), (0.1, 0.0), (0.05, 100.0)))},
    {"r_rule": RRule("affine", 10.0)},
])
def test_config_rejections(kwargs):
    with pytest.raises(ConfigError):
        SweepConfig(GRID, QUAD, **kwargs)
