"""Desk-scale 2D run: the full sweep on the unit disk at h = 0.05 (a few minutes)."""

import math
import time

import numpy as np
import pytest

from hjselect.ergodic import clear_caches
from hjselect.geometry import StarDomain, build_grid
from hjselect.hamiltonians import make_hamiltonian
from hjselect.mather import holonomy_residual
from hjselect.sweep import SweepConfig, run_sweep

H_2D = 0.05


@pytest.fixture(scope="module")
def disk_sweep():
    dom = StarDomain.ball(1.0)
    g = build_grid(dom, H_2D)
    H = make_hamiltonian({"preset": "mech", "V": {"kind": "quadratic", "a": 1.0}}, dom)
    clear_caches()
    t = time.perf_counter()
    rep = run_sweep(SweepConfig(g, H))
    return rep, time.perf_counter() - t


def test_disk_sweep_runtime(disk_sweep):
    _, seconds = disk_sweep
    assert seconds < 600


def test_disk_sweep_checklist(disk_sweep):
    rep, _ = disk_sweep
    failed = [e["name"] for e in rep.checklist if not e["pass"]]
    assert not failed


def test_disk_limit_matches_radial_oracle(disk_sweep):
    rep, _ = disk_sweep
    r = np.linalg.norm(rep.grid.points, axis=1)
    assert np.max(np.abs(rep.u0 - r ** 2 / math.sqrt(2))) <= 5 * H_2D
    assert abs(rep.c_H) <= max(1e-3, 5 * H_2D)


def test_disk_mather_vertex(disk_sweep):
    rep, _ = disk_sweep
    assert rep.vertices
    for m in rep.vertices:
        assert holonomy_residual(m.measure) <= 1e-7
        assert m.measure.mass_near([0.0, 0.0], 2 * H_2D, [0.0, 0.0], 1e-9) > 0.99
