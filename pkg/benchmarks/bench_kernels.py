"""Compare the numba and pure-numpy paths of the Hamilton-Jacobi kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--json PATH]

For each case it times one Jacobi application of the update operator and a
full Gauss-Seidel solve on both paths, checks that the results agree, and
prints one line per case with the speedup.
"""

import argparse
import json
import time

import numpy as np

from hjselect import _kernels
from hjselect.geometry import StarDomain, build_grid
from hjselect.hamiltonians import make_hamiltonian
from hjselect.hjsolver import build_stencil, control_lattice, running_cost

CASES = [
    ("mech 1D h=0.01", 1, 0.01, "mech", 0.0),
    ("nonlin_u 1D h=0.01", 1, 0.01, "nonlin_u", 0.5),
    ("mech 2D h=0.1", 2, 0.1, "mech", 0.0),
]


def kernel_args(dim, h, preset, eps, lam=0.1, C=0.0):
    dom = StarDomain.interval(-1, 1) if dim == 1 else StarDomain.ball(1.0)
    g = build_grid(dom, h)
    spec = {"preset": preset, "V": {"kind": "quadratic", "a": 1.0}}
    if preset == "nonlin_u":
        spec["epsilon"] = eps
    H = make_hamiltonian(spec, dom)
    st = build_stencil(g, control_lattice(dim, H.v_bound))
    L0, kappa, e = running_cost(H, g, st.controls, 0.0)
    table = np.ascontiguousarray(np.where(st.feasible, L0, np.inf))
    return g, st, (st.nb, st.wt, st.wself, table, st.dt, C, kappa * lam, e, lam, -100.0, 100.0)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_case(name, dim, h, preset, eps, repeat):
    g, st, args = kernel_args(dim, h, preset, eps)
    u = np.random.default_rng(0).uniform(-1, 1, g.n)

    def jacobi(kernel):
        out, pol = np.empty(g.n), np.empty(g.n, dtype=np.int64)
        kernel(u, *args, out, pol)
        return out

    def gauss_seidel(kernel):
        v, hist = np.zeros(g.n), np.zeros(5000)
        kernel(st.orders, v, *args, 5000, 1e-10, hist)
        return v

    jacobi(_kernels._jacobi_nb)  # compile outside the timed region
    gauss_seidel(_kernels._solve_loop_nb)
    row = {"case": name, "nodes": g.n, "controls": len(st.controls.points)}
    for label, run, nb, npy in (("jacobi", jacobi, _kernels._jacobi_nb, _kernels._jacobi_np),
                                ("solve", gauss_seidel, _kernels._solve_loop_nb,
                                 _kernels._solve_loop_np)):
        t_nb, a = best_of(lambda: run(nb), repeat)
        t_np, b = best_of(lambda: run(npy), 1 if label == "solve" else repeat)
        row[label] = {"numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb,
                      "max_diff": float(np.max(np.abs(a - b)))}
    return row


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json", default=None, help="also write results to this file")
    args = p.parse_args(argv)
    rows = []
    for case in CASES:
        row = bench_case(*case, args.repeat)
        rows.append(row)
        for label in ("jacobi", "solve"):
            r = row[label]
            print(f"{row['case']:<20} {label:<7} numba {r['numba_s']:9.4f}s  numpy {r['numpy_s']:9.4f}s"
                  f"  x{r['speedup']:7.1f}  max diff {r['max_diff']:.1e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)
    return rows


if __name__ == "__main__":
    main()
