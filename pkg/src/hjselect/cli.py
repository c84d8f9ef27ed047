"""``hj-select`` command line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical gate failure,
4 internal error.  Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from . import errors as E
from . import io

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_INTERNAL = 0, 2, 3, 4

_CONFIG_ERRORS = (E.ConfigError, E.GridTooCoarse, E.ScaleExceedsAmbient, E.OutOfEvaluationBox)
_GATE_ERRORS = (E.NumericalGateError, E.IterationCapExceeded, E.NumericallySingularBasis,
                E.NoFeasibleControl, E.InfeasibleDiscretization, E.LegendreUnbounded,
                E.EmptyTrajectory)


class GateFailed(Exception):
    """A command finished but one of its reported gates did not pass."""


def _outdir(args, cfg):
    return args.output or cfg.output_dir


def _base(command, cfg):
    return {"command": command, "resolved_config": cfg.resolved, "version": __version__}


def _emit(args, cfg, name, payload):
    path = io.write_json(os.path.join(_outdir(args, cfg), name), payload)
    if not args.quiet:
        print(path)
    return path


# ------------------------------------------------------------ commands
def cmd_validate(args, cfg):
    from .geometry import check_separation
    from .hamiltonians import validate_assumptions
    rep = validate_assumptions(cfg.H, cfg.domain, cfg.section("validate")["n_samples"], cfg.seed)
    sep = check_separation(cfg.domain, [0.05, 0.1, 0.2], raise_on_fail=False)
    payload = _base("validate", cfg)
    payload["assumptions"] = rep.to_dict()
    payload["separation"] = {"theta": sep.theta, "min_ratio": sep.min_ratio, "passed": sep.passed}
    payload["passed"] = bool(rep.passed and sep.passed)
    _emit(args, cfg, "validate.json", payload)
    if not payload["passed"]:
        failed = [c.name for c in rep.checks if not c.passed] + ([] if sep.passed else ["separation"])
        raise GateFailed(f"assumption checks failed: {failed}")


def cmd_solve(args, cfg):
    from .hjsolver import solve
    s = cfg.section("solver")
    grid = cfg.grid
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fld = solve(grid, cfg.H, s["lambda"], s["C"], s["r"], K=s["K"], tol_fp=s["tol_fp"],
                    tol_res=s["tol_res"], max_sweeps=s["max_sweeps"])
    out = _outdir(args, cfg)
    io.write_field_csv(os.path.join(out, "field.csv"), grid, {"u": fld.values})
    if grid.dimension == 1:
        io.write_columns(os.path.join(out, "field.dat"), grid.points[:, 0], fld.values, "x u")
    payload = _base("solve", cfg)
    payload["field"] = {"metadata": fld.metadata(), "values": fld.values}
    payload["warnings"] = [str(w.message) for w in caught]
    _emit(args, cfg, "solve.json", payload)


def cmd_ergodic(args, cfg):
    from .ergodic import critical_value, h_of_c, lp_critical_value
    from .sweep import RRule
    e = cfg.section("ergodic")
    grid, H = cfg.grid, cfg.H
    cres = critical_value(grid, H, 0.0, 0.0, cross_check=e["cross_check"])
    rr = e["r_rule"]
    rule = RRule(rr["kind"], rr["eta"], tuple(tuple(p) for p in rr["table"]))
    rule.check()
    c_lam, h_lam = [], []
    for lam in e["lambdas"]:
        r = rule(lam)
        c = cres.value if r == 0 else lp_critical_value(grid, H, 0.0, r)
        c_lam.append({"lambda": lam, "r": r, "c": c})
        for C in e["c_values"]:
            h_lam.append({"lambda": lam, "r": r, "C": C, "h": h_of_c(grid, H, C, r)})
    payload = _base("ergodic", cfg)
    payload["ergodic"] = {
        "c_H": cres.value, "c_H_detail": cres.to_dict(), "c_lambda": c_lam, "h_lambda_C": h_lam,
        "h0": [{"c": C, "h": h_of_c(grid, H, C, 0.0)} for C in e["c_values"]]}
    _emit(args, cfg, "ergodic.json", payload)


def _vertex_dicts(vertices):
    return [{"I_u": m.I_u, "I_x": m.I_x, "value": m.value,
             "support": [[i, j, w] for i, j, w in m.measure.support()]} for m in vertices]


def cmd_mather(args, cfg):
    from .mather import default_velocity_grid, mather_extremes
    m = cfg.section("mather")
    grid = cfg.grid
    vg = default_velocity_grid(grid, cfg.H, cfg.section("solver")["K"])
    verts = mather_extremes(grid, vg, cfg.H, m["a"], m["r"], m["n_directions"], cfg.seed)
    out = _outdir(args, cfg)
    for k, v in enumerate(verts):
        io.write_measure_csv(os.path.join(out, f"mather_vertex_{k}.csv"), v.measure)
    payload = _base("mather", cfg)
    payload["mather"] = {"value": verts[0].value if verts else None,
                         "critical_value": -verts[0].value if verts else None,
                         "velocities": vg.points, "vertices": _vertex_dicts(verts),
                         "I_u_range": [min(v.I_u for v in verts), max(v.I_u for v in verts)],
                         "I_x_range": [min(v.I_x for v in verts), max(v.I_x for v in verts)]}
    _emit(args, cfg, "mather.json", payload)


def cmd_select(args, cfg):
    from .ergodic import h_of_c, lp_critical_value
    from .selection import membership_check, selection_problem, sup_selected
    s = cfg.section("selection")
    grid, H = cfg.grid, cfg.H
    if s["c"] is None:
        a, c = 0.0, lp_critical_value(grid, H, 0.0)
    else:
        c = s["c"]
        a = h_of_c(grid, H, c, 0.0)
    prob = selection_problem(grid, H, s["eta"], s["zeta"], a, c, K=cfg.section("solver")["K"],
                             n_directions=s["n_directions"], seed=cfg.seed)
    fld = sup_selected(prob, audit_nodes=s["audit_nodes"], seed=cfg.seed)
    mem = membership_check(fld, prob)
    out = _outdir(args, cfg)
    io.write_field_csv(os.path.join(out, "selected.csv"), grid, {"w": fld.values})
    if grid.dimension == 1:
        io.write_columns(os.path.join(out, "selected.dat"), grid.points[:, 0], fld.values, "x w")
    payload = _base("select", cfg)
    payload["selection"] = {"level": a, "c": c, "values": fld.values, "metadata": fld.metadata(),
                            "diagnostics": fld.info, "membership": mem.to_dict(),
                            "vertices": _vertex_dicts(prob.vertices)}
    _emit(args, cfg, "select.json", payload)
    if not mem.member:
        raise GateFailed("selected field fails its own membership check")


def _sweep_outputs(out, report):
    grid = report.grid
    lams = report.lambdas
    for k, rec in enumerate(report.records):
        io.write_field_csv(os.path.join(out, f"lambda_{k}.csv"), grid,
                           {"u_tilde": rec.values, "normalized": report.normalized(rec)})
        if grid.dimension == 1:
            io.write_columns(os.path.join(out, f"u_lambda_{k}.dat"), grid.points[:, 0],
                             rec.values, f"x u_tilde lambda={rec.lam!r}")
    io.write_field_csv(os.path.join(out, "u0.csv"), grid, {"u0": report.u0})
    if grid.dimension == 1:
        io.write_columns(os.path.join(out, "u0.dat"), grid.points[:, 0], report.u0, "x u0")
    for name in ("zeta", "sigma", "rho"):
        seq = report.ratio(name)
        keep = np.isfinite(seq)
        if keep.any():
            io.write_columns(os.path.join(out, f"ratio_{name}.dat"), lams[keep], seq[keep],
                             f"lambda {name}-ratio")


def cmd_sweep(args, cfg):
    from .sweep import config_hash, run_sweep
    out = _outdir(args, cfg)
    chash = config_hash(cfg.resolved)
    ckpt = os.path.join(out, "checkpoints") if cfg.section("sweep")["checkpoint"] else None
    report = run_sweep(cfg.sweep_config(ckpt, chash))
    _sweep_outputs(out, report)
    payload = _base("sweep", cfg)
    payload.update(report.to_dict())
    payload["config_hash"] = chash
    _emit(args, cfg, "report.json", payload)
    _print_checklist(args, report.checklist)
    failed = [e["name"] for e in report.checklist if not e["pass"]]
    if failed:
        raise GateFailed(f"checklist entries failed: {failed}")


def _print_checklist(args, checklist):
    if args.quiet:
        return
    for e in checklist:
        val = "-" if e["value"] is None else f"{e['value']:.3e}"
        tol = "-" if e["tol"] is None else f"{e['tol']:.3e}"
        print(f"{e['name']:<20} {'PASS' if e['pass'] else 'FAIL'}  value={val}  tol={tol}")


def cmd_verify(args):
    from .config import load_config
    from .sweep import SweepReport, verify_theorems
    data = io.read_json(args.report)
    if "resolved_config" not in data or data.get("command") != "sweep":
        raise E.ConfigError("verify needs a sweep report.json")
    cfg = load_config(data["resolved_config"])
    report = SweepReport.from_dict(data, cfg.grid, cfg.H)
    checklist = verify_theorems(report)
    _print_checklist(args, checklist)
    if args.output:
        payload = {"command": "verify", "report": os.path.abspath(args.report),
                   "checklist": checklist}
        io.write_json(os.path.join(args.output, "verify.json"), payload)
    failed = [e["name"] for e in checklist if not e["pass"]]
    if failed:
        raise GateFailed(f"checklist entries failed: {failed}")


def cmd_corpus(args):
    from .corpus import run_corpus
    results = run_corpus(quick=args.quick)
    width = max(len(r["id"]) for r in results)
    if not args.quiet:
        for r in results:
            print(f"{r['id']:<{width}}  {'PASS' if r['pass'] else 'FAIL'}  {r['detail']}")
        print(f"{sum(r['pass'] for r in results)}/{len(results)} passed")
    if args.output:
        io.write_json(os.path.join(args.output, "corpus.json"), {"command": "corpus",
                                                                 "quick": args.quick,
                                                                 "results": results})
    failed = [r["id"] for r in results if not r["pass"]]
    if failed:
        raise GateFailed(f"corpus entries failed: {failed}")


# ------------------------------------------------------------ entry point
def build_parser():
    p = argparse.ArgumentParser(prog="hj-select", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("validate", "check structural assumptions"),
                        ("solve", "solve one discounted problem"),
                        ("ergodic", "critical values and level maps"),
                        ("mather", "Mather measures and their integrals"),
                        ("select", "maximal selected subsolution"),
                        ("sweep", "vanishing-discount sweep with checklist")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("-c", "--config", required=True)
        sp.add_argument("-o", "--output", default=None, help="output directory")
        sp.add_argument("-q", "--quiet", action="store_true")
    sp = sub.add_parser("verify", help="re-check a sweep report")
    sp.add_argument("-r", "--report", required=True)
    sp.add_argument("-o", "--output", default=None)
    sp.add_argument("-q", "--quiet", action="store_true")
    sp = sub.add_parser("corpus", help="run the bundled oracle suite")
    sp.add_argument("--quick", action="store_true", help="1D mech/eik entries only")
    sp.add_argument("-o", "--output", default=None)
    sp.add_argument("-q", "--quiet", action="store_true")
    return p


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "ergodic": cmd_ergodic,
            "mather": cmd_mather, "select": cmd_select, "sweep": cmd_sweep}


def _fail(code, exc):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, E.SchemaError):
        err["pointer"] = exc.pointer
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "verify":
            cmd_verify(args)
        elif args.command == "corpus":
            cmd_corpus(args)
        else:
            from .config import load_config
            cfg = load_config(args.config)
            COMMANDS[args.command](args, cfg)
    except GateFailed as exc:
        return _fail(EXIT_GATE, exc)
    except _CONFIG_ERRORS as exc:
        return _fail(EXIT_CONFIG, exc)
    except _GATE_ERRORS as exc:
        return _fail(EXIT_GATE, exc)
    except Exception as exc:  # noqa: BLE001 - everything else is an internal error
        return _fail(EXIT_INTERNAL, exc)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
