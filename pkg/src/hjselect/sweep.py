"""Vanishing-discount sweeps: solve across a lambda schedule, extrapolate limits,
estimate the scalar limits and check the selection identities."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._accel import worker_count
from .errors import ConfigError, NumericalGateError, ScheduleTooShort
from .ergodic import clear_caches, critical_value, h_of_c, lagrange_at_zero, lp_critical_value
from .hjsolver import solve
from .mather import default_velocity_grid, mather_extremes, node_weights
from .measures import DiscreteMeasure
from .selection import SelectionProblem, sup_selected

SLOPE_DELTA = 0.02      # one-sided step for h0 slopes at c(H)


def geometric_schedule(lam0=0.2, q=0.5, n=6):
    return [lam0 * q ** k for k in range(n)]


@dataclass(frozen=True)
class RRule:
    """r(lambda): 'zero', 'affine' (r = eta lambda) or 'table' ({lambda: r})."""

    kind: str = "zero"
    eta: float = 0.0
    table: tuple = ()

    def __call__(self, lam):
        if self.kind == "zero":
            return 0.0
        if self.kind == "affine":
            return self.eta * lam
        return _lookup(self.table, lam, "r_rule")

    @property
    def limit_ratio(self):
        """lim r/lambda (eta)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "affine":
            return self.eta
        lams, rs = zip(*sorted(self.table, reverse=True))
        ratios = np.array(rs[-3:]) / np.array(lams[-3:])
        return lagrange_at_zero(lams[-3:], ratios)

    def check(self):
        if self.kind not in ("zero", "affine", "table"):
            raise ConfigError(f"unknown r_rule kind {self.kind!r}")
        if self.kind == "table":
            pairs = sorted(self.table, reverse=True)
            if len(pairs) < 3:
                raise ConfigError("r_rule table needs at least three entries")
            ratios = [abs(r / lam) for lam, r in pairs[-3:]]
            if max(ratios) > 1e3:
                raise ConfigError("r_rule table has |r/lambda| > 1e3; divergent regimes are not supported")

    def to_dict(self):
        return {"kind": self.kind, "eta": self.eta, "table": [list(p) for p in self.table]}


@dataclass(frozen=True)
class CRule:
    """C_lambda: 'fixed_cH', 'c_of_lambda', 'affine' (c(H) + zeta lambda), 'fixed_c' or 'table'."""

    kind: str = "fixed_cH"
    zeta: float = 0.0
    c: float = 0.0
    table: tuple = ()

    def value(self, lam, c_H, c_lam):
        if self.kind == "fixed_cH":
            return c_H
        if self.kind == "c_of_lambda":
            return c_lam
        if self.kind == "affine":
            return c_H + self.zeta * lam
        if self.kind == "fixed_c":
            return self.c
        return _lookup(self.table, lam, "C_rule")

    def limit(self, c_H):
        if self.kind == "fixed_c":
            return self.c
        if self.kind == "table":
            lams, cs = zip(*sorted(self.table, reverse=True))
            return lagrange_at_zero(lams[-3:], cs[-3:])
        return c_H

    def check(self):
        if self.kind not in ("fixed_cH", "c_of_lambda", "affine", "fixed_c", "table"):
            raise ConfigError(f"unknown C_rule kind {self.kind!r}")
        if self.kind == "table" and len(self.table) < 3:
            raise ConfigError("C_rule table needs at least three entries")

    def to_dict(self):
        return {"kind": self.kind, "zeta": self.zeta, "c": self.c,
                "table": [list(p) for p in self.table]}


def _lookup(table, lam, name):
    for key, val in table:
        if abs(key - lam) <= 1e-12 * max(1.0, abs(lam)):
            return float(val)
    raise ConfigError(f"{name} table has no entry for lambda = {lam}")


@dataclass(eq=False)
class SweepConfig:
    grid: object
    H: object
    lambdas: list = field(default_factory=geometric_schedule)
    r_rule: RRule = field(default_factory=RRule)
    C_rule: CRule = field(default_factory=CRule)
    n_directions: int = 8
    seed: int = 0
    tol_id: float | None = None
    checkpoint_dir: str | None = None
    config_hash: str = ""
    cross_check: bool = True

    def __post_init__(self):
        lams = [float(v) for v in self.lambdas]
        if len(lams) < 3:
            raise ConfigError("lambda schedule needs at least three values")
        if any(v <= 0 for v in lams) or any(a <= b for a, b in zip(lams, lams[1:])):
            raise ConfigError("lambda schedule must be positive and strictly decreasing")
        self.lambdas = lams
        self.r_rule.check()
        self.C_rule.check()
        dom = self.grid.domain
        r_max = max(self.r_rule(v) for v in lams)
        if (1 + r_max) * dom.max_radius > dom.ambient_radius * (1 + 1e-12):
            raise ConfigError("(1 + max r) * domain leaves the ambient ball")
        if self.tol_id is None:
            self.tol_id = max(0.05, 10 * self.grid.spacing)


@dataclass(eq=False)
class LambdaRecord:
    lam: float
    r: float
    C: float
    c_lambda: float
    h_lambda: float
    values: np.ndarray      # rectified field on the base grid
    residual: float
    sweeps: int
    M: float

    def to_dict(self):
        return {"lambda": self.lam, "r": self.r, "C": self.C, "c_lambda": self.c_lambda,
                "h_lambda": self.h_lambda, "residual": self.residual, "sweeps": self.sweeps,
                "M": self.M, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["lambda"], d["r"], d["C"], d["c_lambda"], d["h_lambda"],
                   np.asarray(d["values"], float), d["residual"], d["sweeps"], d["M"])


@dataclass(eq=False)
class SweepReport:
    grid: object
    H: object
    config: SweepConfig
    c_H: float
    c_H_detail: dict
    records: list
    dropped: list
    c_limit: float
    h0_limit: float
    u0: np.ndarray            # extrapolated normalized limit
    zeta_hat: float
    sigma_hat: float | None
    rho_hat: float
    x_ref: int
    spread: float
    vertices: list            # MatherVertex at level h0_limit
    selected: np.ndarray | None = None
    selected_info: dict = field(default_factory=dict)
    h0_slopes: tuple = (float("nan"), float("nan"))
    checklist: list = field(default_factory=list)

    # ------------------------------------------------------------ derived sequences
    @property
    def lambdas(self):
        return np.array([rec.lam for rec in self.records])

    def ratio(self, name):
        """Per-lambda ratio sequence: 'zeta', 'sigma' or 'rho'."""
        out = []
        for rec in self.records:
            if name == "zeta":
                out.append((rec.C - self.c_limit) / rec.lam)
            elif name == "sigma":
                out.append((rec.c_lambda - self.c_H) / rec.r if rec.r != 0 else np.nan)
            elif name == "rho":
                out.append((rec.h_lambda - self.h0_limit) / rec.lam)
        return np.array(out)

    def normalized(self, rec):
        """u_lambda - h0(c)/lambda on the rectified grid."""
        return rec.values - self.h0_limit / (rec.lam * (1 + rec.r))

    def lam_u(self, rec):
        return rec.lam * (1 + rec.r) * rec.values

    @property
    def residual_max(self):
        return max(rec.residual for rec in self.records)

    def to_dict(self):
        cfg = self.config
        ergodic = {"c_H": self.c_H,
                   "c_lambda": [[rec.lam, rec.c_lambda] for rec in self.records],
                   "h_lambda_C": [[rec.lam, rec.h_lambda] for rec in self.records]}
        verts = []
        for m in self.vertices:
            verts.append({"I_u": m.I_u, "I_x": m.I_x, "value": m.value,
                          "support": [[i, j, w] for i, j, w in m.measure.support()]})
        vel = self.vertices[0].measure.velocities.tolist() if self.vertices else []
        return {
            "sweep": {"lambdas": cfg.lambdas, "r_rule": cfg.r_rule.to_dict(),
                      "C_rule": cfg.C_rule.to_dict(), "tol_id": cfg.tol_id,
                      "n_directions": cfg.n_directions, "seed": cfg.seed},
            "ergodic": ergodic,
            "c_H_detail": self.c_H_detail,
            "records": [rec.to_dict() for rec in self.records],
            "dropped": self.dropped,
            "ratios": {k: self.ratio(k).tolist() for k in ("zeta", "sigma", "rho")},
            "estimates": {"zeta_hat": self.zeta_hat, "sigma_hat": self.sigma_hat,
                          "rho_hat": self.rho_hat, "c_limit": self.c_limit,
                          "h0_limit": self.h0_limit, "x_ref": self.grid.points[self.x_ref].tolist(),
                          "spread": self.spread, "h0_slopes": list(self.h0_slopes)},
            "u0": self.u0.tolist(),
            "mather": {"velocities": vel, "vertices": verts},
            "selected": None if self.selected is None else self.selected.tolist(),
            "selected_info": self.selected_info,
            "checklist": self.checklist,
        }

    @classmethod
    def from_dict(cls, d, grid, H):
        from .mather import MatherVertex
        s = d["sweep"]
        cfg = SweepConfig(grid, H, s["lambdas"],
                          RRule(s["r_rule"]["kind"], s["r_rule"]["eta"],
                                tuple(tuple(p) for p in s["r_rule"]["table"])),
                          CRule(s["C_rule"]["kind"], s["C_rule"]["zeta"], s["C_rule"]["c"],
                                tuple(tuple(p) for p in s["C_rule"]["table"])),
                          s["n_directions"], s["seed"], s["tol_id"])
        vel = np.asarray(d["mather"]["velocities"], float)
        verts = []
        for v in d["mather"]["vertices"]:
            w = np.zeros((grid.n, len(vel)))
            for i, j, wt in v["support"]:
                w[int(i), int(j)] = wt
            verts.append(MatherVertex(DiscreteMeasure(grid, vel, w), v["I_u"], v["I_x"], v["value"]))
        e = d["estimates"]
        x_ref = int(grid.nearest_node(np.asarray(e["x_ref"], float).reshape(1, -1))[0])
        return cls(grid, H, cfg, d["ergodic"]["c_H"], d["c_H_detail"],
                   [LambdaRecord.from_dict(r) for r in d["records"]], d["dropped"],
                   e["c_limit"], e["h0_limit"], np.asarray(d["u0"], float),
                   e["zeta_hat"], e["sigma_hat"], e["rho_hat"], x_ref, e["spread"], verts,
                   None if d["selected"] is None else np.asarray(d["selected"], float),
                   d["selected_info"], tuple(e["h0_slopes"]), d["checklist"])


# ------------------------------------------------------------ checkpoints
def _checkpoint_path(config, lam):
    return os.path.join(config.checkpoint_dir, f"{config.config_hash}_lam{lam:.10e}.json")


def _load_checkpoint(config, lam):
    if not config.checkpoint_dir or not config.config_hash:
        return None
    path = _checkpoint_path(config, lam)
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return LambdaRecord.from_dict(json.load(fh))


def _save_checkpoint(config, rec):
    if not config.checkpoint_dir or not config.config_hash:
        return
    from .io import atomic_write_text
    os.makedirs(config.checkpoint_dir, exist_ok=True)
    atomic_write_text(_checkpoint_path(config, rec.lam), json.dumps(rec.to_dict(), sort_keys=True))


def config_hash(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


# ------------------------------------------------------------ sweep
def _solve_one(config, lam, r, C):
    return solve(config.grid, config.H, lam, C, r)


def run_sweep(config):
    """Solve the rectified equation along the schedule and assemble a SweepReport."""
    grid, H = config.grid, config.H
    clear_caches()
    cres = critical_value(grid, H, 0.0, 0.0, cross_check=config.cross_check)
    c_H = cres.value
    rr, cr = config.r_rule, config.C_rule

    # scalar data first, sequentially, so LP warm starts follow a fixed order
    plan = []
    for lam in config.lambdas:
        rec = _load_checkpoint(config, lam)
        if rec is not None:
            plan.append((lam, rec))
            continue
        r = rr(lam)
        c_lam = c_H if r == 0 else lp_critical_value(grid, H, 0.0, r)
        C = cr.value(lam, c_H, c_lam)
        plan.append((lam, (r, c_lam, C)))

    # field solves in parallel; each owns its output
    todo = [(lam, p) for lam, p in plan if not isinstance(p, LambdaRecord)]
    results = {}
    with ThreadPoolExecutor(max_workers=worker_count()) as ex:
        futs = {lam: ex.submit(_solve_one, config, lam, p[0], p[2]) for lam, p in todo}
        for lam, fut in futs.items():
            try:
                results[lam] = fut.result()
            except NumericalGateError as exc:
                results[lam] = exc

    records, dropped = [], []
    for lam, p in plan:
        if isinstance(p, LambdaRecord):
            records.append(p)
            continue
        r, c_lam, C = p
        fld = results[lam]
        if isinstance(fld, Exception):
            dropped.append({"lambda": lam, "error": type(fld).__name__, "message": str(fld)})
            continue
        try:
            h_lam = h_of_c(grid, H, C, r)
        except NumericalGateError as exc:
            dropped.append({"lambda": lam, "error": type(exc).__name__, "message": str(exc)})
            continue
        rec = LambdaRecord(lam, r, C, c_lam, h_lam, fld.values.copy(), fld.residual,
                           fld.sweeps, fld.M)
        _save_checkpoint(config, rec)
        records.append(rec)
    if len(records) < 3:
        raise ScheduleTooShort(f"only {len(records)} lambda values passed the gates; need 3")

    c_lim = cr.limit(c_H)
    h0_lim = 0.0 if c_lim == c_H else h_of_c(grid, H, c_lim, 0.0)
    x_ref = int(grid.nearest_node(np.zeros((1, grid.dimension)))[0])
    report = SweepReport(grid, H, config, c_H, cres.to_dict(), records, dropped, c_lim, h0_lim,
                         None, 0.0, None, 0.0, x_ref, 0.0, [])
    last = records[-3:]
    lams = [rec.lam for rec in last]
    report.u0 = np.array([lagrange_at_zero(lams, col)
                          for col in np.stack([report.normalized(rec) for rec in last], axis=1)])
    report.zeta_hat = lagrange_at_zero(lams, report.ratio("zeta")[-3:])
    report.rho_hat = lagrange_at_zero(lams, report.ratio("rho")[-3:])
    if all(rec.r != 0 for rec in last):
        report.sigma_hat = lagrange_at_zero(lams, report.ratio("sigma")[-3:])
    lu = report.lam_u(records[-1])
    report.spread = float(lu.max() - lu.min())

    vg = default_velocity_grid(grid, H)
    report.vertices = mather_extremes(grid, vg, H, h0_lim, 0.0, config.n_directions, config.seed)
    report.h0_slopes = h0_one_sided_slopes(grid, H, c_H)
    prob = SelectionProblem(grid, H, h0_lim, c_lim, rr.limit_ratio, report.zeta_hat,
                            report.vertices, records[-1].M)
    sel = sup_selected(prob, seed=config.seed)
    report.selected = sel.values
    report.selected_info = sel.info
    report.checklist = verify_theorems(report)
    return report


def h0_one_sided_slopes(grid, H, c_H, delta=SLOPE_DELTA):
    """(left, right) difference quotients of h0 at c(H)."""
    right = h_of_c(grid, H, c_H + delta, 0.0) / delta
    left = -h_of_c(grid, H, c_H - delta, 0.0) / delta
    return (float(left), float(right))


# ------------------------------------------------------------ checks
def _entry(name, value, tol, passed, **extra):
    out = {"name": name, "value": None if value is None else float(value),
           "tol": None if tol is None else float(tol), "pass": bool(passed)}
    out.update(extra)
    return out


def _stabilized(seq, tol):
    seq = np.asarray(seq[-3:], float)
    return bool(np.all(np.isfinite(seq)) and np.max(np.abs(np.diff(seq))) <= tol)


def converse_zeta(report, field=None):
    """max over vertices of -sum u0 omega^m - eta I_x^m."""
    u = report.u0 if field is None else field
    eta = report.config.r_rule.limit_ratio
    vals = [-float(node_weights(m.measure, report.H, report.h0_limit) @ u) - eta * m.I_x
            for m in report.vertices]
    return max(vals)


def characterization_zeta(report):
    """max over vertices of -rho I_u^m - eta I_x^m."""
    eta = report.config.r_rule.limit_ratio
    return max(-report.rho_hat * m.I_u - eta * m.I_x for m in report.vertices)


def verify_theorems(report, selected=None, vertices=None):
    """Checklist of the selection identities; failures are entries, never exceptions."""
    if vertices is not None:
        report.vertices = vertices
    if selected is not None:
        report.selected = np.asarray(getattr(selected, "values", selected), float)
    cfg = report.config
    h = report.grid.spacing
    lam_min = report.records[-1].lam
    tol_sel = max(5 * h, 3 * report.residual_max / lam_min)
    tol_id = cfg.tol_id
    eta = cfg.r_rule.limit_ratio
    out = []

    if report.selected is not None:
        gap = float(np.max(np.abs(report.u0 - report.selected)))
        out.append(_entry("T1", gap, tol_sel, gap <= tol_sel,
                          statement="extrapolated limit equals the maximal selected subsolution"))

    z2 = characterization_zeta(report)
    out.append(_entry("T2", abs(report.zeta_hat - z2), tol_id, abs(report.zeta_hat - z2) <= tol_id,
                      zeta_hat=report.zeta_hat, rhs=z2, statement="zeta = max(-rho I_u - eta I_x)"))

    z3 = converse_zeta(report)
    out.append(_entry("T3", abs(report.zeta_hat - z3), tol_id, abs(report.zeta_hat - z3) <= tol_id,
                      zeta_hat=report.zeta_hat, rhs=z3,
                      statement="zeta = max(-int u0 du_L - eta I_x)"))

    if cfg.C_rule.kind == "fixed_c" and abs(report.c_limit - report.c_H) > 1e-12:
        errs = [abs(report.lam_u(rec)[report.x_ref] - report.h0_limit) for rec in report.records]
        tol4 = max(0.01, 2 * h)
        decreasing = all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
        out.append(_entry("T4", errs[-1], tol4, decreasing and errs[-1] <= tol4,
                          errors=errs, h0=report.h0_limit,
                          statement="lambda u_lambda tends to h0(c)"))

    inv = [1.0 / (-m.I_u) for m in report.vertices]
    left, right = report.h0_slopes
    tol5 = 2e-3
    d5 = max(abs(right - min(inv)), abs(left - max(inv)))
    out.append(_entry("T5", d5, tol5, d5 <= tol5, left=left, right=right,
                      min_inv=min(inv), max_inv=max(inv),
                      statement="one-sided h0 slopes are the extreme (-I_u)^-1"))

    if report.sigma_hat is not None:
        r_sign = np.sign(report.records[-1].r)
        I_x = [m.I_x for m in report.vertices]
        target = -min(I_x) if r_sign > 0 else -max(I_x)
        d6 = abs(report.sigma_hat - target)
        out.append(_entry("T6", d6, tol_id, d6 <= tol_id, sigma_hat=report.sigma_hat,
                          target=target, side="r>0" if r_sign > 0 else "r<0",
                          statement="one-sided scaling derivative of c is -extreme I_x"))

    lams = report.lambdas
    zs, rs = report.ratio("zeta"), report.ratio("rho")
    sz, sr = _stabilized(zs, tol_id), _stabilized(rs, tol_id)
    out.append(_entry("zeta_rho_stabilize", None, tol_id, sz == sr,
                      zeta_stable=sz, rho_stable=sr,
                      zeta_slopes=(np.diff(zs[-3:]) / np.diff(lams[-3:])).tolist(),
                      rho_slopes=(np.diff(rs[-3:]) / np.diff(lams[-3:])).tolist(),
                      statement="zeta ratio stabilizes iff rho ratio does"))

    norms = [float(np.max(np.abs(report.normalized(rec)))) for rec in report.records]
    out.append(_entry("bounded", max(norms), None, bool(np.all(np.isfinite(norms))),
                      norms=norms, statement="rectified fields stay bounded"))

    fields = [report.normalized(rec) for rec in report.records]
    gaps = [float(np.max(np.abs(b - a))) for a, b in zip(fields, fields[1:])]
    tail = gaps[-3:]
    ratios = [a / b if b > 0 else np.inf for a, b in zip(tail, tail[1:])]
    near_zero = max(tail) <= 1e-9
    out.append(_entry("cauchy", min(ratios) if ratios else None, 1.5,
                      near_zero or all(q >= 1.5 for q in ratios), gaps=gaps,
                      statement="successive field gaps shrink geometrically"))
    return out
