"""Problem configuration: strict schema validation, defaults, object construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from .errors import ConfigError, SchemaError
from .geometry import StarDomain, build_grid
from .hamiltonians import make_hamiltonian
from .hjsolver import MAX_SWEEPS, TOL_FP, TOL_RES

DEFAULTS = {
    "seed": 0,
    "output_dir": "hjselect-out",
    "solver": {"lambda": 0.1, "C": 0.0, "r": 0.0, "tol_fp": TOL_FP, "tol_res": TOL_RES,
               "max_sweeps": MAX_SWEEPS, "K": None},
    "validate": {"n_samples": 1024},
    "ergodic": {"lambdas": [0.2, 0.1, 0.05, 0.025, 0.0125], "r_rule": {"kind": "zero"},
                "c_values": [], "cross_check": True},
    "mather": {"a": 0.0, "r": 0.0, "n_directions": 8},
    "selection": {"eta": 0.0, "zeta": 0.0, "c": None, "n_directions": 8, "audit_nodes": 5},
    "sweep": {"lambda0": 0.2, "q": 0.5, "n": 6, "r_rule": {"kind": "zero"},
              "C_rule": {"kind": "fixed_cH"}, "tol_id": None, "n_directions": 8,
              "checkpoint": False, "cross_check": True},
}
RULE_DEFAULTS = {"r_rule": {"eta": 0.0, "table": []},
                 "C_rule": {"zeta": 0.0, "c": 0.0, "table": []}}


def load_schema():
    text = resources.files("hjselect").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _pointer(path):
    return "/" + "/".join(str(p) for p in path) if path else "/"


def validate_config(raw):
    """Raise SchemaError (with a JSON pointer) for the first schema violation."""
    schema = load_schema()
    validator = jsonschema.Draft7Validator(schema)
    errors = sorted(validator.iter_errors(raw),
                    key=lambda e: (len(e.absolute_path), [str(p) for p in e.absolute_path], e.message))
    if not errors:
        return
    err = errors[0]
    path = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            raise SchemaError(f"unknown key {extra[0]!r}", _pointer(path + [extra[0]]))
    raise SchemaError(err.message, _pointer(path))


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve(raw):
    """Validated config with every default filled in."""
    validate_config(raw)
    cfg = _merge(DEFAULTS, raw)
    for section, key in (("ergodic", "r_rule"), ("sweep", "r_rule"), ("sweep", "C_rule")):
        cfg[section][key] = _merge(RULE_DEFAULTS[key], cfg[section][key])
    dom = cfg["domain"]
    domain = _domain(dom)
    cfg["domain"] = domain.to_dict()
    ham = dict(cfg["hamiltonian"])
    ham.setdefault("kappa", 1.0)
    ham.setdefault("V", {"kind": "zero"})
    ham.setdefault("u_cap", 100.0)
    ham.setdefault("margin", 0.5)
    if ham["preset"] == "nonlin_u":
        ham.setdefault("epsilon", 0.5)
    H = make_hamiltonian(ham, domain)
    ham["p_bound"], ham["v_bound"] = H.p_bound, H.v_bound
    ham["V"] = H.V.to_dict()
    cfg["hamiltonian"] = ham
    if "lambdas" not in raw.get("sweep", {}):
        s = cfg["sweep"]
        s["lambdas"] = [s["lambda0"] * s["q"] ** k for k in range(s["n"])]
    return cfg


def _domain(d):
    kind = d["kind"]
    extra = {k: d[k] for k in ("theta", "ambient_radius") if k in d}
    if kind == "interval":
        if not d["a"] < 0 < d["b"]:
            raise SchemaError("interval must contain the origin (a < 0 < b)", "/domain")
        return StarDomain.interval(d["a"], d["b"], **extra)
    if kind == "ball":
        return StarDomain.ball(d["radius"], d.get("dim", 2), **extra)
    if kind == "box":
        return StarDomain.box(d["half_widths"], **extra)
    return StarDomain.radial(d["radii"], d["theta"], d.get("ambient_radius"))


@dataclass(eq=False)
class ProblemConfig:
    resolved: dict
    domain: object = field(init=False)
    H: object = field(init=False)
    _grid: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.domain = StarDomain.from_dict(self.resolved["domain"])
        self.H = make_hamiltonian(self.resolved["hamiltonian"], self.domain)

    @property
    def grid(self):
        if self._grid is None:
            self._grid = build_grid(self.domain, self.resolved["h"])
        return self._grid

    @property
    def h(self):
        return self.resolved["h"]

    @property
    def seed(self):
        return self.resolved["seed"]

    @property
    def output_dir(self):
        return self.resolved["output_dir"]

    def section(self, name):
        return self.resolved[name]

    def sweep_config(self, checkpoint_dir=None, config_hash=""):
        from .sweep import CRule, RRule, SweepConfig
        s = self.resolved["sweep"]
        rr, cr = s["r_rule"], s["C_rule"]
        return SweepConfig(
            self.grid, self.H, list(s["lambdas"]),
            RRule(rr["kind"], rr["eta"], tuple(tuple(p) for p in rr["table"])),
            CRule(cr["kind"], cr["zeta"], cr["c"], tuple(tuple(p) for p in cr["table"])),
            s["n_directions"], self.seed, s["tol_id"], checkpoint_dir, config_hash,
            s["cross_check"])


def load_config(source):
    """ProblemConfig from a path or an already-parsed dict."""
    if isinstance(source, dict):
        raw = source
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}", "/") from exc
    if not isinstance(raw, dict):
        raise SchemaError("config must be a JSON object", "/")
    return ProblemConfig(resolve(raw))
