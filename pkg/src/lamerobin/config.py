"""Run configuration: a JSON key-value tree validated wholesale before any compute.

Every field has a default except the geometry kind and its size parameters.
All violations are collected and raised together as one :class:`ConfigError`
whose ``violations`` are ``(path, message)`` pairs.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .boundary_geom import CURVE_KINDS, CurveSpec, discretize
from .elastic_core import ElasticConfig
from .errors import ConfigError, GeometryError
from .lattice_greens import ACCELERATIONS, GreensEvaluator
from .robin_expansion import RobinFamily

DEFAULTS = {
    "elastic": {"omega": 1.0, "q_diag": [1.0, 1.0], "B": [[0.0, 0.0], [0.0, 0.0]]},
    "geometry": {"center": [0.5, 0.5], "N": 128},
    "greens": {"acceleration": "ewald_split", "truncation": 64, "ewald_xi": None,
               "tol": 1e-15, "exclusion_radius": None},
    "family": {"l": 1, "k0": 1.0, "coeffs": [{"matrix": [[-1.0, 0.0], [0.0, -1.0]]}]},
    "load": {"constant": [0.0, 0.0]},
    "run": {"k": 0.1, "order": 8, "sweep": {"radius_factors": [0.1, 0.05, 0.025]},
            "eval_points": None, "eval_grid": {"n": [4, 4]}, "eval_mode": "both",
            "eval_standoff": None, "greens_grid": {"n": [8, 8]}, "output": "out", "seed": 0},
}
EVAL_MODES = ("direct", "series", "both")


def trig_profile(spec):
    """Callable ``t -> a0 + sum_m a_m cos(mt) + b_m sin(mt)`` from ``{const, cos, sin}``."""
    a0 = float(spec.get("const", 0.0))
    cos = [float(v) for v in spec.get("cos", [])]
    sin = [float(v) for v in spec.get("sin", [])]

    def f(t):
        out = np.full_like(t, a0, dtype=float)
        for m, am in enumerate(cos, start=1):
            out += am * np.cos(m * t)
        for m, bm in enumerate(sin, start=1):
            out += bm * np.sin(m * t)
        return out

    return f


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated run configuration with the built numerical objects."""

    document: dict
    cfg: ElasticConfig
    curve: CurveSpec
    N: int
    greens: dict
    family: RobinFamily
    load_spec: dict
    run: dict

    def evaluator(self) -> GreensEvaluator:
        return GreensEvaluator(self.cfg, **self.greens)

    def load(self, disc):
        if "constant" in self.load_spec:
            return np.broadcast_to(np.asarray(self.load_spec["constant"], float), (disc.N, 2)).copy()
        return np.stack([trig_profile(self.load_spec[key])(disc.t) for key in ("g1", "g2")], axis=-1)

    @property
    def config_hash(self) -> str:
        return config_hash(self.document)


def config_hash(document) -> str:
    canon = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


_REPLACE = ("sweep", "load")  # subtrees that replace their default wholesale


def _merge(defaults, doc):
    out = copy.deepcopy(defaults)
    for key, val in doc.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key not in _REPLACE:
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


class _Collector:
    def __init__(self):
        self.violations = []

    def add(self, path, msg):
        self.violations.append((path, msg))

    def real(self, tree, path, key, positive=False, optional=False):
        val = tree.get(key)
        where = f"{path}.{key}"
        if val is None and optional:
            return None
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val):
            self.add(where, "must be a finite number")
            return None
        if positive and not val > 0:
            self.add(where, "must be positive")
            return None
        return float(val)

    def integer(self, tree, path, key, minimum=None):
        val = tree.get(key)
        where = f"{path}.{key}"
        if isinstance(val, bool) or not isinstance(val, int):
            self.add(where, "must be an integer")
            return None
        if minimum is not None and val < minimum:
            self.add(where, f"must be >= {minimum}")
            return None
        return val

    def matrix(self, val, where, shape):
        try:
            arr = np.array(val, dtype=float)
        except (TypeError, ValueError):
            self.add(where, f"must be a numeric array of shape {shape}")
            return None
        if arr.shape != shape or not np.all(np.isfinite(arr)):
            self.add(where, f"must be a finite numeric array of shape {shape}")
            return None
        return arr

    def profile(self, spec, where):
        if not isinstance(spec, dict):
            self.add(where, "must be a {const, cos, sin} trigonometric polynomial")
            return False
        extra = set(spec) - {"const", "cos", "sin"}
        if extra:
            self.add(where, f"unknown keys {sorted(extra)}")
        ok = True
        if "const" in spec and (isinstance(spec["const"], bool)
                                or not isinstance(spec["const"], (int, float))):
            self.add(f"{where}.const", "must be a number")
            ok = False
        for key in ("cos", "sin"):
            vals = spec.get(key, [])
            if not isinstance(vals, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                self.add(f"{where}.{key}", "must be a list of numbers")
                ok = False
        return ok


def _check_unknown(col, tree, path, allowed):
    for key in tree:
        if key not in allowed:
            col.add(f"{path}.{key}" if path else key, "unknown key")


def parse_config(document) -> RunConfig:
    """Validate a configuration tree and build the numerical objects.

    ``document`` is a dict (already parsed JSON). Missing fields take the values
    in :data:`DEFAULTS`. Raises :class:`ConfigError` listing every violation.
    """
    col = _Collector()
    if not isinstance(document, dict):
        raise ConfigError([("", "configuration must be a key-value object")])
    _check_unknown(col, document, "", DEFAULTS)
    for key in DEFAULTS:
        if key in document and not isinstance(document[key], dict):
            col.add(key, "must be an object")
    if col.violations:
        raise ConfigError(col.violations)
    doc = _merge(DEFAULTS, document)

    # elastic
    el = doc["elastic"]
    _check_unknown(col, el, "elastic", DEFAULTS["elastic"])
    omega = col.real(el, "elastic", "omega")
    q = col.matrix(el["q_diag"], "elastic.q_diag", (2,))
    if q is not None and np.any(q <= 0):
        col.add("elastic.q_diag", "entries must be positive")
        q = None
    B = col.matrix(el["B"], "elastic.B", (2, 2))
    if omega is not None and not omega > 1.0 - 2.0 / 2:
        col.add("elastic.omega", f"must satisfy omega > 1 - 2/n = 0 for n = 2, got {omega:g}")
        omega = None
    cfg = None
    if omega is not None and q is not None and B is not None:
        cfg = ElasticConfig(omega, q, B)

    # geometry
    geo = doc["geometry"]
    _check_unknown(col, geo, "geometry", {"kind", "center", "params", "N"})
    N = col.integer(geo, "geometry", "N", minimum=16)
    if N is not None and N % 2:
        col.add("geometry.N", "must be even")
        N = None
    kind = geo.get("kind")
    curve = None
    if kind not in CURVE_KINDS:
        col.add("geometry.kind", f"must be one of {list(CURVE_KINDS)}")
    else:
        center = col.matrix(geo["center"], "geometry.center", (2,))
        params = geo.get("params", {})
        if not isinstance(params, dict):
            col.add("geometry.params", "must be an object")
        elif center is not None:
            try:
                curve = CurveSpec(kind, tuple(center), params)
                if cfg is not None:
                    discretize(curve, 64, cell=cfg.q_diag)
            except GeometryError as exc:
                col.add("geometry", str(exc))
                curve = None
            except (TypeError, ValueError) as exc:
                col.add("geometry.params", str(exc))
                curve = None

    # greens
    gr = doc["greens"]
    _check_unknown(col, gr, "greens", DEFAULTS["greens"])
    greens = {}
    if gr["acceleration"] not in ACCELERATIONS:
        col.add("greens.acceleration", f"must be one of {list(ACCELERATIONS)}")
    else:
        greens["acceleration"] = gr["acceleration"]
    trunc = col.integer(gr, "greens", "truncation", minimum=1)
    if trunc is not None:
        greens["truncation"] = trunc
    for key in ("ewald_xi", "exclusion_radius"):
        val = col.real(gr, "greens", key, positive=True, optional=True)
        if val is not None:
            greens[key] = val
    tol = col.real(gr, "greens", "tol", positive=True)
    if tol is not None:
        if not 1e-16 <= tol < 1:
            col.add("greens.tol", "must lie in [1e-16, 1)")
        else:
            greens["tol"] = tol

    # family
    fam = doc["family"]
    _check_unknown(col, fam, "family", {"l", "k0", "coeffs"})
    l = col.integer(fam, "family", "l", minimum=1)
    k0 = col.real(fam, "family", "k0", positive=True)
    coeffs = []
    if not isinstance(fam["coeffs"], list) or not fam["coeffs"]:
        col.add("family.coeffs", "must be a non-empty list of coefficient specs")
    else:
        for j, spec in enumerate(fam["coeffs"]):
            where = f"family.coeffs[{j}]"
            if not isinstance(spec, dict):
                col.add(where, "must be an object with 'matrix' and optional 'profile'")
                continue
            _check_unknown(col, spec, where, {"matrix", "profile"})
            M = col.matrix(spec.get("matrix"), f"{where}.matrix", (2, 2))
            prof = spec.get("profile")
            if prof is not None and not col.profile(prof, f"{where}.profile"):
                continue
            if M is None:
                continue
            if prof is None:
                coeffs.append(M)
            else:
                coeffs.append(_profiled(trig_profile(prof), M))
    family = None
    if l is not None and k0 is not None and coeffs and len(coeffs) == len(fam["coeffs"]):
        family = RobinFamily(l, tuple(coeffs), k0)

    # load
    load = doc["load"]
    if "constant" in load:
        _check_unknown(col, load, "load", {"constant"})
        col.matrix(load["constant"], "load.constant", (2,))
    else:
        _check_unknown(col, load, "load", {"g1", "g2"})
        for key in ("g1", "g2"):
            if key not in load:
                col.add(f"load.{key}", "missing trigonometric polynomial")
            else:
                col.profile(load[key], f"load.{key}")

    # run
    run = doc["run"]
    _check_unknown(col, run, "run", DEFAULTS["run"])
    k = col.real(run, "run", "k", positive=True)
    if k is not None and k0 is not None and not k < k0:
        col.add("run.k", f"must be < k0 = {k0:g}")
    col.integer(run, "run", "order", minimum=0)
    col.integer(run, "run", "seed", minimum=0)
    if not isinstance(run["output"], str) or not run["output"]:
        col.add("run.output", "must be a non-empty path string")
    sweep = run["sweep"]
    if not isinstance(sweep, dict) or len(sweep) != 1 or not set(sweep) <= {"k", "radius_factors"}:
        col.add("run.sweep", "must be {'k': [...]} or {'radius_factors': [...]}")
    else:
        (skey, svals), = sweep.items()
        if not isinstance(svals, list) or not svals or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in svals):
            col.add(f"run.sweep.{skey}", "must be a non-empty list of positive numbers")
        elif skey == "k" and k0 is not None:
            for i, v in enumerate(svals):
                if not v < k0:
                    col.add(f"run.sweep.k[{i}]", f"k = {v:g} must be < k0 = {k0:g}")
    if run["eval_mode"] not in EVAL_MODES:
        col.add("run.eval_mode", f"must be one of {list(EVAL_MODES)}")
    if run["eval_points"] is not None:
        pts = np.array(run["eval_points"], dtype=object)
        if pts.ndim != 2 or pts.shape[1] != 2:
            col.add("run.eval_points", "must be a list of [x1, x2] pairs")
    for key in ("eval_grid", "greens_grid"):
        grid = run[key]
        n = grid.get("n") if isinstance(grid, dict) else None
        if not (isinstance(n, list) and len(n) == 2
                and all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in n)):
            col.add(f"run.{key}.n", "must be a pair of positive integers")
    col.real(run, "run", "eval_standoff", positive=True, optional=True)

    if col.violations:
        raise ConfigError(col.violations)
    return RunConfig(doc, cfg, curve, N, greens, family, load, run)


def _profiled(f, M):
    def sample(disc):
        return f(disc.t)[:, None, None] * M

    return sample


def load_config(path) -> RunConfig:
    """Read a JSON file and validate it."""
    with open(path) as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([("", f"not valid JSON: {exc}")]) from exc
    return parse_config(document)
