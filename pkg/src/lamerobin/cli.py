"""Command-line harness: ``lamerobin COMMAND --config PATH [overrides]``.

Commands: validate, greens, geometry, solve, series, sweep, eval. Outputs are CSV
files (floats with 17 significant digits) plus a JSON-lines run log ``run.jsonl``
in the output directory. Exit codes: 0 ok, 2 configuration error, 3 failed
invariant, 4 solver error.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import warnings

import numpy as np

from . import robin_expansion as rx
from .boundary_geom import discretize
from .config import load_config, parse_config  # noqa: F401
from .errors import ConfigError, LameRobinError
from .lattice_greens import GreensEvaluator
from .layer_potentials import (
    assemble,
    _periodic_distance,
    default_standoff,
    jump_relation_check,
    smooth_test_density,
)

COMMANDS = ("validate", "greens", "geometry", "solve", "series", "sweep", "eval")
EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_SOLVER = 0, 2, 3, 4


class InvariantFailure(Exception):
    def __init__(self, names):
        self.names = list(names)
        super().__init__("failed invariants: " + ", ".join(self.names))


# ------------------------------------------------------------------- output
def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


class Emitter:
    """Writes CSV artifacts and the JSON-lines run log into one directory."""

    def __init__(self, outdir):
        self.outdir = outdir
        os.makedirs(outdir, exist_ok=True)
        self.log_path = os.path.join(outdir, "run.jsonl")
        open(self.log_path, "w").close()

    def csv(self, name, header, rows):
        path = os.path.join(self.outdir, name)
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
        self.log({"record": "artifact", "file": name, "rows": len(rows)})
        return path

    def log(self, record):
        with open(self.log_path, "a") as fh:
            fh.write(json.dumps(_jsonable(record), sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ------------------------------------------------------------ problem setup
def _problem(rc):
    ev = rc.evaluator()
    disc = discretize(rc.curve, rc.N, cell=rc.cfg.q_diag)
    pm = assemble(disc, ev)
    return rx.ProblemData(rc.load(disc), rc.cfg, rc.family, pm)


def _cell_grid(q, n):
    g1 = (np.arange(n[0]) + 0.5) / n[0] * q[0]
    g2 = (np.arange(n[1]) + 0.5) / n[1] * q[1]
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    return np.stack([X1.ravel(), X2.ravel()], axis=-1)


def _inside_curve(spec, x, samples=2048):
    """Even-odd test against a fine polygon of the curve."""
    t = 2 * np.pi * np.arange(samples) / samples
    poly, _, _ = spec.evaluate(t)
    a, b = poly, np.roll(poly, -1, axis=0)
    px, py = x[:, 0:1], x[:, 1:2]
    crosses = (a[None, :, 1] > py) != (b[None, :, 1] > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[None, :, 0] + (py - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / (
            b[None, :, 1] - a[None, :, 1])
    return np.sum(crosses & (px < xint), axis=1) % 2 == 1


def _eval_points(rc, pd):
    """Exterior evaluation points: the user list, or cell-grid points clear of the hole."""
    run = rc.run
    standoff = run["eval_standoff"] or default_standoff(pd.disc)
    if run["eval_points"] is not None:
        return np.array(run["eval_points"], dtype=float), standoff, False
    pts = _cell_grid(rc.cfg.q_diag, run["eval_grid"]["n"])
    keep = ~_inside_curve(rc.curve, pts) & (_periodic_distance(pd.disc, pd.pm.ev, pts) >= standoff)
    return pts[keep], standoff, True


# --------------------------------------------------------------- invariants
def run_invariants(rc, seed):
    """The full invariant suite; returns rows ``(name, status, value, threshold)``."""
    rng = np.random.default_rng(seed)
    cfg = rc.cfg
    ev = rc.evaluator()
    q = cfg.q_diag
    rows = []

    def add(name, value, threshold, passed=None):
        ok = value <= threshold if passed is None else passed
        rows.append((name, "PASS" if ok else "FAIL", float(value), float(threshold)))

    pts = _offlattice_points(rng, q, 5, 0.2 * q.min())
    fd = max(float(np.max(np.abs(ev.fd_distributional_identity(x, 1e-3 * q.min(), richardson=True)))) for x in pts)
    add("greens_fd_identity", fd, 1e-5)

    per = 0.0
    for j in range(2):
        shift = np.zeros(2)
        shift[j] = q[j]
        per = max(per, float(np.max(np.abs(ev.eval_gamma(pts + shift) - ev.eval_gamma(pts)))))
    add("greens_periodicity", per, 1e-12)
    even = float(np.max(np.abs(ev.eval_gamma(-pts) - ev.eval_gamma(pts))))
    add("greens_evenness", even, 1e-12)

    ref = GreensEvaluator(cfg, "reference_windowed",
                          truncation=int(512 * np.ceil(q.max() / q.min())))
    far = _offlattice_points(rng, q, 3, 0.05 * q.min())
    acc = float(np.max(np.abs(ref.eval_gamma(far) - ev.eval_gamma(far))))
    add("greens_acceleration_agreement", acc, 1e-8)

    disc = discretize(rc.curve, rc.N, cell=q)
    pm = assemble(disc, ev)
    WV = disc.weights.repeat(2)[:, None] * pm.V
    add("potential_weighted_symmetry", float(np.max(np.abs(WV - WV.T)) / np.max(np.abs(WV))), 1e-12)
    add("jump_relation", jump_relation_check(pm, smooth_test_density(disc)), 1e-4)

    pd = rx.ProblemData(rc.load(disc), cfg, rc.family, pm)
    report = pd.family_report
    for check in report.checks:
        add(f"family_{check.name}", 0.0 if check.passed else 1.0, 0.0, check.passed)
    if not report.ok:
        for name in ("lambda0_roundtrip", "polynomial_consistency", "two_route_coefficients",
                     "zero_mean"):
            rows.append((name, "SKIP", float("nan"), float("nan")))
        return rows

    rt = 0.0
    for _ in range(5):
        pair = _random_pair(rng, pd)
        back = rx.solve_Lambda0(pd, rx.apply_Lambda(pd, 0.0, pair))
        rt = max(rt, (back - pair).norm())
    add("lambda0_roundtrip", rt, 1e-10)

    pair = _random_pair(rng, pd)
    k = float(rng.uniform(0.1, 0.9) * rc.family.k0)
    poly = rx.apply_Lambda(pd, 0.0, pair)
    for j in range(1, rx.max_order(pd) + 1):
        poly = poly + k**j * rx.apply_Rj(pd, j, pair)
    direct = rx.apply_Lambda(pd, k, pair)
    add("polynomial_consistency",
        float(np.max(np.abs(direct - poly)) / max(1.0, np.max(np.abs(direct)))), 1e-12)

    ss = rx.series_coefficients(pd, 4)
    two = max((rx.series_coefficient_combinatorial(pd, j) - ss.coeffs[j]).norm() for j in range(5))
    add("two_route_coefficients", two, 1e-10)
    zm = max(p.mean_defect(disc) / max(p.norm(), 1e-300) for p in ss.coeffs)
    add("zero_mean", zm, 1e-12)
    return rows


def _offlattice_points(rng, q, m, dist):
    out = []
    while len(out) < m:
        x = rng.uniform(0, 1, 2) * q
        y = x - q * np.round(x / q)
        if np.hypot(*y) >= dist:
            out.append(x)
    return np.array(out)


def _random_pair(rng, pd):
    mu = rng.standard_normal((pd.N, 2))
    mu -= rx.boundary_integral(pd.disc, mu) / pd.disc.perimeter
    return rx.DensityPair(mu, rng.standard_normal(2))


# ----------------------------------------------------------------- commands
def cmd_validate(rc, em):
    rows = run_invariants(rc, rc.run["seed"])
    em.csv("validate.csv", ["invariant", "status", "value", "threshold"], rows)
    failed = [r[0] for r in rows if r[1] == "FAIL"]
    for r in rows:
        em.log({"record": "invariant", "name": r[0], "status": r[1], "value": r[2],
                "threshold": r[3]})
    if failed:
        raise InvariantFailure(failed)


def cmd_greens(rc, em):
    ev = rc.evaluator()
    pts = _cell_grid(rc.cfg.q_diag, rc.run["greens_grid"]["n"])
    G = ev.eval_gamma(pts)
    rows = [(x[0], x[1], g[0, 0], g[0, 1], g[1, 0], g[1, 1]) for x, g in zip(pts, G)]
    em.csv("greens.csv", ["x1", "x2", "G11", "G12", "G21", "G22"], rows)
    em.log({"record": "certificate", **ev.certificate()})


def cmd_geometry(rc, em):
    d = discretize(rc.curve, rc.N, cell=rc.cfg.q_diag)
    rows = [(i, d.t[i], *d.points[i], *d.normals[i], d.weights[i]) for i in range(d.N)]
    em.csv("geometry.csv", ["i", "t", "x1", "x2", "nu1", "nu2", "weight"], rows)
    em.log({"record": "geometry", "N": d.N, "perimeter": d.perimeter})


def cmd_solve(rc, em):
    pd = _problem(rc)
    em.log({"record": "certificate", **pd.pm.certificate})
    k = rc.run["k"]
    pair = rx.direct_solve(pd, k)
    res = rx.boundary_residual(pd, pair, k)
    d = pd.disc
    rows = [(i, d.t[i], *d.points[i], *pair.mu[i], *res[i]) for i in range(d.N)]
    em.csv("solve_nodes.csv", ["i", "t", "x1", "x2", "mu1", "mu2", "res1", "res2"], rows)
    res_sup = float(np.max(np.abs(res)))
    scale = max(float(np.max(np.abs(pd.g))), float(np.max(np.abs(rx.rhs_Dk(pd, k)))))
    threshold = 1e-4 * scale if scale > 0 else 1e-12
    em.csv("solve.csv", ["k", "c1", "c2", "residual_sup", "residual_threshold"],
           [(k, pair.c[0], pair.c[1], res_sup, threshold)])
    status = "PASS" if res_sup <= threshold else "FAIL"
    em.log({"record": "invariant", "name": "boundary_residual", "status": status,
            "value": res_sup, "threshold": threshold})
    if status == "FAIL":
        raise InvariantFailure(["boundary_residual"])


def _series(rc, em, pd):
    ss = rx.series_coefficients(pd, rc.run["order"])
    em.log({"record": "series", "order": ss.order, "radius_estimate": ss.radius_estimate,
            "radius_is_heuristic": True, "norms": list(ss.norms)})
    return ss


def cmd_series(rc, em):
    pd = _problem(rc)
    em.log({"record": "certificate", **pd.pm.certificate})
    ss = _series(rc, em, pd)
    ss.write(os.path.join(em.outdir, "series.csv"), os.path.join(em.outdir, "series.jsonl"))
    em.log({"record": "artifact", "file": "series.csv", "rows": ss.order + 1})
    em.log({"record": "artifact", "file": "series.jsonl", "rows": ss.order + 2})
    rows = [(j, i, *p.mu[i]) for j, p in enumerate(ss.coeffs) for i in range(pd.N)]
    em.csv("series_mu.csv", ["j", "i", "mu1", "mu2"], rows)


def _sweep_ks(rc, ss):
    sweep = rc.run["sweep"]
    if "k" in sweep:
        return [float(k) for k in sweep["k"]]
    ks = [float(f) * ss.radius_estimate for f in sweep["radius_factors"]]
    bad = [k for k in ks if not k < rc.family.k0]
    if bad or not all(np.isfinite(ks)):
        raise LameRobinError(
            f"radius-scaled sweep points {bad} fall outside (0, k0 = {rc.family.k0:g})")
    return ks


def cmd_sweep(rc, em):
    pd = _problem(rc)
    em.log({"record": "certificate", **pd.pm.certificate})
    ss = _series(rc, em, pd)
    l = rc.family.l
    rows = []
    for k in _sweep_ks(rc, ss):
        direct = rx.direct_solve(pd, k)
        series = ss.density(k)
        err = max(float(np.max(np.abs(direct.mu - series.mu))),
                  float(np.max(np.abs(direct.c - series.c))) / k**l)
        rhs = rx.rhs_Dk(pd, k)
        rs = float(np.max(np.abs(rx.apply_Lambda(pd, k, series) - rhs)))
        rd = float(np.max(np.abs(rx.apply_Lambda(pd, k, direct) - rhs)))
        rows.append((k, err, *series.c, *direct.c, rs, rd))
    em.csv("sweep.csv", ["k", "err_sup", "c1_series", "c2_series", "c1_direct", "c2_direct",
                         "residual_series", "residual_direct"], rows)


def cmd_eval(rc, em):
    pd = _problem(rc)
    em.log({"record": "certificate", **pd.pm.certificate})
    pts, standoff, _ = _eval_points(rc, pd)
    k, mode = rc.run["k"], rc.run["eval_mode"]
    em.log({"record": "eval", "k": k, "mode": mode, "points": len(pts), "standoff": standoff})
    if mode in ("direct", "both"):
        u = rx.eval_solution_direct(pd, rx.direct_solve(pd, k), k, pts, standoff=standoff)
        em.csv("eval_direct.csv", ["x1", "x2", "u1", "u2"],
               [(*x, *v) for x, v in zip(pts, u)])
    if mode in ("series", "both"):
        ss = _series(rc, em, pd)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", rx.RadiusWarning)
            u = rx.eval_solution_series(pd, ss, k, pts, standoff=standoff)
        for w in caught:
            em.log({"record": "warning", "message": str(w.message)})
        em.csv("eval_series.csv", ["x1", "x2", "u1", "u2"],
               [(*x, *v) for x, v in zip(pts, u)])


DISPATCH = {"validate": cmd_validate, "greens": cmd_greens, "geometry": cmd_geometry,
            "solve": cmd_solve, "series": cmd_series, "sweep": cmd_sweep, "eval": cmd_eval}


def run_command(cmd, rc, outdir=None):
    """Run one command on a parsed config; returns the exit status."""
    em = Emitter(outdir or rc.run["output"])
    em.log({"record": "config", "command": cmd, "config_hash": rc.config_hash,
            "seed": rc.run["seed"], "document": rc.document})
    em.log({"record": "tolerances", **rc.evaluator().certificate()})
    try:
        DISPATCH[cmd](rc, em)
    except InvariantFailure as exc:
        em.log({"record": "error", "type": "InvariantFailure", "invariants": exc.names})
        _stderr_record("InvariantFailure", str(exc))
        return EXIT_INVARIANT
    except (LameRobinError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        em.log({"record": "error", "type": type(exc).__name__, "message": str(exc)})
        _stderr_record(type(exc).__name__, str(exc))
        return EXIT_SOLVER
    em.log({"record": "status", "exit": EXIT_OK})
    return EXIT_OK


def _stderr_record(kind, message, **extra):
    print(json.dumps({"record": "error", "type": kind, "message": message, **extra}),
          file=sys.stderr)


def build_parser():
    p = argparse.ArgumentParser(
        prog="lamerobin",
        description="Quasi-periodic Lamé problems with a degenerating Robin condition.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, metavar="PATH", help="JSON configuration file")
    p.add_argument("--k", type=float, help="override run.k")
    p.add_argument("--order", type=int, help="override run.order (series truncation J)")
    p.add_argument("--nodes", type=int, help="override geometry.N")
    p.add_argument("--output", metavar="DIR", help="override run.output")
    p.add_argument("--seed", type=int, help="override run.seed")
    return p


def apply_overrides(document, args):
    doc = copy.deepcopy(document)
    run = doc.setdefault("run", {}) if isinstance(doc, dict) else {}
    for flag, key in (("k", "k"), ("order", "order"), ("output", "output"), ("seed", "seed")):
        val = getattr(args, flag)
        if val is not None:
            run[key] = val
    if args.nodes is not None and isinstance(doc, dict):
        doc.setdefault("geometry", {})["N"] = args.nodes
    return doc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            document = json.load(fh)
        rc = parse_config(apply_overrides(document, args))
    except ConfigError as exc:
        _stderr_record("ConfigError", str(exc), violations=[list(v) for v in exc.violations])
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        _stderr_record("ConfigError", str(exc))
        return EXIT_CONFIG
    return run_command(args.command, rc)


__all__ = ["main", "run_command", "run_invariants", "load_config", "parse_config"]
