"""Robin family, the operators Lambda[k] and R_j, direct solves and the power series.

For ``b[k] = k^l beta[k]`` with ``beta[k] = sum_j b#_j k^j`` the boundary equation is

    Lambda[k](mu, c) = mu/2 + W* mu + b[k] V mu + beta[k] c = D[k],
    D[k] = g - T(omega, B q^{-1}) nu - b[k] B q^{-1} x,

over zero-mean ``mu`` and constant ``c``; the displacement is
``u = v_q[mu] + c / k^l + B q^{-1} x``. ``beta[k]`` is the primitive everywhere so
that nothing is divided by ``k``. Expanding ``Lambda[k] = Lambda[0] + sum_j R_j k^j``
and ``D[k] = sum_j d_j k^j`` gives the series coefficients from
``Lambda[0] X_j = d_j - sum_{i=1}^{j} R_i X_{j-i}``.
"""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from .boundary_geom import BoundaryDisc, CurveSpec, boundary_integral, discretize
from .elastic_core import ElasticConfig, linear_part, linear_part_traction
from .errors import FamilyError, RadiusWarning, SingularSystemError
from .lattice_greens import GreensEvaluator
from .layer_potentials import (
    PotentialMatrices,
    assemble,
    eval_single_layer,
    exterior_limit,
)

COND_LIMIT = 1e12


# --------------------------------------------------------------- data types
@dataclass(frozen=True)
class RobinFamily:
    """Finitely supported analytic family ``b[k] = k^l sum_{j<=P} b#_j k^j``.

    Each entry of ``coeffs`` is a constant ``(2, 2)`` matrix or a callable that
    maps a :class:`BoundaryDisc` to node samples ``(N, 2, 2)``.
    """

    l: int
    coeffs: tuple
    k0: float

    def __post_init__(self):
        if int(self.l) < 1:
            raise ValueError("vanishing order l must be a positive integer")
        if not self.coeffs:
            raise ValueError("at least one coefficient b#_0 is required")
        if not self.k0 > 0:
            raise ValueError("k0 must be positive")
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @classmethod
    def constant(cls, l, mats, k0):
        return cls(l, tuple(np.array(m, dtype=float) for m in mats), k0)

    @property
    def P(self) -> int:
        return len(self.coeffs) - 1

    def sample(self, disc: BoundaryDisc) -> np.ndarray:
        """Coefficient samples ``(P + 1, N, 2, 2)``."""
        out = np.empty((self.P + 1, disc.N, 2, 2))
        for j, cj in enumerate(self.coeffs):
            if callable(cj):
                out[j] = cj(disc)
            else:
                out[j] = np.broadcast_to(np.asarray(cj, dtype=float), (disc.N, 2, 2))
        return out


def _horner(coeffs, k):
    acc = np.zeros_like(coeffs[0])
    for cj in coeffs[::-1]:
        acc = acc * k + cj
    return acc


@dataclass(frozen=True)
class DensityPair:
    """Zero-mean boundary density ``mu (N, 2)`` with a constant vector ``c (2,)``."""

    mu: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(2))

    @classmethod
    def zeros(cls, N):
        return cls(np.zeros((N, 2)), np.zeros(2))

    @classmethod
    def from_vector(cls, v):
        return cls(v[:-2].reshape(-1, 2), v[-2:])

    def vector(self):
        return np.concatenate([self.mu.reshape(-1), self.c])

    def norm(self) -> float:
        """Discrete sup norm over node values and the constant."""
        return float(max(np.max(np.abs(self.mu), initial=0.0), np.max(np.abs(self.c))))

    def mean_defect(self, disc) -> float:
        return float(np.max(np.abs(boundary_integral(disc, self.mu))))

    def __add__(self, other):
        return DensityPair(self.mu + other.mu, self.c + other.c)

    def __sub__(self, other):
        return DensityPair(self.mu - other.mu, self.c - other.c)

    def __mul__(self, s):
        return DensityPair(self.mu * s, self.c * s)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Everything one solve needs: load ``g (N, 2)``, cell data, family, matrices."""

    g: np.ndarray
    cfg: ElasticConfig
    family: RobinFamily
    pm: PotentialMatrices

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (self.pm.disc.N, 2):
            raise ValueError(f"load has shape {g.shape}, expected {(self.pm.disc.N, 2)}")
        object.__setattr__(self, "g", g)

    @classmethod
    def build(cls, cfg, curve: CurveSpec, N, family, load, ev=None, scheme="kress_split"):
        """Discretize, assemble and sample the load.

        ``load`` is a constant 2-vector or a callable ``disc -> (N, 2)``.
        """
        disc = discretize(curve, N, cell=cfg.q_diag)
        ev = GreensEvaluator(cfg) if ev is None else ev
        pm = assemble(disc, ev, scheme)
        g = load(disc) if callable(load) else np.broadcast_to(np.asarray(load, float), (N, 2))
        return cls(np.array(g), cfg, family, pm)

    @property
    def disc(self) -> BoundaryDisc:
        return self.pm.disc

    @property
    def N(self) -> int:
        return self.pm.disc.N

    @cached_property
    def bsharp(self) -> np.ndarray:
        return self.family.sample(self.disc)

    def beta(self, k) -> np.ndarray:
        """``k^{-l} b[k]`` at the nodes, ``(N, 2, 2)``."""
        return _horner(self.bsharp, k)

    def b(self, k) -> np.ndarray:
        return k**self.family.l * self.beta(k)

    def bsharp_at(self, j) -> np.ndarray | None:
        if 0 <= j <= self.family.P:
            return self.bsharp[j]
        return None

    @cached_property
    def linear_nodes(self) -> np.ndarray:
        return linear_part(self.cfg, self.disc.points)

    @cached_property
    def family_report(self):
        return validate_family(self)

    @cached_property
    def _lambda0(self):
        return _factor(self._augmented(0.0))

    def _augmented(self, k):
        """Square ``(2N + 2)`` matrix of ``Lambda[k]`` with zero-mean rows appended."""
        N = self.N
        pm = self.pm
        A = np.zeros((2 * N + 2, 2 * N + 2))
        bV = np.einsum("nij,njm->nim", self.b(k), pm.V.reshape(N, 2, 2 * N)).reshape(2 * N, 2 * N)
        A[:2 * N, :2 * N] = 0.5 * np.eye(2 * N) + pm.Wstar + bV
        A[:2 * N, 2 * N:] = self.beta(k).reshape(2 * N, 2)
        w = self.disc.weights
        A[2 * N, 0:2 * N:2] = w
        A[2 * N + 1, 1:2 * N:2] = w
        return A


def _factor(A):
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(
            f"augmented system is numerically singular (condition number {cond:.3g})")
    return scipy.linalg.lu_factor(A), cond


def _solve(factored, f):
    lu, _ = factored
    rhs = np.concatenate([np.asarray(f, dtype=float).reshape(-1), np.zeros(2)])
    return DensityPair.from_vector(scipy.linalg.lu_solve(lu, rhs))


def _require_valid(pd):
    rep = pd.family_report
    if not rep.ok:
        raise FamilyError(f"Robin family fails hypotheses {', '.join(rep.failed)}")


# ------------------------------------------------------------ right-hand sides
def rhs_d(pd: ProblemData, j: int) -> np.ndarray:
    """Taylor coefficient ``d_j`` of the right-hand side ``D[k]``."""
    if j < 0:
        raise ValueError("order must be non-negative")
    if j == 0:
        return pd.g - linear_part_traction(pd.cfg, pd.disc.normals)
    bj = pd.bsharp_at(j - pd.family.l)
    if bj is None:
        return np.zeros((pd.N, 2))
    return -np.einsum("nij,nj->ni", bj, pd.linear_nodes)


def rhs_Dk(pd: ProblemData, k) -> np.ndarray:
    """``D[k] = g - T(omega, B q^{-1}) nu - b[k] B q^{-1} x`` evaluated directly."""
    return rhs_d(pd, 0) - np.einsum("nij,nj->ni", pd.b(k), pd.linear_nodes)


# ------------------------------------------------------------------ operators
def apply_Lambda(pd: ProblemData, k, pair: DensityPair) -> np.ndarray:
    """``Lambda[k](mu, c)`` at the nodes."""
    mu = pair.mu
    out = 0.5 * mu + pd.pm.apply_Wstar(mu)
    out += np.einsum("nij,nj->ni", pd.b(k), pd.pm.apply_V(mu))
    out += np.einsum("nij,j->ni", pd.beta(k), pair.c)
    return out


def apply_Rj(pd: ProblemData, j: int, pair: DensityPair) -> np.ndarray:
    """``R_j(mu, c) = b#_{j-l} V mu + b#_j c`` (absent coefficients are zero)."""
    if j < 1:
        raise ValueError("R_j is defined for j >= 1")
    out = np.zeros((pd.N, 2))
    bv = pd.bsharp_at(j - pd.family.l)
    if bv is not None:
        out += np.einsum("nij,nj->ni", bv, pd.pm.apply_V(pair.mu))
    bc = pd.bsharp_at(j)
    if bc is not None:
        out += np.einsum("nij,j->ni", bc, pair.c)
    return out


def max_order(pd: ProblemData) -> int:
    """Largest ``j`` with a possibly nonzero ``R_j`` or ``d_j``."""
    return pd.family.l + pd.family.P


# -------------------------------------------------------------------- solvers
def solve_Lambda0(pd: ProblemData, f) -> DensityPair:
    """Unique zero-mean ``(mu, c)`` with ``Lambda[0](mu, c) = f``."""
    return _solve(pd._lambda0, f)


def solve_Lambda(pd: ProblemData, k: float, f) -> DensityPair:
    """Unique zero-mean ``(mu, c)`` with ``Lambda[k](mu, c) = f`` for ``0 < k < k0``."""
    if not 0 < k < pd.family.k0:
        raise ValueError(f"k must lie in (0, k0 = {pd.family.k0:g}), got {k!r}")
    _require_valid(pd)
    return _solve(_factor(pd._augmented(k)), f)


def direct_solve(pd: ProblemData, k: float) -> DensityPair:
    """Solve ``Lambda[k](mu, c) = D[k]`` for ``0 < k < k0``."""
    return solve_Lambda(pd, k, rhs_Dk(pd, k))


@dataclass(frozen=True)
class SeriesSolution:
    """Coefficients ``(mu_j, c_j)``, their norms and a root-test radius estimate.

    The radius is a heuristic from the tail of the coefficient norms, not a
    certified convergence radius.
    """

    coeffs: tuple
    norms: tuple
    radius_estimate: float
    l: int

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def density(self, k) -> DensityPair:
        """``sum_j (mu_j, c_j) k^j`` by Horner's scheme."""
        mu = _horner([p.mu for p in self.coeffs], k)
        c = _horner([p.c for p in self.coeffs], k)
        return DensityPair(mu, c)

    def to_records(self):
        """Per-order rows: ``j, norm, c1, c2``."""
        return [{"j": j, "norm": n, "c1": float(p.c[0]), "c2": float(p.c[1])}
                for j, (p, n) in enumerate(zip(self.coeffs, self.norms))]

    def write(self, csv_path, jsonl_path):
        """Write the CSV of per-order data and a JSON-lines summary."""
        with open(csv_path, "w", newline="") as fh:
            fh.write("j,norm,c1,c2\n")
            for r in self.to_records():
                fh.write(f"{r['j']},{r['norm']:.17g},{r['c1']:.17g},{r['c2']:.17g}\n")
        with open(jsonl_path, "w") as fh:
            fh.write(json.dumps({"record": "series", "order": self.order, "l": self.l,
                                 "radius_estimate": _json_float(self.radius_estimate),
                                 "radius_is_heuristic": True}) + "\n")
            for r in self.to_records():
                fh.write(json.dumps({"record": "coefficient", **r}) + "\n")


def _json_float(x):
    return x if np.isfinite(x) else None


def radius_estimate(norms: Sequence[float]) -> float:
    """Root test over the last ``max(3, J/2)`` coefficients (``j >= 1``)."""
    J = len(norms) - 1
    if J < 1:
        return float("inf")
    window = max(3, J // 2)
    js = range(max(1, J - window + 1), J + 1)
    roots = [norms[j] ** (1.0 / j) for j in js]
    top = max(roots)
    return float("inf") if top == 0 else 1.0 / top


def series_coefficients(pd: ProblemData, J: int) -> SeriesSolution:
    """Coefficients ``X_j`` from ``Lambda[0] X_j = d_j - sum_{i=1}^{j} R_i X_{j-i}``."""
    if J < 0:
        raise ValueError("order must be non-negative")
    _require_valid(pd)
    top = max_order(pd)
    X = []
    for j in range(J + 1):
        f = rhs_d(pd, j)
        for i in range(1, min(j, top) + 1):
            f = f - apply_Rj(pd, i, X[j - i])
        X.append(solve_Lambda0(pd, f))
    norms = tuple(p.norm() for p in X)
    return SeriesSolution(tuple(X), norms, radius_estimate(norms), pd.family.l)


def compositions(j: int):
    """All ordered tuples of positive integers summing to ``j``."""
    for cuts in itertools.product((False, True), repeat=j - 1):
        parts, run = [], 1
        for cut in cuts:
            if cut:
                parts.append(run)
                run = 1
            else:
                run += 1
        parts.append(run)
        yield tuple(parts)


LJ_MAX = 6


def Lj_combinatorial(pd: ProblemData, j: int, f) -> DensityPair:
    """``L_j f`` from the explicit sum over compositions of ``j`` (test oracle).

    ``L_0 = Lambda[0]^{-1}``; for ``j >= 1`` the terms are
    ``(-1)^r (L0 R_{j1}) ... (L0 R_{jr}) L0 f``.
    """
    if j < 0:
        raise ValueError("order must be non-negative")
    if j > LJ_MAX:
        raise ValueError(f"combinatorial L_j is limited to j <= {LJ_MAX}")
    base = solve_Lambda0(pd, f)
    if j == 0:
        return base
    total = DensityPair.zeros(pd.N)
    for comp in compositions(j):
        X = base
        for ji in reversed(comp):
            X = solve_Lambda0(pd, apply_Rj(pd, ji, X))
        total = total + X * (-1) ** len(comp)
    return total


def series_coefficient_combinatorial(pd: ProblemData, j: int) -> DensityPair:
    """``(mu_j, c_j) = sum_{j1 + j2 = j} L_{j1} d_{j2}``."""
    total = DensityPair.zeros(pd.N)
    for j1 in range(j + 1):
        total = total + Lj_combinatorial(pd, j1, rhs_d(pd, j - j1))
    return total


# ----------------------------------------------------------------- evaluation
def eval_solution_direct(pd: ProblemData, pair: DensityPair, k, x, standoff=None):
    """``u[k](x) = v_q[mu](x) + c / k^l + B q^{-1} x``."""
    if not k > 0:
        raise ValueError("the displacement is defined for k > 0")
    v = eval_single_layer(pd.disc, pd.pm.ev, pair.mu, x, standoff=standoff)
    return v + pair.c / k**pd.family.l + linear_part(pd.cfg, x)


def eval_solution_series(pd: ProblemData, ss: SeriesSolution, k, x, standoff=None):
    """Truncated series ``sum_j v_q[mu_j] k^j + k^{-l} sum_j c_j k^j + B q^{-1} x``."""
    if not k > 0:
        raise ValueError("the displacement is defined for k > 0")
    if k >= ss.radius_estimate:
        warnings.warn(f"k = {k:g} is at or beyond the estimated radius "
                      f"{ss.radius_estimate:.4g}", RadiusWarning, stacklevel=2)
    pair = ss.density(k)
    v = eval_single_layer(pd.disc, pd.pm.ev, pair.mu, x, standoff=standoff)
    return v + pair.c / k**ss.l + linear_part(pd.cfg, x)


def boundary_residual(pd: ProblemData, pair: DensityPair, k, c0=2.0, factor=32):
    """``T(omega, Du) nu + b[k] u - g`` at the nodes from exterior limits of ``u``."""
    disc, ev = pd.disc, pd.pm.ev
    trac = exterior_limit(disc, ev, pair.mu, c0=c0, factor=factor, traction=True)
    trac = trac + linear_part_traction(pd.cfg, disc.normals)
    val = exterior_limit(disc, ev, pair.mu, c0=c0, factor=factor, traction=False)
    val = val + pd.linear_nodes
    res = trac + np.einsum("nij,nj->ni", pd.b(k), val)
    res += np.einsum("nij,j->ni", pd.beta(k), pair.c)
    return res - pd.g


# ----------------------------------------------------------------- validation
DIRECTIONS = 16
K_GRID = 64


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    detail: str
    witness: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FamilyReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _det_ok(M, rtol=1e-10):
    scale = float(np.sum(M * M))
    d = float(np.linalg.det(M))
    return scale > 0 and abs(d) > rtol * scale, d


def validate_family(pd: ProblemData, sign_tol=1e-12) -> FamilyReport:
    """Sampled checks of the sign, invertibility, vanishing and limit hypotheses.

    ``c1``: ``xi^T b[k](x_i) xi <= sign_tol`` for 16 directions and a k-grid in
    ``(0, k0)``; ``c2``: ``det int b[k] != 0`` on the same grid; ``c3``: ``b[0] = 0``
    (structural for ``b = k^l beta``); ``c4``: ``b~ != 0`` and ``det int b~ != 0``.
    """
    fam, disc = pd.family, pd.disc
    ks = fam.k0 * np.arange(1, K_GRID) / K_GRID
    ang = np.pi * np.arange(DIRECTIONS) / DIRECTIONS
    xis = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    checks = []

    worst, wk = -np.inf, None
    for k in ks:
        form = np.einsum("di,nij,dj->dn", xis, pd.b(k), xis)
        if form.max() > worst:
            worst, wk = float(form.max()), float(k)
    checks.append(HypothesisCheck(
        "c1", worst <= sign_tol, f"max xi^T b[k] xi = {worst:.3e}", {"k": wk, "value": worst}))

    bad = None
    for k in ks:
        ok, d = _det_ok(boundary_integral(disc, pd.b(k)))
        if not ok:
            bad = (float(k), d)
            break
    checks.append(HypothesisCheck(
        "c2", bad is None,
        "det int b[k] nonzero on the k-grid" if bad is None
        else f"det int b[k] = {bad[1]:.3e} at k = {bad[0]:.6g}",
        {} if bad is None else {"k": bad[0], "det": bad[1]}))

    b0 = pd.b(0.0)
    checks.append(HypothesisCheck("c3", not np.any(b0), "b[0] = 0 (b = k^l beta)"))

    bt = pd.bsharp[0]
    ok, d = _det_ok(boundary_integral(disc, bt))
    nonzero = bool(np.any(bt))
    checks.append(HypothesisCheck(
        "c4", ok and nonzero,
        f"det int b~ = {d:.3e}" + ("" if nonzero else " (b~ identically zero)"), {"det": d}))
    return FamilyReport(tuple(checks))
