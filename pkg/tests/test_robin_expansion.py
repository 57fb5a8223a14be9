import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pair
from lamerobin.boundary_geom import boundary_integral
from lamerobin.elastic_core import ElasticConfig, linear_part
from lamerobin.errors import FamilyError, RadiusWarning, SingularSystemError
from lamerobin.layer_potentials import eval_single_layer
from lamerobin.robin_expansion import (
    DensityPair,
    ProblemData,
    RobinFamily,
    _factor,
    apply_Lambda,
    apply_Rj,
    boundary_residual,
    compositions,
    direct_solve,
    eval_solution_direct,
    eval_solution_series,
    Lj_combinatorial,
    max_order,
    radius_estimate,
    rhs_d,
    rhs_Dk,
    series_coefficient_combinatorial,
    series_coefficients,
    solve_Lambda,
    solve_Lambda0,
    validate_family,
)

STANDOFF_PTS = np.array([[0.05, 0.05], [0.5, 0.92], [0.93, 0.4], [0.1, 0.6], [0.75, 0.1]])


def _with(pd, family=None, g=None, B=None):
    cfg = pd.cfg if B is None else ElasticConfig(pd.cfg.omega, pd.cfg.q_diag, B)
    return ProblemData(pd.g if g is None else g, cfg, family or pd.family, pd.pm)


def _rich_family():
    """l = 2 with node-varying coefficients; negative definite for k in (0, 1)."""
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    return RobinFamily(2, (
        lambda d: -(1.0 + 0.3 * np.cos(d.t))[:, None, None] * np.eye(2),
        lambda d: 0.2 * np.sin(d.t)[:, None, None] * swap,
        -0.1 * np.eye(2),
    ), 1.0)


@pytest.fixture(scope="module")
def rich_pd(pd128):
    return _with(pd128, family=_rich_family(), B=[[0.7, -0.2], [0.4, 1.1]])


@pytest.fixture(scope="module")
def zero_pd(pd128):
    return _with(pd128, g=np.zeros((pd128.N, 2)), B=np.zeros((2, 2)))


# --------------------------------------------------------------- data types
def test_family_and_pair_basics(pd128):
    with pytest.raises(ValueError):
        RobinFamily(0, (np.eye(2),), 1.0)
    with pytest.raises(ValueError):
        RobinFamily(1, (), 1.0)
    with pytest.raises(ValueError):
        RobinFamily(1, (np.eye(2),), 0.0)
    fam = _rich_family()
    assert fam.P == 2
    S = fam.sample(pd128.disc)
    assert S.shape == (3, pd128.N, 2, 2)
    p = DensityPair(np.ones((4, 2)), [1.0, 2.0])
    assert np.array_equal(DensityPair.from_vector(p.vector()).mu, p.mu)
    assert (2 * p - p).norm() == p.norm() == 2.0
    with pytest.raises(ValueError):
        ProblemData(np.zeros((3, 2)), pd128.cfg, fam, pd128.pm)


def test_beta_never_divides_by_k(rich_pd):
    k = 0.3
    assert np.allclose(rich_pd.b(k), k**2 * rich_pd.beta(k))
    assert np.allclose(rich_pd.beta(0.0), rich_pd.bsharp[0])
    assert not np.any(rich_pd.b(0.0))


# ------------------------------------------------------------ right-hand sides
def test_rhs_d_examples(pd128):
    pd0 = _with(pd128, B=np.zeros((2, 2)))
    assert np.array_equal(rhs_d(pd0, 0), pd0.g)
    for j in (1, 2, 5):
        assert not np.any(rhs_d(pd0, j))
    # l = 1, b#_0 = -I: d_1 = +B q^{-1} x
    assert np.allclose(rhs_d(pd128, 1), linear_part(pd128.cfg, pd128.disc.points))
    assert not np.any(rhs_d(pd128, 2))
    with pytest.raises(ValueError):
        rhs_d(pd128, -1)


def test_rhs_Dk_polynomial(rich_pd, rng):
    assert np.allclose(rhs_Dk(rich_pd, 0.0), rhs_d(rich_pd, 0))
    for k in rng.uniform(0, 1, 3):
        poly = sum(rhs_d(rich_pd, j) * k**j for j in range(max_order(rich_pd) + 1))
        assert np.max(np.abs(rhs_Dk(rich_pd, k) - poly)) < 1e-14
    pd0 = _with(rich_pd, B=np.zeros((2, 2)))
    assert np.allclose(rhs_Dk(pd0, 0.4), pd0.g)


# ------------------------------------------------------------------ operators
def test_apply_Lambda_at_zero(pd128, rng):
    pair = random_pair(rng, pd128)
    expect = 0.5 * pair.mu + pd128.pm.apply_Wstar(pair.mu) - pair.c
    assert np.allclose(apply_Lambda(pd128, 0.0, pair), expect, atol=1e-14)
    assert not np.any(apply_Lambda(pd128, 0.3, DensityPair.zeros(pd128.N)))


@pytest.mark.parametrize("which", ["reference", "rich"])
def test_apply_Lambda_polynomial_identity(which, pd128, rich_pd, rng):
    pd = pd128 if which == "reference" else rich_pd
    for _ in range(3):
        pair = random_pair(rng, pd)
        k = rng.uniform(0, 1)
        poly = apply_Lambda(pd, 0.0, pair)
        for j in range(1, max_order(pd) + 1):
            poly = poly + k**j * apply_Rj(pd, j, pair)
        assert np.max(np.abs(apply_Lambda(pd, k, pair) - poly)) < 1e-13


def test_apply_Rj_examples(pd128, rich_pd, rng):
    pair = random_pair(rng, pd128)
    assert np.allclose(apply_Rj(pd128, 1, pair), -pd128.pm.apply_V(pair.mu))
    for j in (2, 3, 7):
        assert not np.any(apply_Rj(pd128, j, pair))
    # j < l: only b#_j c survives
    rpair = random_pair(rng, rich_pd)
    expect = np.einsum("nij,j->ni", rich_pd.bsharp[1], rpair.c)
    assert np.allclose(apply_Rj(rich_pd, 1, rpair), expect)
    assert not np.any(apply_Rj(rich_pd, 3, DensityPair.zeros(rich_pd.N)))
    with pytest.raises(ValueError):
        apply_Rj(pd128, 0, pair)


# -------------------------------------------------------------------- solvers
def test_solve_Lambda0_round_trip(pd128, rng):
    for _ in range(20):
        pair = random_pair(rng, pd128)
        back = solve_Lambda0(pd128, apply_Lambda(pd128, 0.0, pair))
        assert (back - pair).norm() <= 1e-10
    c = np.array([0.7, -1.3])
    out = solve_Lambda0(pd128, np.einsum("nij,j->ni", pd128.bsharp[0], c))
    assert out.norm() > 0 and np.max(np.abs(out.mu)) < 1e-12
    assert np.allclose(out.c, c)


def test_solve_Lambda0_limit_pair(rich_pd):
    X0 = solve_Lambda0(rich_pd, rhs_d(rich_pd, 0))
    ss = series_coefficients(rich_pd, 0)
    assert (ss.coeffs[0] - X0).norm() == 0.0


def test_direct_solve_manufactured(rich_pd, rng):
    k = 0.5
    pair = random_pair(rng, rich_pd)
    assert np.allclose(apply_Lambda(rich_pd, k, solve_Lambda(rich_pd, k, apply_Lambda(
        rich_pd, k, pair))), apply_Lambda(rich_pd, k, pair))
    # choose g so that D[k] = Lambda[k](pair)
    f = apply_Lambda(rich_pd, k, pair)
    g = f + (rich_pd.g - rhs_Dk(rich_pd, k))
    out = direct_solve(_with(rich_pd, g=g), k)
    assert (out - pair).norm() <= 1e-10
    assert out.mean_defect(rich_pd.disc) <= 1e-12 * out.norm()


def test_direct_solve_zero_data_and_domain(zero_pd):
    out = direct_solve(zero_pd, 0.3)
    assert out.norm() == 0.0
    for k in (0.0, -0.1, 1.0, 2.0):
        with pytest.raises(ValueError):
            direct_solve(zero_pd, k)


def test_solvers_refuse_invalid_family(pd128):
    bad = _with(pd128, family=RobinFamily.constant(1, [np.eye(2)], 1.0))
    with pytest.raises(FamilyError, match="c1"):
        direct_solve(bad, 0.1)
    with pytest.raises(FamilyError):
        series_coefficients(bad, 3)


def test_singular_system_detected():
    A = np.eye(6)
    A[5] = A[4]
    with pytest.raises(SingularSystemError):
        _factor(A)


# --------------------------------------------------------------------- series
def test_series_zero_data(zero_pd):
    ss = series_coefficients(zero_pd, 5)
    assert all(p.norm() == 0.0 for p in ss.coeffs)
    assert ss.radius_estimate == math.inf


def test_series_zero_mean_and_order(rich_pd):
    ss = series_coefficients(rich_pd, 6)
    assert ss.order == 6 and len(ss.norms) == 7
    for p in ss.coeffs:
        assert p.mean_defect(rich_pd.disc) <= 1e-12 * max(p.norm(), 1.0)
    with pytest.raises(ValueError):
        series_coefficients(rich_pd, -1)


@pytest.mark.parametrize("which", ["reference", "rich"])
def test_two_route_coefficients(which, pd128, rich_pd):
    pd = pd128 if which == "reference" else rich_pd
    ss = series_coefficients(pd, 4)
    for j in range(5):
        assert (series_coefficient_combinatorial(pd, j) - ss.coeffs[j]).norm() <= 1e-10


def test_Lj_low_orders(rich_pd, rng):
    f = rng.standard_normal((rich_pd.N, 2))
    L0 = lambda h: solve_Lambda0(rich_pd, h)
    R = lambda j, p: apply_Rj(rich_pd, j, p)
    one = L0(R(1, L0(f))) * -1
    assert (Lj_combinatorial(rich_pd, 1, f) - one).norm() < 1e-12
    two = L0(R(2, L0(f))) * -1 + L0(R(1, L0(R(1, L0(f)))))
    assert (Lj_combinatorial(rich_pd, 2, f) - two).norm() < 1e-12
    with pytest.raises(ValueError):
        Lj_combinatorial(rich_pd, 7, f)


@given(st.integers(1, 10))
def test_compositions_enumerated(j):
    comps = list(compositions(j))
    assert len(comps) == 2 ** (j - 1) == len(set(comps))
    assert all(sum(c) == j and min(c) >= 1 for c in comps)


def test_radius_estimate():
    norms = [1.0] + [0.5**j for j in range(1, 9)]
    assert radius_estimate(norms) == pytest.approx(2.0)
    assert radius_estimate([3.0]) == math.inf


def test_series_matches_direct_at_order(pd128):
    ss = series_coefficients(pd128, 8)
    errs = []
    for kk in (0.8, 0.4):
        d = direct_solve(pd128, kk)
        s = ss.density(kk)
        errs.append(max(np.max(np.abs(d.mu - s.mu)), np.max(np.abs(d.c - s.c)) / kk))
    assert errs[0] / errs[1] >= 2**8


def test_series_serialization(tmp_path, pd128):
    ss = series_coefficients(pd128, 3)
    ss.write(tmp_path / "s.csv", tmp_path / "s.jsonl")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "j,norm,c1,c2" and len(lines) == 5
    assert float(lines[2].split(",")[2]) == ss.coeffs[1].c[0]
    recs = [json.loads(r) for r in (tmp_path / "s.jsonl").read_text().splitlines()]
    assert recs[0]["radius_is_heuristic"] is True and recs[0]["order"] == 3
    assert [r["j"] for r in recs[1:]] == [0, 1, 2, 3]


# ----------------------------------------------------------------- evaluation
def test_eval_direct_zero_and_quasi_periodic(pd128, rng):
    pd0 = _with(pd128, B=np.zeros((2, 2)))
    zero = DensityPair.zeros(pd128.N)
    assert not np.any(eval_solution_direct(pd0, zero, 0.2, STANDOFF_PTS))
    pair = direct_solve(pd128, 0.2)
    u = eval_solution_direct(pd128, pair, 0.2, STANDOFF_PTS)
    B = pd128.cfg.B
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        uj = eval_solution_direct(pd128, pair, 0.2, STANDOFF_PTS + e)
        assert np.max(np.abs(uj - u - B[:, j])) <= 1e-8
    with pytest.raises(ValueError):
        eval_solution_direct(pd128, pair, 0.0, STANDOFF_PTS)


def test_eval_series_truncation_definition(pd128):
    pd0 = _with(pd128, B=np.zeros((2, 2)))
    ss = series_coefficients(pd0, 0)
    k = 0.01
    X0 = ss.coeffs[0]
    expect = eval_single_layer(pd0.disc, pd0.pm.ev, X0.mu, STANDOFF_PTS) + X0.c / k
    assert np.allclose(eval_solution_series(pd0, ss, k, STANDOFF_PTS), expect, atol=1e-13)


def test_eval_series_radius_warning(pd128):
    ss = series_coefficients(pd128, 4)
    with pytest.warns(RadiusWarning):
        eval_solution_series(pd128, ss, 2 * ss.radius_estimate, STANDOFF_PTS[:1])
    with warnings.catch_warnings():
        warnings.simplefilter("error", RadiusWarning)
        eval_solution_series(pd128, ss, 0.1, STANDOFF_PTS[:1])


def test_leading_blow_up(pd128):
    ss = series_coefficients(pd128, 6)
    c0 = ss.coeffs[0].c
    ks = np.array([0.04, 0.02, 0.01])
    errs = [np.max(np.abs(k * eval_solution_series(pd128, ss, k, STANDOFF_PTS) - c0)) for k in ks]
    slope = np.polyfit(np.log(ks), np.log(errs), 1)[0]
    assert abs(slope - 1) < 0.1


@pytest.mark.slow
def test_boundary_residual_small(ref_pd):
    pair = direct_solve(ref_pd, 0.3)
    res = boundary_residual(ref_pd, pair, 0.3)
    assert np.max(np.abs(res)) <= 1e-4 * np.max(np.abs(ref_pd.g))


# ----------------------------------------------------------------- validation
def test_validate_family_reference_and_counterexamples(pd128):
    rep = validate_family(pd128)
    assert rep.ok and [c.name for c in rep.checks] == ["c1", "c2", "c3", "c4"]
    plus = validate_family(_with(pd128, family=RobinFamily.constant(1, [np.eye(2)], 1.0)))
    assert plus.failed == ["c1"]
    # -k (diag(1, 0) + k I): invertible integral for k > 0 but rank-deficient limit
    rank = RobinFamily.constant(1, [-np.diag([1.0, 0.0]), -np.eye(2)], 1.0)
    assert validate_family(_with(pd128, family=rank)).failed == ["c4"]
    const = RobinFamily.constant(1, [-np.diag([1.0, 0.0])], 1.0)
    assert validate_family(_with(pd128, family=const)).failed == ["c2", "c4"]
    # -k diag(1, (1 - k)^2): integral singular at k = 1 inside (0, k0 = 2)
    grid = RobinFamily.constant(1, [-np.eye(2), np.diag([0.0, 2.0]), -np.diag([0.0, 1.0])], 2.0)
    bad = validate_family(_with(pd128, family=grid))
    assert bad.failed == ["c2"]
    assert bad["c2"].witness["k"] == pytest.approx(1.0)
    zero = validate_family(_with(pd128, family=RobinFamily.constant(1, [np.zeros((2, 2)),
                                                                        -np.eye(2)], 1.0)))
    assert "c4" in zero.failed


def test_mean_defect_helper(pd128):
    mu = np.ones((pd128.N, 2))
    assert DensityPair(mu, [0, 0]).mean_defect(pd128.disc) == pytest.approx(
        float(boundary_integral(pd128.disc, mu)[0]))
