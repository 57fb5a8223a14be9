import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import ellipe

from lamerobin.boundary_geom import (
    CurveSpec,
    boundary_integral,
    discretize,
    upsample,
    zero_mean_project,
)
from lamerobin.errors import GeometryError


@given(st.floats(0.05, 0.4), st.sampled_from([16, 32, 64, 128]))
def test_circle_perimeter_exact(r, N):
    d = discretize(CurveSpec.circle(r), N)
    assert d.perimeter == pytest.approx(2 * np.pi * r, rel=1e-14)


def test_circle_normals_point_outward_from_hole():
    c = np.array([0.4, 0.55])
    d = discretize(CurveSpec.circle(0.2, center=c), 64)
    assert np.allclose(d.normals, (d.points - c) / 0.2, atol=1e-15)
    assert np.allclose(d.curvature, 5.0)


def test_ellipse_perimeter_vs_adaptive_quadrature():
    a, b = 0.3, 0.2
    oracle = 4 * a * ellipe(1 - (b / a) ** 2)
    adaptive = quad(lambda t: np.hypot(a * np.sin(t), b * np.cos(t)), 0, np.pi / 2,
                    epsabs=1e-14, epsrel=1e-14)[0]
    assert 4 * adaptive == pytest.approx(oracle, abs=1e-13)
    d = discretize(CurveSpec.ellipse(a, b), 128)
    assert d.perimeter == pytest.approx(oracle, abs=1e-12)


def test_trig_star_derivatives_by_finite_differences():
    spec = CurveSpec.trig_star(0.2, cos=[0.0, 0.02, 0.01], sin=[0.01, 0.0, 0.0, 0.015])
    t = np.linspace(0, 2 * np.pi, 17)
    h = 1e-5
    x, dx, ddx = spec.evaluate(t)
    xp, dxp, _ = spec.evaluate(t + h)
    xm, dxm, _ = spec.evaluate(t - h)
    assert np.allclose((xp - xm) / (2 * h), dx, atol=1e-9)
    assert np.allclose((dxp - dxm) / (2 * h), ddx, atol=1e-8)


def test_geometry_errors():
    with pytest.raises(GeometryError):
        CurveSpec("square")
    with pytest.raises(GeometryError):
        CurveSpec.circle(-1.0)
    with pytest.raises(GeometryError):
        CurveSpec.ellipse(0.2, 0.0)
    with pytest.raises(GeometryError):
        discretize(CurveSpec.trig_star(0.1, cos=[0.0, 0.2]), 64)
    with pytest.raises(GeometryError, match="cell boundary"):
        discretize(CurveSpec.circle(0.48), 64, cell=(1.0, 1.0))
    with pytest.raises(GeometryError, match="cell boundary"):
        discretize(CurveSpec.circle(0.2, center=(0.1, 0.5)), 64, cell=(1.0, 1.0))
    with pytest.raises(ValueError):
        discretize(CurveSpec.circle(0.2), 63)
    with pytest.raises(ValueError):
        discretize(CurveSpec.circle(0.2), 8)


def test_boundary_integral_examples():
    r = 0.25
    d = discretize(CurveSpec.circle(r), 64)
    assert boundary_integral(d, np.ones(64)) == pytest.approx(2 * np.pi * r, rel=1e-14)
    f = np.stack([np.cos(d.t), np.sin(3 * d.t)], axis=-1)
    assert np.max(np.abs(boundary_integral(d, f))) < 1e-15
    M = boundary_integral(d, np.broadcast_to(-np.eye(2), (64, 2, 2)))
    assert np.allclose(M, -2 * np.pi * r * np.eye(2))
    assert np.linalg.det(M) == pytest.approx(4 * np.pi**2 * r**2)
    with pytest.raises(ValueError):
        boundary_integral(d, np.ones(32))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_zero_mean_projection(seed):
    d = discretize(CurveSpec.ellipse(0.3, 0.15), 32)
    mu = np.random.default_rng(seed).standard_normal((32, 2))
    p = zero_mean_project(d, mu)
    assert np.max(np.abs(boundary_integral(d, p))) < 1e-13
    assert np.allclose(zero_mean_project(d, p), p, atol=1e-14)
    assert np.allclose(zero_mean_project(d, np.ones((32, 2))), 0.0, atol=1e-14)


def test_upsample_is_exact_on_band_limited_data():
    d = discretize(CurveSpec.ellipse(0.3, 0.2), 32)
    f = lambda t: np.stack([np.cos(3 * t) + 0.2, np.sin(7 * t) - np.cos(15 * t)], axis=-1)
    fine, vals = upsample(d, f(d.t), 4)
    assert fine.N == 128
    assert np.allclose(vals, f(fine.t), atol=1e-13)
