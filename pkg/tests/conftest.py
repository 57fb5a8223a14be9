import numpy as np
import pytest

from lamerobin import CurveSpec, ElasticConfig, GreensEvaluator, RobinFamily, discretize
from lamerobin.layer_potentials import assemble
from lamerobin.robin_expansion import ProblemData

REF_CURVE = CurveSpec.ellipse(0.3, 0.2)


def ref_load(disc):
    """Fixed trigonometric-polynomial load of the reference setup."""
    t = disc.t
    return np.stack([np.cos(t) + 0.5 * np.sin(2 * t), np.sin(t) - 0.3 * np.cos(3 * t)], axis=-1)


def ref_family(k0=1.0):
    return RobinFamily.constant(1, [-np.eye(2)], k0)


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion(request):
    """Append one pass/fail line to the end-of-run acceptance summary (and print it)."""

    def record(line):
        request.config._acceptance_lines.append(line)
        print(line)

    return record


@pytest.fixture(scope="session")
def ref_cfg():
    return ElasticConfig(1.0, (1.0, 1.0), np.eye(2))


@pytest.fixture(scope="session")
def ref_ev(ref_cfg):
    return GreensEvaluator(ref_cfg)


@pytest.fixture(scope="session")
def ref_disc(ref_cfg):
    return discretize(REF_CURVE, 256, cell=ref_cfg.q_diag)


@pytest.fixture(scope="session")
def ref_pm(ref_disc, ref_ev):
    return assemble(ref_disc, ref_ev)


@pytest.fixture(scope="session")
def ref_pm128(ref_cfg, ref_ev):
    return assemble(discretize(REF_CURVE, 128, cell=ref_cfg.q_diag), ref_ev)


@pytest.fixture(scope="session")
def ref_pd(ref_cfg, ref_pm):
    return ProblemData(ref_load(ref_pm.disc), ref_cfg, ref_family(), ref_pm)


@pytest.fixture(scope="session")
def pd128(ref_cfg, ref_pm128):
    return ProblemData(ref_load(ref_pm128.disc), ref_cfg, ref_family(), ref_pm128)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def random_pair(rng, pd):
    from lamerobin.boundary_geom import zero_mean_project
    from lamerobin.robin_expansion import DensityPair

    mu = zero_mean_project(pd.disc, rng.standard_normal((pd.N, 2)))
    return DensityPair(mu, rng.standard_normal(2))


def lattice_distance(x, q):
    y = x - q * np.round(x / q)
    return np.hypot(y[..., 0], y[..., 1])


def offlattice_points(rng, q, m, dist):
    pts = []
    while len(pts) < m:
        x = rng.uniform(0, 1, 2) * q
        if lattice_distance(x, q) >= dist:
            pts.append(x)
    return np.array(pts)
