import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lamerobin.boundary_geom import discretize
from lamerobin.config import DEFAULTS, config_hash, load_config, parse_config, trig_profile
from lamerobin.errors import ConfigError

MINIMAL = {"geometry": {"kind": "circle", "params": {"radius": 0.25}}}


def paths(exc):
    return [p for p, _ in exc.value.violations]


def test_minimal_circle_config_gets_defaults():
    rc = parse_config(MINIMAL)
    assert rc.N == DEFAULTS["geometry"]["N"]
    assert rc.cfg.omega == 1.0 and np.array_equal(rc.cfg.q_diag, [1.0, 1.0])
    assert rc.curve.kind == "circle" and rc.curve.center == (0.5, 0.5)
    assert rc.family.l == 1 and rc.family.k0 == 1.0
    assert rc.run["order"] == 8 and rc.run["seed"] == 0
    assert rc.evaluator().acceleration == "ewald_split"


def test_omega_bound_cited():
    with pytest.raises(ConfigError) as exc:
        parse_config({**MINIMAL, "elastic": {"omega": -2.0}})
    assert paths(exc) == ["elastic.omega"]
    assert "1 - 2/n" in str(exc.value)


def test_sweep_beyond_k0_rejected():
    doc = {**MINIMAL, "family": {"k0": 0.5}, "run": {"sweep": {"k": [0.1, 0.5, 0.7]}}}
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert paths(exc) == ["run.sweep.k[1]", "run.sweep.k[2]"]


def test_all_violations_reported_together():
    doc = {
        "elastic": {"omega": "one", "q_diag": [1.0, -1.0], "B": [[1.0]]},
        "geometry": {"kind": "hexagon", "N": 31},
        "greens": {"acceleration": "fmm", "tol": 1e-20},
        "family": {"l": 0, "k0": -1, "coeffs": [{"matrix": [[1, 2], [3]]}]},
        "load": {"g1": {"cos": ["a"]}},
        "run": {"k": 2.0, "order": -1, "eval_mode": "maybe", "bogus": 1},
    }
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    got = set(paths(exc))
    for expected in ["elastic.omega", "elastic.q_diag", "elastic.B", "geometry.N",
                     "geometry.kind", "greens.acceleration", "greens.tol", "family.l",
                     "family.k0", "family.coeffs[0].matrix", "load.g1.cos", "load.g2",
                     "run.order", "run.eval_mode", "run.bogus"]:
        assert expected in got


def test_unknown_top_level_and_type_errors():
    with pytest.raises(ConfigError) as exc:
        parse_config({"geometry": [], "extra": 1})
    assert set(paths(exc)) == {"geometry", "extra"}
    with pytest.raises(ConfigError):
        parse_config([1, 2])


def test_geometry_outside_cell():
    with pytest.raises(ConfigError) as exc:
        parse_config({"geometry": {"kind": "circle", "params": {"radius": 0.49}}})
    assert paths(exc) == ["geometry"]


def test_run_k_must_be_below_k0():
    with pytest.raises(ConfigError) as exc:
        parse_config({**MINIMAL, "run": {"k": 1.0}})
    assert paths(exc) == ["run.k"]


def test_family_profiles_and_trig_load():
    doc = {**MINIMAL,
           "family": {"l": 2, "k0": 0.5, "coeffs": [
               {"matrix": [[-1, 0], [0, -1]], "profile": {"const": 1.0, "cos": [0.2]}},
               {"matrix": [[0, 1], [1, 0]]}]},
           "load": {"g1": {"const": 1.0, "sin": [0.5]}, "g2": {"cos": [0, 2.0]}}}
    rc = parse_config(doc)
    d = discretize(rc.curve, 32)
    S = rc.family.sample(d)
    assert np.allclose(S[0, :, 0, 0], -(1 + 0.2 * np.cos(d.t)))
    assert np.allclose(S[1, :, 0, 1], 1.0)
    g = rc.load(d)
    assert np.allclose(g[:, 0], 1 + 0.5 * np.sin(d.t))
    assert np.allclose(g[:, 1], 2 * np.cos(2 * d.t))


@given(st.floats(-5, 5), st.lists(st.floats(-3, 3), max_size=4),
       st.lists(st.floats(-3, 3), max_size=4))
def test_trig_profile(a0, cos, sin):
    t = np.linspace(0, 2 * np.pi, 9)
    f = trig_profile({"const": a0, "cos": cos, "sin": sin})(t)
    expect = a0 + sum(a * np.cos((m + 1) * t) for m, a in enumerate(cos)) \
        + sum(b * np.sin((m + 1) * t) for m, b in enumerate(sin))
    assert np.allclose(f, expect)


@given(st.floats(-10, 10, allow_nan=False))
def test_omega_admissibility_property(omega):
    doc = {**MINIMAL, "elastic": {"omega": omega}}
    if omega > 0:
        assert parse_config(doc).cfg.omega == omega
    else:
        with pytest.raises(ConfigError):
            parse_config(doc)


def test_hash_is_canonical(tmp_path):
    a = {"x": 1, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1}
    assert config_hash(a) == config_hash(b) != config_hash({"x": 2, "y": [1, 2]})
    p = tmp_path / "c.json"
    p.write_text(json.dumps(MINIMAL))
    assert load_config(p).config_hash == parse_config(MINIMAL).config_hash
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
