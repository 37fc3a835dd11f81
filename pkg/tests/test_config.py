import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochbench.config import ConfigError, parse_config_text
from stochbench.search import Distribution, DistributionError, DiscreteSpace, SearchSpace, parse_distribution
from stochbench.model import ParameterPoint


def cfg(text, **over):
    return parse_config_text(text, __import__("pathlib").Path("/tmp/x/run.cfg"), over or None)


def test_parse_distribution_forms():
    d = parse_distribution("loguniform(1, 10000)")
    assert d.kind == "loguniform" and d.params == {"lo": 1.0, "hi": 10000.0}
    d = parse_distribution("truncnormal(mean=50, sd=10, min=0.1, scale=0.01)")
    assert d.params["min"] == 0.1 and d.params["max"] == np.inf and d.scale == 0.01
    for bad in ("gauss(1,2)", "uniform(2, 1)", "uniform(1)", "uniform(a, b)", "truncnormal(mean=1, sd=0)",
                "uniform(lo=1, 2)", "choice()"):
        with pytest.raises(DistributionError):
            d = parse_distribution(bad)
            d.params


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_samples_respect_support(seed):
    rng = np.random.default_rng(seed)
    checks = {
        "uniform(0.025, 2.5)": lambda v: (0.025 <= v) & (v <= 2.5),
        "loguniform(1, 10000)": lambda v: (1 <= v) & (v <= 10000),
        "rounduniform(1, 128)": lambda v: (v == np.round(v)) & (v >= 1) & (v <= 128),
        "truncnormal(mean=50, sd=10, min=0.1, max=100, scale=0.01)": lambda v: (v >= 0.001) & (v <= 1.0),
        "lognormal(mu=0, sigma=2.3, min=0.01, scale=0.01)": lambda v: v >= 0.0001,
        "choice(2, 4, 8)": lambda v: np.isin(v, [2, 4, 8]),
    }
    for text, ok in checks.items():
        assert np.all(ok(parse_distribution(text).sample(rng, 64)))


def test_search_space_rounds_integers_and_nominal():
    space = SearchSpace("pt", {"n_replicas": parse_distribution("uniform(1, 3)"),
                               "sweeps": parse_distribution("loguniform(1, 100)"),
                               "p_cold": Distribution("choice", (0.5,)),
                               "p_hot": parse_distribution("uniform(0.1, 0.9, nominal=0.3)")},
                        ("n_replicas", "sweeps"))
    for p in space.sample(np.random.default_rng(0), 50):
        assert p["n_replicas"] == int(p["n_replicas"]) and p["sweeps"] == int(p["sweeps"])
    assert space.nominal().as_dict() == {"n_replicas": 2, "sweeps": 10, "p_cold": 0.5, "p_hot": 0.3}


def test_discrete_space():
    pts = [ParameterPoint.make("m", {"v": v}) for v in (3.0, 1.0, 2.0)]
    space = DiscreteSpace(pts)
    assert [p["v"] for p in space.points] == [1, 2, 3] and space.nominal()["v"] == 2
    with pytest.raises(ValueError):
        DiscreteSpace([])


BASE = "seed = 3\nparam.n_replicas = 2, 4\nparam.sweeps = 5\nparam.p_cold = 0.5\nparam.p_hot = 0.5\n"


def test_grid_config():
    c = cfg(BASE + "instances.dir = inst  # comment\n")
    assert c.solver == "pt" and not c.is_random_search
    assert [p["n_replicas"] for p in c.parameter_points()] == [2, 4]
    assert str(c.instances_dir) == "/tmp/x/inst"
    assert len(c.meta_grid()) == 70


def test_random_search_config():
    c = cfg("seed = 1\nsearch.count = 6\nparam.sweeps = dist:loguniform(1, 100)\n")
    pts = c.parameter_points()
    assert c.is_random_search and len(pts) == 6
    assert pts == cfg("seed = 1\nsearch.count = 6\nparam.sweeps = dist:loguniform(1, 100)\n").parameter_points()
    assert all(1 <= p["n_replicas"] <= 128 for p in pts)


def test_cim_config():
    c = cfg("seed = 1\nsolver = cim-cac\nparam.alpha = 0.25\nparam.beta = 0.002\nparam.gamma = 0.08\n"
            "param.pump = -10\nfixed.steps = 100\n")
    assert c.cim_fixed().steps == 100 and c.cim_fixed().dt == 0.00625
    assert len(c.meta_grid()) == 20 * 99


@pytest.mark.parametrize("text,msg", [
    ("solver = pt\n", "seed"),
    ("seed = 1\nsolver = foo\n", "{cim-cac, pt}"),
    ("seed = 1\nbogus = 2\n", "unknown config key"),
    ("seed = 1\nseed = 2\n", "duplicate"),
    ("seed = x\n", "seed"),
    ("seed = 1\nparam.nope = 1\n", "unknown parameter"),
    ("seed = 1\nparam.sweeps = dist:gauss(1)\n", "param.sweeps"),
    ("seed = 1\nfixed.dt = 0.1\n", "cim-cac"),
    ("seed = 1\nsmooth.window = 4\n", "odd"),
    ("seed = 1\nshots = 0\n", "shots"),
    ("seed = 1\nno equals sign\n", "key = value"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg.replace("{", r"\{").replace("}", r"\}")):
        cfg(text)


def test_seed_override():
    assert cfg(BASE, seed="9").seed == 9
