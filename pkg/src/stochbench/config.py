"""Flat ``key = value`` run configuration.

Example::

    seed = 7
    solver = pt
    instances.dir = instances
    output.dir = out
    gen.n = 32
    gen.alpha = 0.5
    gen.count = 20
    shots = 100
    param.n_replicas = 2, 4, 8
    param.sweeps = 5, 10, 20
    param.p_cold = 0.5
    param.p_hot = dist:truncnormal(mean=50, sd=10, min=0.1, scale=0.01)

A parameter given as ``dist:...`` turns the run into random search: the
evaluated set is ``search.count`` points drawn from the distributions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path


from . import cim, pt
from .model import ParameterPoint
from .search import Distribution, DistributionError, SearchSpace, parse_distribution
from .seeding import substream
from .strategies import MetaParams

SOLVERS = {
    pt.SOLVER_ID: (pt.PARAM_NAMES, pt.INTEGER_PARAMS),
    cim.SOLVER_ID: (cim.PARAM_NAMES, cim.INTEGER_PARAMS),
}

DEFAULT_SEARCH = {
    pt.SOLVER_ID: {
        "n_replicas": "rounduniform(1, 128)",
        "sweeps": "loguniform(1, 10000)",
        "p_cold": "lognormal(mu=0, sigma=2.302585092994046, min=0.01, scale=0.01)",
        "p_hot": "truncnormal(mean=50, sd=10, min=0.1, max=100, scale=0.01)",
    },
    cim.SOLVER_ID: {
        "alpha": "uniform(0.025, 2.5, nominal=0.25)",
        "beta": "uniform(0.001, 0.003, nominal=0.002)",
        "gamma": "uniform(0, 0.16, nominal=0.08)",
        "pump": "uniform(-100, -1, nominal=-10)",
    },
}

DEFAULT_META = {
    pt.SOLVER_ID: (
        [0.05, 0.1, 0.2, 0.3, 0.5, 0.6, 0.75],
        [10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000],
    ),
    cim.SOLVER_ID: (
        [round(0.05 * k, 2) for k in range(1, 21)],
        list(range(11, 502, 5)),
    ),
}

_SCALARS = {
    "seed": int,
    "solver": str,
    "instances.dir": str,
    "output.dir": str,
    "gen.n": int,
    "gen.alpha": float,
    "gen.count": int,
    "shots": int,
    "jobs": int,
    "search.count": int,
    "grid.points": int,
    "grid.min": float,
    "grid.max": float,
    "bootstrap.n_boot": int,
    "bootstrap.confidence": float,
    "meta.n_rep": int,
    "cv.n_splits": int,
    "cv.train_frac": float,
    "cv.statistic": str,
    "smooth.window": int,
    "smooth.fit": str,
    "report.scaling_resource": float,
}
_LISTS = {"meta.explore_frac", "meta.tau", "report.scaling_dirs"}


class ConfigError(ValueError):
    pass


def _number_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


@dataclass
class RunConfig:
    path: Path
    seed: int
    solver: str
    instances_dir: Path
    output_dir: Path
    gen_n: int | None = None
    gen_alpha: float | None = None
    gen_count: int | None = None
    shots: int = 100
    jobs: int = 1
    params: dict[str, list[float] | Distribution] = field(default_factory=dict)
    fixed: dict[str, float] = field(default_factory=dict)
    search_count: int = 9
    grid_points: int = 20
    grid_min: float | None = None
    grid_max: float | None = None
    n_boot: int = 1000
    confidence: float = 0.95
    meta_explore_frac: list[float] = field(default_factory=list)
    meta_tau: list[float] = field(default_factory=list)
    meta_n_rep: int = 3
    n_splits: int = 10
    train_frac: float = 0.8
    statistic: str = "mean"
    smooth_window: int = 5
    smooth_fit: str | None = None
    scaling_dirs: list[Path] = field(default_factory=list)
    scaling_resource: float | None = None

    @property
    def param_names(self) -> tuple[str, ...]:
        return SOLVERS[self.solver][0]

    @property
    def integer_params(self) -> tuple[str, ...]:
        return SOLVERS[self.solver][1]

    @property
    def is_random_search(self) -> bool:
        return any(isinstance(v, Distribution) for v in self.params.values())

    def search_space(self) -> SearchSpace:
        dists = {}
        for name in self.param_names:
            v = self.params[name]
            dists[name] = v if isinstance(v, Distribution) else Distribution("choice", tuple(v))
        return SearchSpace(self.solver, dists, self.integer_params)

    def parameter_points(self) -> list[ParameterPoint]:
        """The evaluated set: a Cartesian grid, or draws from the distributions."""
        if self.is_random_search:
            space = self.search_space()
            points = space.sample(substream(self.seed, "search"), self.search_count)
        else:
            names = self.param_names
            points = [ParameterPoint.make(self.solver, dict(zip(names, combo)))
                      for combo in itertools.product(*(self.params[n] for n in names))]
        unique = list(dict.fromkeys(points))
        return sorted(unique, key=lambda p: p.vector)

    def meta_grid(self) -> list[MetaParams]:
        return [MetaParams(f, t) for f in self.meta_explore_frac for t in self.meta_tau]

    def cim_fixed(self) -> cim.CimFixedParams:
        kwargs = dict(self.fixed)
        if "steps" in kwargs:
            kwargs["steps"] = int(kwargs["steps"])
        return cim.CimFixedParams(**kwargs)


def parse_config_text(text: str, path: Path, overrides: dict[str, str] | None = None) -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    raw.update(overrides or {})

    values: dict[str, object] = {}
    params: dict[str, object] = {}
    fixed: dict[str, float] = {}
    for key, value in raw.items():
        try:
            if key in _SCALARS:
                values[key] = _SCALARS[key](value)
            elif key in _LISTS:
                values[key] = value
            elif key.startswith("param."):
                name = key[len("param."):]
                if value.startswith("dist:"):
                    params[name] = parse_distribution(value[len("dist:"):])
                elif value == "default":
                    params[name] = "default"
                else:
                    params[name] = _number_list(value)
            elif key.startswith("fixed."):
                fixed[key[len("fixed."):]] = float(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except (ValueError, DistributionError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: {exc}") from None

    if "seed" not in values:
        raise ConfigError("config must set 'seed'")
    solver = values.get("solver", pt.SOLVER_ID)
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}; expected one of {{{', '.join(sorted(SOLVERS))}}}")
    names, _ = SOLVERS[solver]
    unknown = set(params) - set(names)
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {solver}: {sorted(unknown)}")
    for name in names:
        spec = params.get(name, "default")
        if spec == "default":
            spec = parse_distribution(DEFAULT_SEARCH[solver][name])
        params[name] = spec
    if any(isinstance(v, list) and not v for v in params.values()):
        raise ConfigError("empty parameter list")
    if solver == cim.SOLVER_ID:
        allowed = {f.name for f in cim.CimFixedParams.__dataclass_fields__.values()}
        bad = set(fixed) - allowed
        if bad:
            raise ConfigError(f"unknown fixed CIM parameter(s): {sorted(bad)}")
    elif fixed:
        raise ConfigError("fixed.* keys only apply to the cim-cac solver")

    base = path.parent
    fracs, taus = DEFAULT_META[solver]
    if "meta.explore_frac" in values:
        fracs = _number_list(values["meta.explore_frac"])
    if "meta.tau" in values:
        taus = _number_list(values["meta.tau"])

    cfg = RunConfig(
        path=path,
        seed=values["seed"],
        solver=solver,
        instances_dir=base / values.get("instances.dir", "instances"),
        output_dir=base / values.get("output.dir", "out"),
        gen_n=values.get("gen.n"),
        gen_alpha=values.get("gen.alpha"),
        gen_count=values.get("gen.count"),
        shots=values.get("shots", 100),
        jobs=values.get("jobs", 1),
        params=params,
        fixed=fixed,
        search_count=values.get("search.count", 9),
        grid_points=values.get("grid.points", 20),
        grid_min=values.get("grid.min"),
        grid_max=values.get("grid.max"),
        n_boot=values.get("bootstrap.n_boot", 1000),
        confidence=values.get("bootstrap.confidence", 0.95),
        meta_explore_frac=fracs,
        meta_tau=taus,
        meta_n_rep=values.get("meta.n_rep", 3),
        n_splits=values.get("cv.n_splits", 10),
        train_frac=values.get("cv.train_frac", 0.8),
        statistic=values.get("cv.statistic", "mean"),
        smooth_window=values.get("smooth.window", 5),
        smooth_fit=values.get("smooth.fit"),
        scaling_dirs=[base / d.strip() for d in values.get("report.scaling_dirs", "").split(",") if d.strip()],
        scaling_resource=values.get("report.scaling_resource"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.shots < 1:
        raise ConfigError("shots must be >= 1")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.n_boot < 100:
        raise ConfigError("bootstrap.n_boot must be >= 100")
    if not 0 < cfg.confidence < 1:
        raise ConfigError("bootstrap.confidence must lie in (0, 1)")
    if cfg.statistic not in ("mean", "median"):
        raise ConfigError("cv.statistic must be mean or median")
    if cfg.smooth_window < 1 or cfg.smooth_window % 2 == 0:
        raise ConfigError("smooth.window must be odd and >= 1")
    if cfg.smooth_fit in ("none", ""):
        cfg.smooth_fit = None
    if cfg.smooth_fit not in (None, "constant", "linear-log", "power"):
        raise ConfigError(f"unknown smooth.fit {cfg.smooth_fit!r}")
    if cfg.grid_points < 1:
        raise ConfigError("grid.points must be >= 1")
    if not cfg.meta_explore_frac or not cfg.meta_tau:
        raise ConfigError("meta grid is empty")
    try:
        cfg.meta_grid()
    except ValueError as exc:
        raise ConfigError(f"meta grid: {exc}") from None
    if cfg.search_count < 1:
        raise ConfigError("search.count must be >= 1")
    if cfg.solver == cim.SOLVER_ID:
        try:
            cfg.cim_fixed()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"fixed CIM parameters: {exc}") from None
    for name, v in cfg.params.items():
        if isinstance(v, list) and not all(math.isfinite(x) for x in v):
            raise ConfigError(f"param.{name} has non-finite values")


def load_config(path: str | Path, overrides: dict[str, str] | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, path, overrides)
