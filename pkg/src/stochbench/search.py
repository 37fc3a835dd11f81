"""Parameter sampling distributions and search spaces.

Text form, as used in run configs::

    uniform(lo, hi)            loguniform(lo, hi)        rounduniform(lo, hi)
    truncnormal(mean=, sd=, min=, max=)                  lognormal(mu=, sigma=, min=, max=)
    choice(v1, v2, ...)

Every form accepts ``nominal=`` (the default point) and ``scale=`` (a factor
applied to each draw, e.g. ``0.01`` for values given in percent).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import ParameterPoint


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class Distribution:
    kind: str
    args: tuple[float, ...] = ()
    kwargs: tuple[tuple[str, float], ...] = ()

    _SPECS = {
        "uniform": (("lo", "hi"), ()),
        "loguniform": (("lo", "hi"), ()),
        "rounduniform": (("lo", "hi"), ()),
        "truncnormal": (("mean", "sd"), ("min", "max")),
        "lognormal": (("mu", "sigma"), ("min", "max")),
    }

    def __post_init__(self):
        if self.kind == "choice":
            if not self.args:
                raise DistributionError("choice() needs at least one value")
            return
        if self.kind not in self._SPECS:
            raise DistributionError(f"unknown distribution {self.kind!r}")
        p = self.params
        lo, hi = p.get("lo"), p.get("hi")
        if lo is not None and not lo <= hi:
            raise DistributionError(f"{self.kind}: need lo <= hi, got {lo}, {hi}")
        if self.kind == "loguniform" and lo <= 0:
            raise DistributionError("loguniform bounds must be positive")
        if self.kind == "truncnormal":
            if p["sd"] <= 0:
                raise DistributionError("truncnormal needs sd > 0")
            if p["min"] >= p["max"]:
                raise DistributionError("truncnormal needs min < max")
        if self.kind == "lognormal" and p["sigma"] < 0:
            raise DistributionError("lognormal needs sigma >= 0")

    @property
    def params(self) -> dict[str, float]:
        if self.kind == "choice":
            return dict(self.kwargs)
        required, optional = self._SPECS[self.kind]
        out = {"min": -math.inf, "max": math.inf} if optional else {}
        named = dict(self.kwargs)
        if len(self.args) > len(required):
            raise DistributionError(f"{self.kind}: too many positional arguments")
        for name, value in zip(required, self.args):
            named.setdefault(name, value)
        missing = [r for r in required if r not in named]
        if missing:
            raise DistributionError(f"{self.kind}: missing {', '.join(missing)}")
        allowed = set(required) | set(optional) | {"nominal", "scale"}
        unknown = set(named) - allowed
        if unknown:
            raise DistributionError(f"{self.kind}: unknown argument(s) {sorted(unknown)}")
        out.update(named)
        return out

    @property
    def scale(self) -> float:
        return dict(self.kwargs).get("scale", 1.0)

    def _raw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        p = self.params
        if self.kind == "uniform":
            return rng.uniform(p["lo"], p["hi"], size)
        if self.kind == "loguniform":
            return np.exp(rng.uniform(math.log(p["lo"]), math.log(p["hi"]), size))
        if self.kind == "rounduniform":
            return np.round(rng.uniform(p["lo"], p["hi"], size))
        if self.kind == "truncnormal":
            out = np.empty(size)
            filled = 0
            while filled < size:
                draw = rng.normal(p["mean"], p["sd"], 2 * (size - filled) + 8)
                draw = draw[(draw >= p["min"]) & (draw <= p["max"])][: size - filled]
                out[filled:filled + draw.size] = draw
                filled += draw.size
            return out
        if self.kind == "lognormal":
            return np.clip(np.exp(rng.normal(p["mu"], p["sigma"], size)), p["min"], p["max"])
        return np.asarray(self.args)[rng.integers(0, len(self.args), size)]

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        return self._raw(rng, size) * self.scale

    def nominal(self) -> float:
        p = self.params
        if "nominal" in p:
            return p["nominal"] * self.scale
        if self.kind == "choice":
            value = self.args[0]
        elif self.kind == "uniform":
            value = 0.5 * (p["lo"] + p["hi"])
        elif self.kind == "loguniform":
            value = math.sqrt(p["lo"] * p["hi"])
        elif self.kind == "rounduniform":
            value = float(np.round(0.5 * (p["lo"] + p["hi"])))
        elif self.kind == "truncnormal":
            value = min(max(p["mean"], p["min"]), p["max"])
        else:
            value = min(max(math.exp(p["mu"]), p["min"]), p["max"])
        return value * self.scale

    def __str__(self):
        parts = [repr(a) for a in self.args] + [f"{k}={v!r}" for k, v in self.kwargs]
        return f"{self.kind}({', '.join(parts)})"


_CALL = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$")


def parse_distribution(text: str) -> Distribution:
    """Parse e.g. ``loguniform(1, 10000)`` or ``truncnormal(mean=50, sd=10, min=0.1)``."""
    m = _CALL.match(text)
    if not m:
        raise DistributionError(f"cannot parse distribution {text!r}")
    kind, body = m.groups()
    args, kwargs = [], []
    for item in filter(None, (s.strip() for s in body.split(","))):
        try:
            if "=" in item:
                k, v = (s.strip() for s in item.split("=", 1))
                kwargs.append((k, float(v)))
            else:
                if kwargs:
                    raise DistributionError(f"positional argument after keyword in {text!r}")
                args.append(float(item))
        except ValueError:
            raise DistributionError(f"bad number in {text!r}") from None
    return Distribution(kind, tuple(args), tuple(kwargs))


def round_half_away(x: float) -> float:
    return math.copysign(math.floor(abs(x) + 0.5), x)


@dataclass
class SearchSpace:
    """Independent per-parameter distributions, in the solver's parameter order."""

    solver_id: str
    dists: Mapping[str, Distribution]
    integer_params: Sequence[str] = ()

    def _finish(self, values: dict[str, float]) -> ParameterPoint:
        for name in self.integer_params:
            if name in values:
                values[name] = max(1.0, round_half_away(values[name]))
        return ParameterPoint.make(self.solver_id, values)

    def sample(self, rng: np.random.Generator, size: int) -> list[ParameterPoint]:
        columns = {name: d.sample(rng, size) for name, d in self.dists.items()}
        return [self._finish({name: float(col[i]) for name, col in columns.items()}) for i in range(size)]

    def nominal(self) -> ParameterPoint:
        return self._finish({name: d.nominal() for name, d in self.dists.items()})


@dataclass
class DiscreteSpace:
    """Uniform choice over an already-evaluated set of parameter points."""

    points: Sequence[ParameterPoint]
    default: ParameterPoint | None = None
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if not self.points:
            raise ValueError("empty parameter set")
        self.points = sorted(self.points, key=lambda p: p.vector)
        self.index = {p: i for i, p in enumerate(self.points)}

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(0, len(self.points), size)

    def sample(self, rng: np.random.Generator, size: int) -> list[ParameterPoint]:
        return [self.points[i] for i in self.sample_indices(rng, size)]

    def nominal(self) -> ParameterPoint:
        if self.default is not None:
            return self.default
        return self.points[len(self.points) // 2]
