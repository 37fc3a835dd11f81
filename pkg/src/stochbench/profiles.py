"""Bootstrap performance profiles over a resource grid.

A profile is built from the per-shot best energies of one run at the largest
resource.  For ``r`` in the grid the solver is credited ``k(r)`` shots drawn
with replacement, and the score of the best draw is averaged.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import IsingInstance, ParameterPoint, SampleSet, random_baseline
from .seeding import substream

# doubles held per resample chunk
_CHUNK = 1 << 22

PROFILE_COLUMNS = ["instance_id", "solver_id", "param_hash", "resource", "estimate", "ci_low", "ci_high", "n_boot"]


class DegenerateInstanceError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


def performance_score(best_found: float, optimal: float, random_base: float = 0.0) -> float:
    """0 at the random-sampling level, 1 at the optimum; negative when worse than random."""
    if optimal == random_base:
        raise DegenerateInstanceError("optimal energy equals the random baseline")
    return (best_found - random_base) / (optimal - random_base)


def pool_scores(pool: SampleSet, instance: IsingInstance) -> np.ndarray:
    if instance.ground_energy is None:
        raise DegenerateInstanceError(f"instance {instance.instance_id!r} has no known optimum")
    base = random_baseline(instance)
    return np.array([performance_score(e, instance.ground_energy, base) for e in pool.energies])


def draws_for_resource(resource: float, mean_cost: float) -> int:
    # relative slack so that r = k * cost maps to k despite rounding
    return max(1, math.floor(resource / mean_cost * (1 + 1e-12)))


@dataclass(frozen=True)
class ResourceGrid:
    values: tuple[float, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            raise ValueError("resource grid is empty")
        if np.any(v <= 0) or np.any(np.diff(v) <= 0):
            raise ValueError("resource grid must be strictly ascending and positive")

    @classmethod
    def logspace(cls, first: float, last: float, points: int = 20) -> "ResourceGrid":
        if points == 1 or first == last:
            return cls((float(last),))
        vals = np.unique(np.geomspace(first, last, points))
        return cls(tuple(float(x) for x in vals))

    @property
    def r_f(self) -> float:
        return self.values[-1]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass
class ProfilePoint:
    resource: float
    estimate: float
    ci_low: float
    ci_high: float
    n_boot: int


@dataclass
class PerformanceProfile:
    instance_id: str
    solver_id: str
    params: ParameterPoint | None
    points: list[ProfilePoint]
    # expected score for k = 1..len(kcurve) draws; shared by every grid point
    kcurve: np.ndarray | None = field(default=None, repr=False)
    mean_cost: float | None = None

    @property
    def resources(self) -> np.ndarray:
        return np.array([p.resource for p in self.points])

    @property
    def estimates(self) -> np.ndarray:
        return np.array([p.estimate for p in self.points])

    @property
    def ci(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([p.ci_low for p in self.points]), np.array([p.ci_high for p in self.points])

    def expected_at(self, resource: float) -> float:
        """Expected score at an arbitrary resource, using the stored k-curve."""
        if self.kcurve is None or self.mean_cost is None:
            raise ValueError("profile has no k-curve")
        k = min(draws_for_resource(resource, self.mean_cost), len(self.kcurve))
        return float(self.kcurve[k - 1])


def expected_best_of_k(sorted_scores: np.ndarray, ks: Sequence[int]) -> np.ndarray:
    """Exact ``E[max of k draws]`` for each row of ascending ``sorted_scores``.

    Uses the tail-sum form so a constant row yields its value exactly.
    """
    sorted_scores = np.atleast_2d(sorted_scores)
    m = sorted_scores.shape[1]
    steps = np.diff(sorted_scores, axis=1)
    j = np.arange(1, m) / m
    out = np.empty((sorted_scores.shape[0], len(ks)))
    for c, k in enumerate(ks):
        out[:, c] = sorted_scores[:, 0] + steps @ (1.0 - j ** k)
    return out


def bootstrap_kcurve(scores: np.ndarray, k_max: int, n_boot: int, rng: np.random.Generator) -> np.ndarray:
    """Mean best-of-k score for k = 1..k_max from ``n_boot`` resamples.

    Every k reuses the same draws (prefix maxima), so the curve is exactly
    non-decreasing in k.
    """
    m = scores.shape[0]
    sums = np.zeros(k_max)
    rows = max(1, _CHUNK // k_max)
    done = 0
    while done < n_boot:
        b = min(rows, n_boot - done)
        vals = scores[rng.integers(0, m, size=(b, k_max))]
        np.maximum.accumulate(vals, axis=1, out=vals)
        sums += vals.sum(axis=0)
        done += b
    curve = sums / n_boot
    return np.clip(curve, scores.min(), scores.max())


def _percentiles(samples: np.ndarray, confidence: float) -> tuple[np.ndarray, np.ndarray]:
    tail = 100.0 * (1.0 - confidence) / 2.0
    lo, hi = np.percentile(samples, [tail, 100.0 - tail], axis=0)
    return lo, hi


def bootstrap_profile(pool: SampleSet, grid: ResourceGrid, n_boot: int = 1000, confidence: float = 0.95,
                      instance: IsingInstance | None = None, seed: int = 0,
                      scores: np.ndarray | None = None) -> PerformanceProfile:
    """Profile of ``pool`` on ``grid``.

    The estimate is the resampled mean of the best-of-k(r) score.  The CI is
    the percentile interval of that expectation under resampling of the pool
    itself, widened if needed to contain the estimate.
    """
    if not pool.records:
        raise ValueError("empty pool")
    if grid.r_f > pool.total_resource * (1 + 1e-12):
        raise ValueError(f"grid r_f={grid.r_f:g} exceeds the pool budget {pool.total_resource:g}")
    if n_boot < 100:
        raise ValueError("n_boot must be >= 100")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    if scores is None:
        if instance is None:
            raise ValueError("need the instance (or precomputed scores) to score the pool")
        scores = pool_scores(pool, instance)
    scores = np.asarray(scores, dtype=float)
    mean_cost = pool.mean_cost
    ks = [draws_for_resource(r, mean_cost) for r in grid]
    rng = substream(seed, "bootstrap", pool.instance_id, pool.params.key)
    kcurve = bootstrap_kcurve(scores, max(ks), n_boot, rng)

    m = scores.shape[0]
    ci_rng = substream(seed, "bootstrap-ci", pool.instance_id, pool.params.key)
    unique_ks = sorted(set(ks))
    ci_samples = np.empty((n_boot, len(unique_ks)))
    rows = max(1, _CHUNK // m)
    for start in range(0, n_boot, rows):
        b = min(rows, n_boot - start)
        resampled = np.sort(scores[ci_rng.integers(0, m, size=(b, m))], axis=1)
        ci_samples[start:start + b] = expected_best_of_k(resampled, unique_ks)
    lo, hi = _percentiles(ci_samples, confidence)
    col = {k: c for c, k in enumerate(unique_ks)}

    points = []
    for r, k in zip(grid, ks):
        est = float(kcurve[k - 1])
        c = col[k]
        points.append(ProfilePoint(float(r), est, min(float(lo[c]), est), max(float(hi[c]), est), n_boot))
    return PerformanceProfile(pool.instance_id, pool.solver_id, pool.params, points, kcurve, mean_cost)


def _statistic(values: np.ndarray, statistic: str, axis: int) -> np.ndarray:
    if statistic == "mean":
        return values.mean(axis=axis)
    if statistic == "median":
        return np.median(values, axis=axis)
    raise ValueError(f"unknown statistic {statistic!r}")


def check_aligned(profiles: Sequence[PerformanceProfile]) -> np.ndarray:
    if not profiles:
        raise ValueError("no profiles to aggregate")
    grid = profiles[0].resources
    for p in profiles[1:]:
        if p.resources.shape != grid.shape or not np.array_equal(p.resources, grid):
            raise AlignmentError(f"profile {p.instance_id!r} is on a different resource grid")
    return grid


def aggregate_estimates(estimates: np.ndarray, ci_low: np.ndarray, ci_high: np.ndarray, statistic: str,
                        n_boot: int, confidence: float, rng: np.random.Generator):
    """Combine per-unit rows (units x grid) into one curve with a CI.

    The interval covers both the statistic of the per-unit intervals and the
    percentile interval from resampling units.
    """
    est = _statistic(estimates, statistic, 0)
    units = estimates.shape[0]
    boot = np.empty((n_boot, estimates.shape[1]))
    rows = max(1, _CHUNK // max(1, units * estimates.shape[1]))
    for start in range(0, n_boot, rows):
        b = min(rows, n_boot - start)
        idx = rng.integers(0, units, size=(b, units))
        boot[start:start + b] = _statistic(estimates[idx], statistic, 1)
    lo, hi = _percentiles(boot, confidence)
    lo = np.minimum.reduce([lo, _statistic(ci_low, statistic, 0), est])
    hi = np.maximum.reduce([hi, _statistic(ci_high, statistic, 0), est])
    return est, lo, hi


def aggregate_instances(profiles: Sequence[PerformanceProfile], statistic: str = "mean", n_boot: int = 1000,
                        confidence: float = 0.95, seed: int = 0, label: str = "aggregate") -> PerformanceProfile:
    grid = check_aligned(profiles)
    estimates = np.array([p.estimates for p in profiles])
    lows = np.array([p.ci[0] for p in profiles])
    highs = np.array([p.ci[1] for p in profiles])
    rng = substream(seed, "aggregate", label)
    est, lo, hi = aggregate_estimates(estimates, lows, highs, statistic, n_boot, confidence, rng)
    first = profiles[0]
    points = [ProfilePoint(float(r), float(e), float(a), float(b), n_boot) for r, e, a, b in zip(grid, est, lo, hi)]
    return PerformanceProfile(label, first.solver_id, first.params, points)


def format_float(x: float) -> str:
    return repr(float(x))


def profiles_to_csv(profiles: Iterable[PerformanceProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_COLUMNS)
    for prof in profiles:
        key = prof.params.key if prof.params is not None else ""
        for p in prof.points:
            w.writerow([prof.instance_id, prof.solver_id, key, format_float(p.resource), format_float(p.estimate),
                        format_float(p.ci_low), format_float(p.ci_high), p.n_boot])
    return buf.getvalue()


def kcurves_to_csv(profiles: Iterable[PerformanceProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance_id", "param_hash", "mean_cost", "k", "estimate"])
    for prof in profiles:
        for k, v in enumerate(prof.kcurve, start=1):
            w.writerow([prof.instance_id, prof.params.key, format_float(prof.mean_cost), k, format_float(v)])
    return buf.getvalue()


def read_profiles_csv(text: str, params_by_key: dict[str, ParameterPoint] | None = None,
                      kcurves_text: str | None = None) -> list[PerformanceProfile]:
    """Inverse of :func:`profiles_to_csv` (plus optional k-curves)."""
    params_by_key = params_by_key or {}
    order: list[tuple[str, str]] = []
    grouped: dict[tuple[str, str], list] = {}
    solver: dict[tuple[str, str], str] = {}
    for row in csv.DictReader(io.StringIO(text)):
        key = (row["instance_id"], row["param_hash"])
        if key not in grouped:
            order.append(key)
            grouped[key] = []
            solver[key] = row["solver_id"]
        grouped[key].append(ProfilePoint(float(row["resource"]), float(row["estimate"]), float(row["ci_low"]),
                                         float(row["ci_high"]), int(row["n_boot"])))
    curves: dict[tuple[str, str], list[float]] = {}
    costs: dict[tuple[str, str], float] = {}
    if kcurves_text:
        for row in csv.DictReader(io.StringIO(kcurves_text)):
            key = (row["instance_id"], row["param_hash"])
            curves.setdefault(key, []).append(float(row["estimate"]))
            costs[key] = float(row["mean_cost"])
    out = []
    for key in order:
        kc = np.array(curves[key]) if key in curves else None
        out.append(PerformanceProfile(key[0], solver[key], params_by_key.get(key[1]), grouped[key], kc,
                                      costs.get(key)))
    return out
