"""Parameter-setting strategies: virtual best, fixed best, explore-exploit.

Profiles are passed around as ``{instance_id: [PerformanceProfile, ...]}``
with one profile per evaluated parameter point, all on a common grid.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .model import ParameterPoint
from .profiles import PerformanceProfile, ProfilePoint, aggregate_estimates, aggregate_instances, check_aligned
from .search import DiscreteSpace, round_half_away
from .seeding import substream

VIRTUAL_BEST = "virtual-best"
FIXED = "fixed"
EXPLORE_EXPLOIT = "explore-exploit"
META_SOLVER = "meta"

ProfileTable = Mapping[str, Sequence[PerformanceProfile]]


@dataclass(frozen=True)
class MetaParams:
    explore_frac: float
    tau: float

    def __post_init__(self):
        if not 0 < self.explore_frac <= 1:
            raise ValueError(f"explore_frac must lie in (0, 1], got {self.explore_frac}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def to_point(self) -> ParameterPoint:
        return ParameterPoint.make(META_SOLVER, {"explore_frac": self.explore_frac, "tau": self.tau})

    @classmethod
    def from_point(cls, point: ParameterPoint) -> "MetaParams":
        return cls(point["explore_frac"], point["tau"])


@dataclass
class StrategyPoint:
    resource: float
    params: ParameterPoint
    score: float
    needs_rerun: bool = False
    source: str = ""


@dataclass
class StrategyCurve:
    kind: str
    points: list[StrategyPoint]
    actionable: bool = False
    label: str = ""

    @property
    def resources(self) -> np.ndarray:
        return np.array([p.resource for p in self.points])

    @property
    def needs_rerun(self) -> list[ParameterPoint]:
        seen = {}
        for p in self.points:
            if p.needs_rerun:
                seen.setdefault(p.params, None)
        return list(seen)

    def param_at(self, resource: float) -> ParameterPoint:
        for p in self.points:
            if p.resource == resource:
                return p.params
        raise KeyError(resource)


def _sorted_profiles(profiles: Sequence[PerformanceProfile]) -> list[PerformanceProfile]:
    return sorted(profiles, key=lambda p: p.params.vector)


def _argmax_first(values: np.ndarray) -> np.ndarray:
    """Row index of the maximum per column; ties go to the lowest index."""
    return np.argmax(values, axis=0)


def virtual_best(table: ProfileTable, n_boot: int = 1000, confidence: float = 0.95, statistic: str = "mean",
                 seed: int = 0) -> tuple[dict[str, StrategyCurve], dict[str, PerformanceProfile], PerformanceProfile]:
    """Per-instance oracle choice of parameters at every resource.

    Returns per-instance strategy curves, per-instance VB profiles and their
    aggregate across instances.
    """
    if not table or not any(table.values()):
        raise ValueError("no profiles")
    curves, vb_profiles = {}, {}
    for inst in sorted(table):
        profs = _sorted_profiles(table[inst])
        grid = check_aligned(profs)
        est = np.array([p.estimates for p in profs])
        lows = np.array([p.ci[0] for p in profs])
        highs = np.array([p.ci[1] for p in profs])
        best = _argmax_first(est)
        cols = np.arange(grid.size)
        curves[inst] = StrategyCurve(
            VIRTUAL_BEST,
            [StrategyPoint(float(r), profs[b].params, float(est[b, c]), source=inst)
             for c, (r, b) in enumerate(zip(grid, best))],
            label=inst,
        )
        vb_profiles[inst] = PerformanceProfile(
            inst, profs[0].solver_id, None,
            [ProfilePoint(float(r), float(est[b, c]), float(lows[b, c]), float(highs[b, c]), profs[b].points[c].n_boot)
             for c, (r, b) in enumerate(zip(grid, best))],
        )
        assert np.array_equal(est[best, cols], est.max(axis=0))
    agg = aggregate_instances([vb_profiles[i] for i in sorted(vb_profiles)], statistic, n_boot, confidence, seed,
                              label=VIRTUAL_BEST)
    return curves, vb_profiles, agg


def _mean_train_profiles(table: ProfileTable) -> tuple[list[ParameterPoint], np.ndarray, np.ndarray]:
    """Evaluated points (sorted) and their mean estimate across instances, shape (points, grid)."""
    keys = None
    stacks = []
    grid = None
    for inst in sorted(table):
        profs = _sorted_profiles(table[inst])
        g = check_aligned(profs)
        if grid is None:
            grid = g
        elif not np.array_equal(grid, g):
            raise ValueError("instances use different resource grids")
        these = [p.params for p in profs]
        if keys is None:
            keys = these
        elif these != keys:
            raise ValueError(f"instance {inst!r} was evaluated on a different parameter set")
        stacks.append(np.array([p.estimates for p in profs]))
    return keys, grid, np.mean(stacks, axis=0)


def average_point(points: Sequence[ParameterPoint], integer_params: Iterable[str] = ()) -> ParameterPoint:
    names = points[0].names
    ints = set(integer_params)
    values = {}
    for name in names:
        v = float(np.mean([p[name] for p in points]))
        values[name] = round_half_away(v) if name in ints else v
    return ParameterPoint.make(points[0].solver_id, values)


def fixed_best(train: ProfileTable, mode: str = "argmax-of-aggregate",
               integer_params: Iterable[str] = ()) -> StrategyCurve:
    """One parameter choice per resource, derived from training instances only.

    ``argmax-of-aggregate`` picks the evaluated point with the best mean
    training profile.  ``average-of-argmax`` averages each parameter over the
    per-instance best points; results that were never evaluated are flagged
    ``needs_rerun``.
    """
    if not train:
        raise ValueError("empty training set")
    points, grid, mean_est = _mean_train_profiles(train)
    evaluated = {p: i for i, p in enumerate(points)}
    out = []
    if mode == "argmax-of-aggregate":
        best = _argmax_first(mean_est)
        for c, r in enumerate(grid):
            out.append(StrategyPoint(float(r), points[best[c]], float(mean_est[best[c], c])))
    elif mode == "average-of-argmax":
        curves, _, _ = virtual_best(train, n_boot=100)
        for c, r in enumerate(grid):
            chosen = [curves[inst].points[c].params for inst in sorted(curves)]
            avg = average_point(chosen, integer_params)
            i = evaluated.get(avg)
            score = float(mean_est[i, c]) if i is not None else math.nan
            out.append(StrategyPoint(float(r), avg, score, needs_rerun=i is None))
    else:
        raise ValueError(f"unknown fixed-strategy mode {mode!r}")
    return StrategyCurve(FIXED, out, label=mode)


def _fit_values(x: np.ndarray, y: np.ndarray, family: str) -> np.ndarray:
    if family == "constant":
        return np.full_like(y, y.mean())
    if family == "linear-log":
        coef = np.polyfit(np.log(x), y, 1)
        return np.polyval(coef, np.log(x))
    if family == "power":
        if np.any(y <= 0):
            raise ValueError("power-law fit needs positive parameter values")
        coef = np.polyfit(np.log(x), np.log(y), 1)
        return np.exp(np.polyval(coef, np.log(x)))
    raise ValueError(f"unknown fit family {family!r}")


def rolling_median(values: Sequence[float], window: int) -> np.ndarray:
    """Centered rolling median; the window shrinks symmetrically at the ends."""
    v = np.asarray(values, dtype=float)
    half = window // 2
    out = np.empty_like(v)
    for i in range(v.size):
        h = min(half, i, v.size - 1 - i)
        out[i] = np.median(v[i - h:i + h + 1])
    return out


def smooth_curve(curve: StrategyCurve, window: int = 5, fit: str | None = None,
                 evaluated: Iterable[ParameterPoint] | None = None, integer_params: Iterable[str] = (),
                 scores: Mapping[tuple[ParameterPoint, float], float] | None = None) -> StrategyCurve:
    """Make a strategy actionable: rolling median per parameter, optional fit.

    Points not in ``evaluated`` are flagged ``needs_rerun``.  ``scores`` maps
    ``(point, resource)`` to a known expected score for unflagged points.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    n = len(curve.points)
    if window > n:
        warnings.warn(f"smoothing window {window} exceeds curve length {n}; clamping", stacklevel=2)
        window = n if n % 2 else max(1, n - 1)
    if n == 0:
        return StrategyCurve(curve.kind, [], True, curve.label)
    x = curve.resources
    names = curve.points[0].params.names
    solver = curve.points[0].params.solver_id
    ints = set(integer_params)
    columns = {}
    for name in names:
        col = np.array([p.params[name] for p in curve.points])
        col = rolling_median(col, window)
        # a constant column is already its own fit; refitting only adds roundoff
        if fit is not None and np.ptp(col) > 0:
            col = _fit_values(x, col, fit)
        if name in ints:
            col = np.array([round_half_away(v) for v in col])
        columns[name] = col
    known = set(evaluated) if evaluated is not None else {p.params for p in curve.points if not p.needs_rerun}
    out = []
    for c, old in enumerate(curve.points):
        point = ParameterPoint.make(solver, {name: float(columns[name][c]) for name in names})
        if point == old.params:
            score = old.score
        elif scores is not None and (point, old.resource) in scores:
            score = scores[(point, old.resource)]
        else:
            score = math.nan
        out.append(StrategyPoint(old.resource, point, score, needs_rerun=point not in known, source=old.source))
    return StrategyCurve(curve.kind, out, True, curve.label)


@dataclass
class ExploreExploitResult:
    resources: np.ndarray
    best_so_far: np.ndarray
    chosen: ParameterPoint
    n_explored: int
    exploit_budget: float
    degenerate: bool = False
    explored: list[ParameterPoint] = field(default_factory=list, repr=False)

    @property
    def final_score(self) -> float:
        return float(self.best_so_far[-1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.resources]))


def n_explored(budget: float, meta: MetaParams) -> int:
    return math.floor(meta.explore_frac * budget / meta.tau * (1 + 1e-12))


def explore_exploit(budget: float, meta: MetaParams, space, evaluate: Callable[[ParameterPoint, float], float],
                    rng: np.random.Generator) -> ExploreExploitResult:
    """Spend ``K = floor(explore_frac*B/tau)`` probes of ``tau`` each, then exploit the incumbent.

    ``space`` provides ``sample(rng, size)`` and ``nominal()``.  The
    trajectory is the best score seen against cumulative resource, with the
    exploration spend included.
    """
    if not budget > 0:
        raise ValueError("budget must be positive")
    K = n_explored(budget, meta)
    if K == 0:
        point = space.nominal()
        score = evaluate(point, budget)
        return ExploreExploitResult(np.array([float(budget)]), np.array([score]), point, 0, float(budget), True)
    exploit = budget - K * meta.tau
    if isinstance(space, DiscreteSpace) and hasattr(evaluate, "table"):
        idx = space.sample_indices(rng, K)
        scores = evaluate.table(meta.tau)[idx]
        inc = int(np.argmax(scores))
        chosen = space.points[idx[inc]]
        explored = None
    else:
        explored = space.sample(rng, K)
        scores = np.array([evaluate(p, meta.tau) for p in explored])
        inc = int(np.argmax(scores))
        chosen = explored[inc]
    resources = meta.tau * np.arange(1, K + 1, dtype=float)
    best = np.maximum.accumulate(scores)
    if exploit > 0:
        final = max(best[-1], evaluate(chosen, exploit))
        resources = np.append(resources, float(budget))
        best = np.append(best, final)
    return ExploreExploitResult(resources, best, chosen, K, float(exploit), False, explored or [])


class ProfileEvaluator:
    """Expected score of an evaluated point at any resource, from stored k-curves."""

    def __init__(self, profiles: Sequence[PerformanceProfile], space: DiscreteSpace | None = None):
        self.by_point = {p.params: p for p in profiles}
        self.space = space
        self._tables: dict[float, np.ndarray] = {}

    def __call__(self, point: ParameterPoint, resource: float) -> float:
        return self.by_point[point].expected_at(resource)

    def table(self, resource: float) -> np.ndarray:
        if resource not in self._tables:
            self._tables[resource] = np.array([self(p, resource) for p in self.space.points])
        return self._tables[resource]


def realized_profile(budgets: Sequence[float], meta_for: Callable[[float], MetaParams], space, evaluate,
                     seed: int, key: str, n_rep: int, confidence: float = 0.95) -> np.ndarray:
    """Explore-exploit outcome on one instance: rows (estimate, low, high) per budget.

    The estimate is the mean final score over ``n_rep`` seeded repetitions,
    clipped into the range of those outcomes.
    """
    out = np.empty((3, len(budgets)))
    tail = 100 * (1 - confidence) / 2
    for c, B in enumerate(budgets):
        finals = np.array([
            explore_exploit(B, meta_for(B), space, evaluate, substream(seed, "explore", key, rep, c)).final_score
            for rep in range(n_rep)
        ])
        est = min(max(float(finals.mean()), finals.min()), finals.max())
        lo, hi = np.percentile(finals, [tail, 100 - tail])
        out[:, c] = est, min(lo, est), max(hi, est)
    return out


@dataclass
class MetaSweepResult:
    meta_points: list[MetaParams]
    budgets: np.ndarray
    mean_scores: np.ndarray  # (meta points, budgets)
    best_found: StrategyCurve
    actionable: StrategyCurve


def meta_sweep(meta_grid: Sequence[MetaParams], budgets: Sequence[float], instance_ids: Sequence[str],
               space_for: Callable[[str], object], evaluator_for: Callable[[str], object], n_rep: int = 5,
               seed: int = 0, window: int = 5) -> MetaSweepResult:
    """Average explore-exploit outcomes over instances and repetitions for each meta point.

    Every meta point sees the same random substreams, so differences between
    cells are not sampling noise in the candidate draws.
    """
    if not meta_grid:
        raise ValueError("empty meta grid")
    metas = sorted(set(meta_grid), key=lambda m: (m.explore_frac, m.tau))
    budgets = np.asarray(budgets, dtype=float)
    table = np.zeros((len(metas), budgets.size))
    for inst in instance_ids:
        space, evaluate = space_for(inst), evaluator_for(inst)
        for mi, meta in enumerate(metas):
            for c, B in enumerate(budgets):
                for rep in range(n_rep):
                    rng = substream(seed, "explore", inst, rep, c)
                    table[mi, c] += explore_exploit(float(B), meta, space, evaluate, rng).final_score
    table /= max(1, len(instance_ids) * n_rep)
    best = _argmax_first(table)
    curve = StrategyCurve(
        EXPLORE_EXPLOIT,
        [StrategyPoint(float(B), metas[best[c]].to_point(), float(table[best[c], c])) for c, B in enumerate(budgets)],
        label="meta-best-found",
    )
    scores = {(m.to_point(), float(B)): float(table[mi, c]) for mi, m in enumerate(metas) for c, B in enumerate(budgets)}
    actionable = smooth_curve(curve, window=min(window, _odd_floor(len(budgets))),
                              evaluated=[m.to_point() for m in metas], scores=scores)
    actionable.label = "meta-actionable"
    return MetaSweepResult(metas, budgets, table, curve, actionable)


def _odd_floor(n: int) -> int:
    return n if n % 2 else max(1, n - 1)


@dataclass(frozen=True)
class SplitSpec:
    split_id: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int


def make_splits(instance_ids: Sequence[str], n_splits: int = 10, train_frac: float = 0.8,
                seed: int = 0) -> list[SplitSpec]:
    """Random train/test partitions; ``train_frac >= 1`` gives train = test = all."""
    ids = sorted(instance_ids)
    if len(ids) < 5 and train_frac < 1:
        raise ValueError(f"cross-validation needs at least 5 instances, got {len(ids)}")
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    splits = []
    for s in range(n_splits):
        if train_frac >= 1:
            splits.append(SplitSpec(s, tuple(ids), tuple(ids), seed))
            continue
        n_train = int(round_half_away(train_frac * len(ids)))
        if not 0 < n_train < len(ids):
            raise ValueError(f"train fraction {train_frac} leaves an empty side")
        perm = substream(seed, "split", s).permutation(len(ids))
        train = tuple(sorted(ids[i] for i in perm[:n_train]))
        test = tuple(sorted(ids[i] for i in perm[n_train:]))
        splits.append(SplitSpec(s, train, test, seed))
    return splits


@dataclass
class CrossValidated:
    splits: list[SplitSpec]
    grid: np.ndarray
    # strategy -> list of (split_id, instance_id, (3, grid) array of estimate/low/high)
    rows: dict[str, list[tuple[int, str, np.ndarray]]]
    derived: dict[int, object]

    def aggregate(self, statistic: str = "mean", n_boot: int = 1000, confidence: float = 0.95,
                  seed: int = 0) -> dict[str, PerformanceProfile]:
        out = {}
        for name in sorted(self.rows):
            rows = self.rows[name]
            arr = np.array([r[2] for r in rows])
            est, lo, hi = aggregate_estimates(arr[:, 0], arr[:, 1], arr[:, 2], statistic, n_boot, confidence,
                                              substream(seed, "cv-aggregate", name))
            out[name] = PerformanceProfile(name, "", None, [
                ProfilePoint(float(r), float(e), float(a), float(b), n_boot)
                for r, e, a, b in zip(self.grid, est, lo, hi)
            ])
        return out


def cross_validate(instance_ids: Sequence[str], derive: Callable[[tuple[str, ...]], object],
                   evaluate: Callable[[object, tuple[str, ...]], Mapping[str, Mapping[str, np.ndarray]]],
                   grid: Sequence[float], n_splits: int = 10, train_frac: float = 0.8,
                   seed: int = 0) -> CrossValidated:
    """Derive strategies on each split's training ids and score them on its test ids.

    ``derive`` only ever receives training ids.  ``evaluate`` returns
    ``{strategy: {instance_id: (3, grid) array}}`` for the test ids.
    """
    splits = make_splits(instance_ids, n_splits, train_frac, seed)
    rows: dict[str, list] = {}
    derived = {}
    for split in splits:
        strategies = derive(split.train_ids)
        derived[split.split_id] = strategies
        results = evaluate(strategies, split.test_ids)
        for name, per_instance in results.items():
            for inst in split.test_ids:
                rows.setdefault(name, []).append((split.split_id, inst, np.asarray(per_instance[inst])))
    return CrossValidated(splits, np.asarray(grid, dtype=float), rows, derived)
