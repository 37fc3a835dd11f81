import math

import numpy as np
import pytest

from stochbench.model import ParameterPoint
from stochbench.profiles import PerformanceProfile, ProfilePoint
from stochbench.search import DiscreteSpace
from stochbench.strategies import (MetaParams, StrategyCurve, StrategyPoint, cross_validate, explore_exploit,
                                   fixed_best, make_splits, meta_sweep, n_explored, rolling_median, smooth_curve,
                                   virtual_best)

GRID = (1.0, 2.0, 4.0, 8.0)


def pt_point(sweeps, n_replicas=2):
    return ParameterPoint.make("pt", {"n_replicas": n_replicas, "sweeps": sweeps, "p_cold": 0.5, "p_hot": 0.5})


def profile(inst, point, values):
    return PerformanceProfile(inst, "pt", point, [ProfilePoint(r, v, v, v, 100) for r, v in zip(GRID, values)])


def test_vb_singleton():
    p = profile("a", pt_point(10), [0.1, 0.2, 0.3, 0.4])
    curves, vb, _ = virtual_best({"a": [p]}, n_boot=100)
    assert list(vb["a"].estimates) == [0.1, 0.2, 0.3, 0.4]
    assert all(pt.params == p.params for pt in curves["a"].points)


def test_vb_dominant_and_crossing():
    lo, hi = pt_point(5), pt_point(50)
    table = {"a": [profile("a", lo, [0.1, 0.2, 0.3, 0.4]), profile("a", hi, [0.2, 0.3, 0.4, 0.5])]}
    curves, vb, _ = virtual_best(table, n_boot=100)
    assert {pt.params for pt in curves["a"].points} == {hi}
    values = {pt_point(s): np.random.default_rng(s).random(4) for s in (1, 2, 3)}
    table = {"a": [profile("a", p, v) for p, v in values.items()]}
    curves, vb, _ = virtual_best(table, n_boot=100)
    oracle = [max(v[c] for v in values.values()) for c in range(4)]
    assert list(vb["a"].estimates) == oracle


def test_vb_ties_go_to_smallest_vector():
    a, b = pt_point(5), pt_point(50)
    table = {"x": [profile("x", b, [0.5] * 4), profile("x", a, [0.5] * 4)]}
    curves, _, _ = virtual_best(table, n_boot=100)
    assert all(pt.params == a for pt in curves["x"].points)


def test_fixed_best_modes():
    p10, p1000 = pt_point(10), pt_point(1000)
    single = {"a": [profile("a", p10, [0.3, 0.4, 0.5, 0.6]), profile("a", p1000, [0.1, 0.2, 0.6, 0.7])]}
    for mode in ("argmax-of-aggregate", "average-of-argmax"):
        curve = fixed_best(single, mode, ("n_replicas", "sweeps"))
        assert [pt.params for pt in curve.points] == [p10, p10, p1000, p1000]
    same = {i: [profile(i, p10, [0.5] * 4), profile(i, p1000, [0.1] * 4)] for i in "ab"}
    curve = fixed_best(same, "average-of-argmax", ("n_replicas", "sweeps"))
    assert all(pt.params == p10 and not pt.needs_rerun for pt in curve.points)
    split = {"a": [profile("a", p10, [0.9] * 4), profile("a", p1000, [0.1] * 4)],
             "b": [profile("b", p10, [0.1] * 4), profile("b", p1000, [0.9] * 4)]}
    curve = fixed_best(split, "average-of-argmax", ("n_replicas", "sweeps"))
    assert all(pt.params["sweeps"] == 505 and pt.needs_rerun for pt in curve.points)
    assert curve.needs_rerun == [pt_point(505)]
    with pytest.raises(ValueError):
        fixed_best({}, "argmax-of-aggregate")


def test_rolling_median():
    assert list(rolling_median([1, 9, 1, 1, 1], 3)) == [1, 1, 1, 1, 1]
    assert list(rolling_median([5, 1, 9], 1)) == [5, 1, 9]


def curve_of(sweeps):
    return StrategyCurve("fixed", [StrategyPoint(r, pt_point(s), 0.5) for r, s in zip(GRID[:len(sweeps)], sweeps)])


def test_smooth_curve():
    evaluated = [pt_point(s) for s in (1, 9)]
    c = curve_of([1, 9, 1, 1])
    assert [p.params for p in smooth_curve(c, 1, evaluated=evaluated).points] == [p.params for p in c.points]
    smooth = smooth_curve(c, 3, evaluated=evaluated)
    assert [p.params["sweeps"] for p in smooth.points] == [1, 1, 1, 1] and smooth.actionable
    const = curve_of([9, 9, 9, 9])
    assert [p.params for p in smooth_curve(const, 3, fit="constant").points] == [p.params for p in const.points]
    fitted = smooth_curve(curve_of([1, 2, 4, 8]), 1, fit="power", integer_params=("sweeps",),
                          evaluated=[pt_point(1)])
    assert [p.params["sweeps"] for p in fitted.points] == [1, 2, 4, 8]
    assert [p.needs_rerun for p in fitted.points] == [False, True, True, True]
    with pytest.warns(UserWarning):
        smooth_curve(curve_of([1, 9, 1]), 5)
    with pytest.raises(ValueError):
        smooth_curve(c, 2)


class ValueSpace:
    """Candidates are scalars drawn uniformly; the evaluator scores a point by its value."""

    def sample(self, rng, size):
        return [ParameterPoint.make("mock", {"v": float(x)}) for x in rng.random(size)]

    def nominal(self):
        return ParameterPoint.make("mock", {"v": 0.5})


def value_eval(point, resource):
    return point["v"]


def test_explore_exploit_arithmetic():
    assert n_explored(1000, MetaParams(0.3, 100)) == 3
    res = explore_exploit(1000, MetaParams(0.3, 100), ValueSpace(), value_eval, np.random.default_rng(0))
    assert res.n_explored == 3 and res.exploit_budget == 700
    assert res.increments.sum() == 1000
    one = explore_exploit(500, MetaParams(1.0, 500), ValueSpace(), value_eval, np.random.default_rng(0))
    assert one.n_explored == 1 and one.exploit_budget == 0 and list(one.resources) == [500]


def test_explore_exploit_hand_simulation():
    rng = np.random.default_rng(42)
    res = explore_exploit(1000, MetaParams(0.5, 100), ValueSpace(), value_eval, rng)
    draws = np.random.default_rng(42).random(5)
    assert [p["v"] for p in res.explored] == list(draws)
    assert res.chosen["v"] == draws.max()
    assert list(res.resources) == [100, 200, 300, 400, 500, 1000]
    assert list(res.best_so_far) == list(np.maximum.accumulate(draws)) + [draws.max()]


def test_explore_exploit_degenerate():
    res = explore_exploit(50, MetaParams(0.1, 100), ValueSpace(), value_eval, np.random.default_rng(0))
    assert res.degenerate and res.n_explored == 0 and res.chosen["v"] == 0.5 and res.final_score == 0.5


def test_meta_sweep_mock():
    space = DiscreteSpace([pt_point(s) for s in (1, 2, 3)])
    profs = {"a": [profile("a", p, [v] * 4) for p, v in zip(space.points, (0.1, 0.5, 0.9))]}

    class Eval:
        def __init__(self, inst):
            self.by = {p.params: p.points[0].estimate for p in profs[inst]}

        def __call__(self, point, resource):
            return self.by[point]

    one = meta_sweep([MetaParams(0.5, 1.0)], [4.0, 8.0], ["a"], lambda i: space, Eval, n_rep=2)
    assert all(p.params == MetaParams(0.5, 1.0).to_point() for p in one.best_found.points)
    metas = [MetaParams(f, t) for f in (0.25, 0.5, 1.0) for t in (1.0, 2.0, 4.0)]
    res = meta_sweep(metas, [4.0, 8.0, 16.0], ["a"], lambda i: space, Eval, n_rep=3, window=1)
    table = np.array([[np.mean([explore_exploit(B, m, space, Eval("a"), rng_for(rep, c)).final_score
                                for rep in range(3)]) for c, B in enumerate((4.0, 8.0, 16.0))] for m in res.meta_points])
    assert np.allclose(res.mean_scores, table)
    for c in range(3):
        assert res.best_found.points[c].params == res.meta_points[int(np.argmax(table[:, c]))].to_point()


def rng_for(rep, c):
    from stochbench.seeding import substream
    return substream(0, "explore", "a", rep, c)


def test_splits():
    ids = [f"i{k}" for k in range(10)]
    splits = make_splits(ids, 10, 0.8, seed=1)
    assert len({s.test_ids for s in splits}) > 1
    for s in splits:
        assert len(s.train_ids) == 8 and len(s.test_ids) == 2
        assert set(s.train_ids) | set(s.test_ids) == set(ids) and not set(s.train_ids) & set(s.test_ids)
    full = make_splits(ids, 1, 1.0)
    assert full[0].train_ids == full[0].test_ids == tuple(sorted(ids))
    with pytest.raises(ValueError):
        make_splits(ids[:4], 2, 0.8)


def test_cross_validate_never_shows_test_ids():
    ids = [f"i{k}" for k in range(10)]
    seen_train = []

    def derive(train):
        seen_train.append(train)
        return train

    def evaluate(train, test):
        assert not set(train) & set(test)
        return {"s": {i: np.zeros((3, 2)) for i in test}}

    cv = cross_validate(ids, derive, evaluate, [1.0, 2.0], n_splits=4, seed=3)
    assert len(cv.rows["s"]) == 8
    for split, train in zip(cv.splits, seen_train):
        assert train == split.train_ids
