import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochbench.model import ParameterPoint, SampleRecord, SampleSet
from stochbench.profiles import (AlignmentError, DegenerateInstanceError, PerformanceProfile, ProfilePoint,
                                 ResourceGrid, aggregate_instances, bootstrap_kcurve, bootstrap_profile,
                                 draws_for_resource, expected_best_of_k, kcurves_to_csv, performance_score,
                                 pool_scores, profiles_to_csv, read_profiles_csv)

POINT = ParameterPoint.make("pt", {"n_replicas": 1, "sweeps": 1, "p_cold": 0.5, "p_hot": 0.5})


def make_pool(scores, cost=1.0, inst="toy", point=POINT):
    # energies are -score with optimum -1, so the score of each record is the value itself
    return SampleSet(inst, "pt", point, [SampleRecord(-float(s), cost, i) for i, s in enumerate(scores)])


def enumerate_best_of_k(values, k):
    return np.mean([max(c) for c in itertools.product(values, repeat=k)])


def test_performance_score():
    assert performance_score(-100, -100, 0) == 1
    assert performance_score(0, -100, 0) == 0
    assert performance_score(-50, -100, 0) == 0.5
    assert performance_score(10, -100, 0) < 0
    with pytest.raises(DegenerateInstanceError):
        performance_score(-1, 0, 0)


def test_planted_best_scores_one(ferro_pair):
    pool = SampleSet("ferro", "pt", POINT, [SampleRecord(-2.0, 1.0, 0)])
    assert pool_scores(pool, ferro_pair)[0] == 1.0


def test_draws_for_resource():
    assert draws_for_resource(0.5, 1.0) == 1
    assert draws_for_resource(3.0, 1.0) == 3
    assert draws_for_resource(0.3 * 10, 0.3) == 10


def test_grid():
    g = ResourceGrid.logspace(1, 100, 3)
    assert np.allclose(g.values, [1, 10, 100]) and g.r_f == 100
    with pytest.raises(ValueError):
        ResourceGrid((2.0, 1.0))


def test_worked_values():
    pool = make_pool([0.2, 0.5, 1.0])
    prof = bootstrap_profile(pool, ResourceGrid((1.0, 2.0)), n_boot=100_000, scores=np.array([0.2, 0.5, 1.0]))
    assert abs(prof.points[0].estimate - 1.7 / 3) < 0.01
    assert abs(prof.points[1].estimate - 6.7 / 9) < 0.01


def test_exact_expectation_matches_enumeration():
    values = np.array([0.1, 0.3, 0.3, 0.9])
    exact = expected_best_of_k(np.sort(values), [1, 2, 3])[0]
    for k in (1, 2, 3):
        assert exact[k - 1] == pytest.approx(enumerate_best_of_k(values, k), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from([-0.5, 0.0, 0.25, 0.7, 1.0]), min_size=1, max_size=4))
def test_expectation_monotone_in_k(values):
    exact = [enumerate_best_of_k(values, k) for k in (1, 2, 3)]
    assert exact[0] <= exact[1] + 1e-12 and exact[1] <= exact[2] + 1e-12
    fast = expected_best_of_k(np.sort(values), [1, 2, 3])[0]
    assert np.allclose(fast, exact, rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=30), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_bootstrap_curve_bounded_and_monotone(scores, k_max, seed):
    scores = np.array(scores)
    curve = bootstrap_kcurve(scores, k_max, 200, np.random.default_rng(seed))
    assert np.all(curve >= scores.min()) and np.all(curve <= scores.max())
    assert np.all(np.diff(curve) >= 0)


def test_constant_pool_has_zero_width():
    pool = make_pool([0.4] * 10)
    prof = bootstrap_profile(pool, ResourceGrid((1.0, 3.0, 10.0)), n_boot=200, scores=np.full(10, 0.4))
    for p in prof.points:
        assert p.estimate == p.ci_low == p.ci_high == 0.4


def test_ci_contains_estimate_and_is_deterministic():
    rng = np.random.default_rng(0)
    scores = rng.random(50)
    pool = make_pool(scores)
    grid = ResourceGrid.logspace(1, 50, 6)
    a = bootstrap_profile(pool, grid, n_boot=300, scores=scores, seed=5)
    b = bootstrap_profile(pool, grid, n_boot=300, scores=scores, seed=5)
    assert a.points == b.points
    for p in a.points:
        assert p.ci_low <= p.estimate <= p.ci_high


def test_ci_shrinks_with_pool_size():
    widths_small, widths_big = [], []
    for rep in range(20):
        rng = np.random.default_rng(rep)
        for size, out in ((25, widths_small), (100, widths_big)):
            scores = rng.random(size)
            prof = bootstrap_profile(make_pool(scores), ResourceGrid((2.0,)), n_boot=200, scores=scores, seed=rep)
            out.append(prof.points[0].ci_high - prof.points[0].ci_low)
    assert np.median(widths_big) < np.median(widths_small)


def test_pool_errors():
    pool = make_pool([0.1, 0.2])
    with pytest.raises(ValueError):
        bootstrap_profile(pool, ResourceGrid((5.0,)), scores=np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        bootstrap_profile(pool, ResourceGrid((1.0,)), n_boot=50, scores=np.array([0.1, 0.2]))


def constant_profile(value, inst, grid=(1.0, 2.0, 4.0)):
    return PerformanceProfile(inst, "pt", POINT, [ProfilePoint(r, value, value, value, 100) for r in grid])


def test_aggregate_examples():
    single = constant_profile(0.3, "a")
    agg = aggregate_instances([single], n_boot=200)
    assert [p.estimate for p in agg.points] == [0.3] * 3
    two = aggregate_instances([constant_profile(0.2, "a"), constant_profile(0.8, "b")], n_boot=200)
    assert np.allclose(two.estimates, 0.5)
    with pytest.raises(AlignmentError):
        aggregate_instances([constant_profile(0.2, "a"), constant_profile(0.8, "b", grid=(1.0, 3.0, 4.0))])


def test_aggregate_median_matches_sort_and_pick():
    rng = np.random.default_rng(3)
    values = rng.random((5, 4))
    profs = [PerformanceProfile(f"i{k}", "pt", POINT, [ProfilePoint(float(r + 1), v, v, v, 100)
                                                      for r, v in enumerate(row)]) for k, row in enumerate(values)]
    agg = aggregate_instances(profs, statistic="median", n_boot=200)
    for c in range(4):
        assert agg.points[c].estimate == sorted(values[:, c])[2]
        assert agg.points[c].ci_low <= agg.points[c].estimate <= agg.points[c].ci_high


def test_csv_round_trip():
    scores = np.linspace(0, 1, 8)
    prof = bootstrap_profile(make_pool(scores), ResourceGrid((1.0, 4.0)), n_boot=100, scores=scores)
    text = profiles_to_csv([prof])
    assert text.splitlines()[0] == "instance_id,solver_id,param_hash,resource,estimate,ci_low,ci_high,n_boot"
    back = read_profiles_csv(text, {POINT.key: POINT}, kcurves_to_csv([prof]))[0]
    assert back.points == prof.points and back.params == POINT
    assert np.array_equal(back.kcurve, prof.kcurve) and back.mean_cost == prof.mean_cost
    assert back.expected_at(4.0) == prof.points[1].estimate
