import numpy as np
import pytest

from conftest import line, random_trajectory_set
from metrics.batch import (
    BatchResult,
    aggregate,
    batch_metric,
    compare_algorithms,
    evaluate,
    rank_algorithms,
)
from metrics.core import MetricParams, Trajectory, TrajectorySet
from metrics.errors import DomainError
from metrics.exact import exact_metric
from metrics.schedules import ScheduleSpec

PARAMS = MetricParams(c=5.0, p=1.0, gamma=10.0)


def _pair(seed, T=4):
    rng = np.random.RandomState(seed)
    return random_trajectory_set(rng, T), random_trajectory_set(rng, T)


def test_aggregate():
    assert aggregate([2.0], 1.0) == 2.0
    assert aggregate([3.0, 4.0], 2.0) == pytest.approx(np.sqrt(12.5))
    assert aggregate([1.0, 3.0], 1.0) == 2.0
    with pytest.raises(DomainError):
        aggregate([], 1.0)
    with pytest.raises(DomainError):
        aggregate([1.0], 0.5)
    with pytest.raises(DomainError):
        aggregate([1.0], float('inf'))


@pytest.mark.parametrize('selector', ['tm', 'tm-lp', 'd0', 'dinf', 'ospa2'])
def test_single_scenario_batch_equals_metric(selector):
    X, Y = _pair(1)
    result = batch_metric([(X, Y)], selector, PARAMS)
    assert result.p_prime == PARAMS.p
    assert result.aggregate == pytest.approx(evaluate(selector, X, Y, PARAMS).total, abs=1e-12)


def test_identical_scenarios_average_to_the_single_value():
    X, Y = _pair(2)
    params = MetricParams(c=3.0, p=2.0, gamma=4.0)
    single = exact_metric(X, Y, params).total
    result = batch_metric([(X, Y)] * 5, 'tm', params, p_prime=3.0)
    assert result.values == (single,) * 5
    assert result.aggregate == pytest.approx(single, rel=1e-12)


def test_batch_is_permutation_invariant():
    pairs = [_pair(seed) for seed in range(6)]
    forward = batch_metric(pairs, 'tm', PARAMS, max_workers=3)
    backward = batch_metric(pairs[::-1], 'tm', PARAMS, max_workers=1)
    assert forward.values == backward.values[::-1]
    assert forward.aggregate == pytest.approx(backward.aggregate, rel=1e-12)


def test_batch_resolves_schedule_per_window():
    pairs = [_pair(seed, T=3) for seed in range(2)] + [_pair(seed, T=5) for seed in range(2)]
    spec = ScheduleSpec('online-exp-normalized', rho=0.9)
    result = batch_metric(pairs, 'tm', PARAMS, weights=spec)
    assert len(result.reports) == 4
    assert [r.T for r in result.reports] == [3, 3, 5, 5]


def test_batch_errors():
    X, Y = _pair(3)
    with pytest.raises(DomainError):
        batch_metric([], 'tm', PARAMS)
    with pytest.raises(DomainError):
        batch_metric([(X, Y)], 'gospa', PARAMS)
    planar = TrajectorySet(4, (Trajectory.from_rows(1, [[0.0, 0.0]], 'p'),))
    flat = TrajectorySet(4, (line([1.0]),))
    with pytest.raises(DomainError):
        batch_metric([(flat, flat), (planar, planar)], 'tm', PARAMS)


def test_ospa2_report_is_not_decomposed():
    X, Y = _pair(4)
    report = evaluate('ospa2', X, Y, PARAMS)
    assert not report.decomposed
    assert report.loc.shape == (X.T,)


def test_ranking_orders_by_aggregate_and_breaks_ties_by_name():
    ranking = rank_algorithms({'b': 2.0, 'a': 2.0 + 1e-12, 'c': 1.0, 'd': 3.0})
    assert [(e.rank, e.name) for e in ranking] == [(1, 'c'), (2, 'a'), (2, 'b'), (4, 'd')]


def test_ranking_accepts_batch_results():
    results = {
        'slow': BatchResult('tm', (4.0,), 4.0, 1.0),
        'fast': BatchResult('tm', (1.0,), 1.0, 1.0),
    }
    assert [e.name for e in rank_algorithms(results)] == ['fast', 'slow']


def test_compare_algorithms():
    T = 5
    truth = TrajectorySet(T, (line([0.0] * T),))
    close = TrajectorySet(T, (line([1.0] * T),))
    far = TrajectorySet(T, (line([2.0] * T),))
    results, ranking = compare_algorithms([truth, truth], {'far': [far, far], 'close': [close, far]}, 'tm', PARAMS)
    assert results['close'].values == (5.0, 10.0)
    assert results['far'].aggregate == 10.0
    assert [e.name for e in ranking] == ['close', 'far']

    with pytest.raises(DomainError):
        compare_algorithms([truth], {'short': []}, 'tm', PARAMS)
    with pytest.raises(DomainError):
        compare_algorithms([truth], {}, 'tm', PARAMS)
