import numpy as np
import pytest
from hypothesis import given, settings

from conftest import instance_pairs, instance_triples, line, random_trajectory_set
from metrics.core import MetricParams, TargetSlice, TrajectorySet, WeightSchedule, target_slice
from metrics.costs import build_cost_tensors
from metrics.errors import CapacityError, DomainError
from metrics.exact import (
    cluster_split,
    count_assignment_vectors,
    enumerate_assignment_vectors,
    exact_metric,
    exact_metric_bruteforce,
    stage_cost,
    stage_cost_matrix,
    switch_cost,
    validate_pi,
)

PARAMS = MetricParams(c=5.0, p=1.0, gamma=10.0)


def _state(v):
    return None if v is None else np.array([float(v)])


def _slice(x, y):
    return TargetSlice(k=1, x=tuple(_state(v) for v in x), y=tuple(_state(v) for v in y))


def test_stage_cost_examples():
    assert stage_cost(_slice([None], [None]), [1], PARAMS) == 0.0
    assert stage_cost(_slice([0.0], [3.0]), [1], PARAMS) == 3.0
    assert stage_cost(_slice([0.0], [7.0]), [1], PARAMS) == 5.0
    assert stage_cost(_slice([0.0], [3.0]), [0], PARAMS) == 5.0
    assert stage_cost(_slice([0.0, None], [None, 1.0]), [2, 1], PARAMS) == 1.0
    assert stage_cost(_slice([0.0, None], [None, 1.0]), [1, 2], PARAMS) == 5.0


def test_stage_cost_rejects_invalid_vector():
    with pytest.raises(DomainError):
        stage_cost(_slice([0.0, 1.0], [0.0, 1.0]), [1, 1], PARAMS)
    with pytest.raises(DomainError):
        stage_cost(_slice([0.0], [0.0]), [2], PARAMS)


def test_switch_cost_examples():
    assert switch_cost([1, 2], [1, 2], PARAMS) == 0.0
    assert switch_cost([1], [2], PARAMS) == 10.0
    assert switch_cost([1], [0], PARAMS) == 5.0
    assert switch_cost([0], [2], PARAMS) == 5.0
    assert switch_cost([1, 2], [2, 1], MetricParams(c=5.0, p=2.0, gamma=10.0)) == 200.0


def test_assignment_vector_enumeration():
    assert count_assignment_vectors(2, 2) == 7
    assert count_assignment_vectors(3, 1) == 4
    states = enumerate_assignment_vectors(2, 2)
    assert states.tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 2], [2, 0], [2, 1]]
    assert enumerate_assignment_vectors(0, 3).shape == (1, 0)
    with pytest.raises(CapacityError):
        enumerate_assignment_vectors(4, 4, limit=100)


def test_validate_pi():
    assert validate_pi([0, 2], 2, 2).tolist() == [0, 2]
    for bad in ([1], [1, 1], [-1, 0], [0, 3], [0.5, 1.0]):
        with pytest.raises(DomainError):
            validate_pi(bad, 2, 2)


def test_identity_gives_zero_and_matching_trace():
    X = TrajectorySet(4, (line([0.0, 1.0, 2.0, 3.0]), line([9.0, 8.0], birth=2)))
    report = exact_metric(X, X, PARAMS)
    assert report.total == 0.0
    assert report.assignment_trace[:, 0].tolist() == [1, 1, 1, 1]
    assert report.assignment_trace[1:3, 1].tolist() == [2, 2]


def _swap_analogue(T=14, swap=8, offset=3.0, separation=100.0):
    X = TrajectorySet(T, (line([0.0] * T, label='X1'), line([separation] * T, label='X2')))
    k = np.arange(1, T + 1)
    y1 = np.where(k >= swap, separation + offset, offset)
    y2 = np.where(k >= swap, offset, separation + offset)
    Y = TrajectorySet(T, (line(y1, label='Y1'), line(y2, label='Y2')))
    return X, Y


def test_swap_analogue_switches_once():
    X, Y = _swap_analogue()
    params = MetricParams(c=5.0, p=1.0, gamma=10.0, normalization='window')
    exact = exact_metric(X, Y, params)
    # both halves are long enough that a switch beats keeping either pairing
    assert exact.total == pytest.approx((6.0 * 14 + 20.0) / 14)
    assert exact.switch[6] == pytest.approx(20.0 / 14)
    assert exact.switch.sum() == pytest.approx(20.0 / 14)
    assert exact.loc.sum() == pytest.approx(6.0)
    assert exact.assignment_trace[:7].tolist() == [[1, 2]] * 7
    assert exact.assignment_trace[7:].tolist() == [[2, 1]] * 7
    assert exact_metric(X, Y, params, cluster=False).total == pytest.approx(exact.total, abs=1e-12)


@pytest.mark.slow
def test_short_swap_prefers_a_fixed_pairing():
    X, Y = _swap_analogue(T=8, swap=3)
    exact = exact_metric(X, Y, PARAMS)
    brute = exact_metric_bruteforce(X, Y, PARAMS)
    assert exact.total == pytest.approx(brute.total, abs=1e-12)
    assert exact.total == pytest.approx(2 * 10.0 + 6 * 6.0)
    assert exact.switch.sum() == 0.0


def test_single_pair_two_steps_matches_bruteforce():
    X = TrajectorySet(2, (line([0.0, 1.0]),))
    Y = TrajectorySet(2, (line([0.5, 4.0]),))
    params = MetricParams(c=2.0, p=1.0, gamma=1.0)
    assert exact_metric(X, Y, params).total == pytest.approx(exact_metric_bruteforce(X, Y, params).total, abs=1e-12)


def test_bruteforce_cap():
    X, Y = _swap_analogue(T=8)
    with pytest.raises(CapacityError):
        exact_metric_bruteforce(X, Y, PARAMS, max_sequences=1000)


def test_trellis_cap():
    X = TrajectorySet(2, tuple(line([1.0, 1.0], label=f'x{i}') for i in range(4)))
    Y = TrajectorySet(2, tuple(line([1.5, 1.5], label=f'y{i}') for i in range(4)))
    with pytest.raises(CapacityError):
        exact_metric(X, Y, PARAMS, max_states=100)


def test_mismatched_windows_rejected():
    X = TrajectorySet(3, (line([0.0]),))
    Y = TrajectorySet(4, (line([0.0]),))
    with pytest.raises(DomainError):
        exact_metric(X, Y, PARAMS)
    with pytest.raises(DomainError):
        exact_metric(X, X, PARAMS, WeightSchedule.uniform(4))


def test_cluster_split_components():
    X = TrajectorySet(3, (line([0.0, 0.0, 0.0]), line([100.0, 100.0, 100.0])))
    Y = TrajectorySet(3, (line([101.0, 101.0, 101.0]), line([1.0, 1.0, 1.0]), line([500.0])))
    clusters = cluster_split(X, Y, PARAMS)
    assert [(c.x_indices, c.y_indices) for c in clusters] == [((0,), (1,)), ((1,), (0,)), ((), (2,))]

    Y_close = TrajectorySet(3, (line([1.0, 1.0, 99.0]), line([99.0, 99.0, 1.0])))
    assert len(cluster_split(X, Y_close, PARAMS)) == 1


@settings(max_examples=200, deadline=None)
@given(instance_pairs())
def test_exact_equals_bruteforce(case):
    X, Y, params, rng = case
    T = X.T
    weights = WeightSchedule(rng.uniform(0.2, 2.0, size=T), rng.uniform(0.2, 2.0, size=T - 1))
    exact = exact_metric(X, Y, params, weights)
    brute = exact_metric_bruteforce(X, Y, params, weights)
    assert exact.total == pytest.approx(brute.total, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(instance_pairs())
def test_decomposition_closure(case):
    X, Y, params, _ = case
    report = exact_metric(X, Y, params)
    assert report.total ** params.p == pytest.approx(report.pth_total, abs=1e-9)
    assert report.switch[-1] == 0.0


@settings(max_examples=100, deadline=None)
@given(instance_pairs())
def test_clustering_reproduces_global_value(case):
    X, Y, params, _ = case
    clustered = exact_metric(X, Y, params, cluster=True)
    whole = exact_metric(X, Y, params, cluster=False)
    assert clustered.total == pytest.approx(whole.total, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(instance_pairs())
def test_weight_scaling(case):
    X, Y, params, rng = case
    lam = float(rng.uniform(0.1, 5.0))
    base = exact_metric(X, Y, params)
    scaled = exact_metric(X, Y, params, WeightSchedule.uniform(X.T).scaled(lam))
    assert scaled.total == pytest.approx(lam ** (1.0 / params.p) * base.total, rel=1e-9, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(instance_triples(holes=False))
def test_metric_axioms(case):
    X, Z, Y, params = case
    d_xy = exact_metric(X, Y, params).total
    assert d_xy >= 0.0
    assert exact_metric(X, X, params).total < 1e-9
    if not X.same_trajectories(Y):
        assert d_xy > 0.0
    assert abs(d_xy - exact_metric(Y, X, params).total) <= 1e-9
    assert d_xy <= exact_metric(X, Z, params).total + exact_metric(Z, Y, params).total + 1e-9


def test_threads_do_not_change_result():
    rng = np.random.RandomState(11)
    X = random_trajectory_set(rng, 6, n_max=3, n=3)
    Y = random_trajectory_set(rng, 6, n_max=3, n=3)
    params = MetricParams(c=3.0, p=1.0, gamma=2.0)
    serial = exact_metric(X, Y, params, max_workers=1)
    threaded = exact_metric(X, Y, params, max_workers=4)
    assert serial.total == threaded.total
    assert serial.assignment_trace.tolist() == threaded.assignment_trace.tolist()


@settings(max_examples=50, deadline=None)
@given(instance_pairs())
def test_stage_cost_agrees_with_cost_tensors(case):
    X, Y, params, _ = case
    tensors = build_cost_tensors(X, Y, params)
    states = enumerate_assignment_vectors(len(X), len(Y))
    table = stage_cost_matrix(tensors.total, states)
    for k in range(1, X.T + 1):
        current = target_slice(X, Y, k)
        for idx, pi in enumerate(states):
            assert stage_cost(current, pi, params) == pytest.approx(table[k - 1, idx], abs=1e-12)
