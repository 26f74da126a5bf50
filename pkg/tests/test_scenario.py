import numpy as np
import pytest

from cli.commands import benchmark_variants
from cli.reports import ranking_order
from cli.scenario import SCENARIO_FILES, cmd_generate_benchmark_scenario, generate_benchmark_scenario
from metrics.batch import evaluate, rank_algorithms
from metrics.core import MetricParams, load_trajectory_set, save_trajectory_set
from metrics.errors import DomainError
from metrics.exact import cluster_split
from metrics.lp import lp_metric
from metrics.schedules import ScheduleSpec, make_schedule

ESTIMATES = ('e1', 'e2', 'e3', 'e4')
RHO = 0.995


@pytest.fixture(scope='module')
def scenario():
    return generate_benchmark_scenario(separation=100.0, seed=0)


@pytest.fixture(scope='module')
def tail():
    w1 = make_schedule(ScheduleSpec('online-exp-normalized', rho=RHO), 800).w1

    def _tail(step):
        return float(w1[step - 1:].sum())
    _tail.weights = w1
    return _tail


def _table(scenario, label):
    (_, selector, params, schedule), = [v for v in benchmark_variants('tm', 5.0, 1.0, 10.0, RHO) if v[0] == label]
    return {name: evaluate(selector, scenario['truth'], scenario[name], params, schedule) for name in ESTIMATES}


def test_geometry(scenario):
    truth = scenario['truth']
    assert truth.T == 800
    assert truth.labels == ('X1', 'X2')
    x = truth.state_tensor[:, :, 0]
    e1 = scenario['e1'].state_tensor[:, :, 0]
    assert np.all(x[:, 0] == 0.0) and np.all(x[:, 1] == 100.0)
    assert np.all(np.abs(e1 - x) == 3.0)

    k = np.arange(1, 801)
    e2 = scenario['e2'].state_tensor[:, :, 0]
    assert np.array_equal(e2[k < 250], e1[k < 250])
    assert np.array_equal(e2[k >= 250], e1[k >= 250][:, ::-1])
    e3 = scenario['e3'].state_tensor[:, :, 0]
    assert np.array_equal(e3[k >= 650], e1[k >= 650][:, ::-1])
    e4 = scenario['e4'].state_tensor[:, :, 0]
    assert np.all(e4[k >= 550, 1] == 150.0)
    assert np.array_equal(e4[k < 550], e1[k < 550])


def test_generation_is_deterministic(tmp_path):
    first = cmd_generate_benchmark_scenario(tmp_path / 'a', seed=7)
    second = cmd_generate_benchmark_scenario(tmp_path / 'b', seed=7)
    assert [p.name for p in first] == [f'{name}.json' for name in SCENARIO_FILES]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
    loaded = load_trajectory_set(first[1])
    assert save_trajectory_set(loaded) == first[1].read_bytes()


def test_generation_rejects_ambiguous_geometry():
    with pytest.raises(DomainError):
        generate_benchmark_scenario(separation=10.0)
    with pytest.raises(DomainError):
        generate_benchmark_scenario(early_swap=0)


def test_clean_estimate_splits_into_single_pairs(scenario):
    params = MetricParams(c=5.0, p=1.0, gamma=10.0)
    clusters = cluster_split(scenario['truth'], scenario['e1'], params)
    assert [(c.x_indices, c.y_indices) for c in clusters] == [((0,), (0,)), ((1,), (1,))]


def test_time_averaged_metric(scenario):
    table = _table(scenario, 'TM')
    expected = {'e1': 6.0, 'e2': 6.025, 'e3': 6.025, 'e4': 6.6275}
    for name, value in expected.items():
        assert table[name].total == pytest.approx(value, abs=1e-9)
    e4 = table['e4'].components
    assert e4['loc'] == pytest.approx(5.05875, abs=1e-9)
    assert e4['miss'] == pytest.approx(0.784375, abs=1e-9)
    assert e4['false'] == pytest.approx(0.784375, abs=1e-9)
    # the early swap is charged on the transition 249 -> 250
    assert table['e2'].switch[248] == pytest.approx(20.0 / 800)
    assert ranking_order(rank_algorithms({n.upper(): r.total for n, r in table.items()})) == 'E1-{E2,E3}-E4'


def test_time_weighted_metric(scenario, tail):
    table = _table(scenario, 'TW-TM')
    w = tail.weights
    assert table['e1'].total == pytest.approx(6.0, abs=1e-9)
    assert table['e2'].total == pytest.approx(6.0 + 20.0 * w[249], abs=1e-9)
    assert table['e3'].total == pytest.approx(6.0 + 20.0 * w[649], abs=1e-9)
    assert table['e4'].total == pytest.approx(6.0 + 2.0 * tail(550), abs=1e-9)
    assert table['e2'].total == pytest.approx(6.00647, abs=1e-5)
    assert table['e3'].total == pytest.approx(6.04802, abs=1e-5)
    assert table['e4'].total == pytest.approx(7.4581, abs=1e-4)
    assert table['e4'].components['loc'] == pytest.approx(3.8129, abs=1e-4)
    assert ranking_order(rank_algorithms({n.upper(): r.total for n, r in table.items()})) == 'E1-E2-E3-E4'


def test_ospa2_ranks_the_lost_target_second(scenario):
    table = _table(scenario, 'OSPA2')
    expected = {'e1': 3.0, 'e2': 3.6225, 'e3': 3.3775, 'e4': 3.31375}
    for name, value in expected.items():
        assert table[name].total == pytest.approx(value, abs=1e-9)
    assert ranking_order(rank_algorithms({n.upper(): r.total for n, r in table.items()})) == 'E1-E4-E3-E2'


def test_fixed_assignment_limits(scenario, tail):
    uniform = _table(scenario, 'TM(g=1e8)')
    expected = {'e1': 6.0, 'e2': 7.245, 'e3': 6.755, 'e4': 6.6275}
    for name, value in expected.items():
        assert uniform[name].total == pytest.approx(value, abs=1e-9)
    assert ranking_order(rank_algorithms({n.upper(): r.total for n, r in uniform.items()})) == 'E1-E4-E3-E2'

    weighted = _table(scenario, 'TW-TM(g=1e8)')
    for name, swap in (('e2', 250), ('e3', 650)):
        t = tail(swap)
        assert weighted[name].total == pytest.approx(6.0 + 4.0 * min(t, 1.0 - t), abs=1e-9)
    assert weighted['e2'].total == pytest.approx(6.1835, abs=1e-4)
    assert weighted['e3'].total == pytest.approx(7.8373, abs=1e-4)
    assert ranking_order(rank_algorithms({n.upper(): r.total for n, r in weighted.items()})) == 'E1-E2-E4-E3'


@pytest.mark.slow
def test_relaxation_on_benchmark(scenario):
    params = MetricParams(c=5.0, p=1.0, gamma=10.0, normalization='window')
    clean = lp_metric(scenario['truth'], scenario['e1'], params)
    assert clean.total == pytest.approx(6.0, abs=1e-8)
    assert clean.soft_assignments.shape == (800, 3, 3)
    swapped = lp_metric(scenario['truth'], scenario['e2'], params)
    assert swapped.total <= 6.025 + 1e-8
