"""
Shared fixtures, random instance builders and hypothesis strategies
"""
import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

import config
from metrics.core import MetricParams, Trajectory, TrajectorySet


@pytest.fixture(autouse=True)
def default_config(tmp_path, monkeypatch):
    """Isolate every test from the user's config file"""
    monkeypatch.setattr(config, 'CONFIG_DIR', tmp_path / 'home')
    monkeypatch.setattr(config, 'CONFIG_FILE', tmp_path / 'home' / 'config.json')
    config.set_config(dict(config.DEFAULT_CONFIG))
    yield
    config.reset_config_cache()


def line(values, birth=1, label=''):
    """1-D trajectory from a list of positions (None = hole)"""
    rows = [None if v is None else [float(v)] for v in values]
    return Trajectory.from_rows(birth, rows, label)


def random_trajectory(rng, T, dim=1, holes=True, label=''):
    birth = int(rng.randint(1, T + 1))
    end = int(rng.randint(birth, T + 1))
    length = end - birth + 1
    states = rng.uniform(0.0, 10.0, size=(length, dim))
    present = np.ones(length, dtype=bool)
    if holes and length > 2:
        present[1:-1] = rng.uniform(size=length - 2) > 0.3
    return Trajectory(birth=birth, states=states, present=present, label=label)


def random_trajectory_set(rng, T, n_max=2, dim=1, holes=True, n=None):
    count = int(rng.randint(0, n_max + 1)) if n is None else n
    return TrajectorySet(T, tuple(random_trajectory(rng, T, dim, holes, f't{i}') for i in range(count)))


def random_params(rng, gamma=None, normalization='none'):
    c = float(rng.choice([3.0, 5.0]))
    p = float(rng.choice([1.0, 2.0]))
    g = float(rng.choice([1.0, 4.0])) if gamma is None else gamma
    return MetricParams(c=c, p=p, gamma=g, normalization=normalization)


@st.composite
def instance_pairs(draw, max_T=5, n_max=2, holes=True):
    """(X, Y, params, rng) with a shared window of length <= max_T"""
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.RandomState(seed)
    T = int(rng.randint(1, max_T + 1))
    X = random_trajectory_set(rng, T, n_max, holes=holes)
    Y = random_trajectory_set(rng, T, n_max, holes=holes)
    return X, Y, random_params(rng), rng


@st.composite
def instance_triples(draw, max_T=5, n_max=2, holes=True):
    """(X, Z, Y, params) over a shared window"""
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.RandomState(seed)
    T = int(rng.randint(1, max_T + 1))
    X, Z, Y = (random_trajectory_set(rng, T, n_max, holes=holes) for _ in range(3))
    return X, Z, Y, random_params(rng)


@st.composite
def target_set_pairs(draw, max_size=4, dim=2):
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.RandomState(seed)
    x = rng.uniform(0.0, 10.0, size=(rng.randint(0, max_size + 1), dim))
    y = rng.uniform(0.0, 10.0, size=(rng.randint(0, max_size + 1), dim))
    c = float(rng.choice([1.0, 5.0]))
    p = float(rng.choice([1.0, 2.0]))
    return x, y, MetricParams(c=c, p=p)


def iter_matchings(n, m):
    """Every one-to-one partial matching as a tuple of (row, col) pairs"""
    for k in range(min(n, m) + 1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                yield tuple(zip(rows, cols))


def brute_force_gospa(x, y, params):
    """Minimum of the GOSPA objective over all assignment sets"""
    x = np.asarray(x, dtype=float).reshape(len(x), -1) if len(x) else np.empty((0, 1))
    y = np.asarray(y, dtype=float).reshape(len(y), -1) if len(y) else np.empty((0, 1))
    half = params.c ** params.p / 2.0
    best = np.inf
    for theta in iter_matchings(len(x), len(y)):
        cost = sum(min(params.c, float(np.linalg.norm(x[i] - y[j]))) ** params.p for i, j in theta)
        cost += half * (len(x) + len(y) - 2 * len(theta))
        best = min(best, cost)
    return best ** (1.0 / params.p)


def brute_force_assignment(cost, row_cost, col_cost):
    n, m = cost.shape
    best = np.inf
    for theta in iter_matchings(n, m):
        rows = {i for i, _ in theta}
        cols = {j for _, j in theta}
        value = sum(cost[i, j] for i, j in theta)
        value += sum(row_cost[i] for i in range(n) if i not in rows)
        value += sum(col_cost[j] for j in range(m) if j not in cols)
        best = min(best, value)
    return best
