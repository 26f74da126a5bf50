"""
Exact time-weighted multi-dimensional assignment metric.

The optimum over all assignment-vector sequences pi^1..pi^T is found by dynamic
programming on a trellis whose states at every step are the injective partial
maps {1..n} -> {0..m}. Independent clusters of trajectories are solved
separately (and concurrently) and recombined.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from config import get_config
from metrics.core import (
    ErrorReport,
    MetricParams,
    TargetSlice,
    TrajectorySet,
    WeightSchedule,
    build_report,
    check_compatible,
)
from metrics.costs import CostTensors, build_cost_tensors, pair_distance_tensor
from metrics.errors import CapacityError, DomainError

logger = logging.getLogger(__name__)

ExactResult = ErrorReport

# Relative slack used when picking the lexicographically smallest optimal trace
TRACE_TOLERANCE = 1e-12

# Largest |Pi|^2 for which the full switch matrix is kept in memory
SWITCH_CACHE_LIMIT = 4_000_000

SWITCH_CHUNK_ROWS = 512


# ---------------------------------------------------------------------------
# Assignment vectors
# ---------------------------------------------------------------------------

def count_assignment_vectors(n: int, m: int) -> int:
    """|Pi| = sum_k C(n, k) * P(m, k)"""
    return sum(math.comb(n, k) * math.perm(m, k) for k in range(min(n, m) + 1))


def iter_assignment_vectors(n: int, m: int) -> Iterator[Tuple[int, ...]]:
    """All valid assignment vectors in lexicographic order (0 = unassigned first)"""
    pi = [0] * n
    used = [False] * (m + 1)

    def _fill(i: int):
        if i == n:
            yield tuple(pi)
            return
        for v in range(m + 1):
            if v > 0 and used[v]:
                continue
            pi[i] = v
            if v > 0:
                used[v] = True
            yield from _fill(i + 1)
            if v > 0:
                used[v] = False
        pi[i] = 0

    yield from _fill(0)


def enumerate_assignment_vectors(n: int, m: int, limit: Optional[int] = None) -> np.ndarray:
    """
    Array (|Pi|, n) of every assignment vector, lexicographically sorted.

    Raises:
        CapacityError: |Pi| exceeds `limit`
    """
    count = count_assignment_vectors(n, m)
    if limit is not None and count > limit:
        raise CapacityError(
            f"{count} assignment vectors for n={n}, m={m} exceed the limit of {limit}; "
            f"use clustering or the LP metric"
        )
    states = np.zeros((count, n), dtype=np.int64)
    for idx, pi in enumerate(iter_assignment_vectors(n, m)):
        states[idx] = pi
    return states


def validate_pi(pi: Sequence[int], n: int, m: int) -> np.ndarray:
    """Check that pi is an assignment vector for (n, m); return it as an array"""
    arr = np.asarray(pi)
    if arr.shape != (n,):
        raise DomainError(f"assignment vector must have length {n}, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        raise DomainError("assignment vector entries must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < 0) or np.any(arr > m):
        raise DomainError(f"assignment vector entries must lie in 0..{m}, got {arr.tolist()}")
    assigned = arr[arr > 0]
    if assigned.size != np.unique(assigned).size:
        raise DomainError(f"assignment vector repeats an estimate: {arr.tolist()}")
    return arr


def switch_weights(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Sum over i of s(a_i, b_i) for every pair of rows of a and b.

    s is 0 when unchanged, 1 when both are assigned and differ, 1/2 otherwise.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    total = np.zeros((a.shape[0], b.shape[0]))
    for i in range(a.shape[1]):
        ai = a[:, i][:, None]
        bi = b[:, i][None, :]
        changed = ai != bi
        both = (ai > 0) & (bi > 0)
        total += np.where(changed, np.where(both, 1.0, 0.5), 0.0)
    return total


def stage_cost(slice_: TargetSlice, pi: Sequence[int], params: MetricParams) -> float:
    """
    p-powered cost at one time step for a fixed assignment vector.

    A pair (i, pi_i) counts as localisation only if both targets exist and are
    closer than c; every other existing target costs c^p / 2.
    """
    n, m = len(slice_.x), len(slice_.y)
    pi = validate_pi(pi, n, m)
    half = params.half_cutoff_pth
    cost = 0.0
    matched_y = set()
    for i, x in enumerate(slice_.x):
        j = int(pi[i]) - 1
        y = slice_.y[j] if j >= 0 else None
        if x is not None and y is not None:
            d = float(np.linalg.norm(np.asarray(x) - np.asarray(y), ord=params.base))
            if d < params.c:
                cost += d ** params.p
                matched_y.add(j)
                continue
        if x is not None:
            cost += half
    for j, y in enumerate(slice_.y):
        if y is not None and j not in matched_y:
            cost += half
    return cost


def switch_cost(pi_k: Sequence[int], pi_k1: Sequence[int], params: MetricParams) -> float:
    """gamma^p times the number of (half) track switches between two steps"""
    a = np.asarray(pi_k, dtype=np.int64)
    b = np.asarray(pi_k1, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError(f"assignment vectors differ in length: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return params.switch_pth * float(switch_weights(a[None, :], b[None, :])[0, 0])


# ---------------------------------------------------------------------------
# Trellis
# ---------------------------------------------------------------------------

def _columns(states: np.ndarray, m: int) -> np.ndarray:
    return np.where(states > 0, states - 1, m)


def _unused_mask(states: np.ndarray, m: int) -> np.ndarray:
    unused = np.ones((states.shape[0], m), dtype=bool)
    for i in range(states.shape[1]):
        rows = np.flatnonzero(states[:, i] > 0)
        unused[rows, states[rows, i] - 1] = False
    return unused


def stage_cost_matrix(D: np.ndarray, states: np.ndarray) -> np.ndarray:
    """(T, |Pi|) p-powered stage costs from (T, n+1, m+1) cost matrices"""
    T, n1, m1 = D.shape
    n, m = n1 - 1, m1 - 1
    cols = _columns(states, m)
    unused = _unused_mask(states, m).astype(float)
    rows = np.arange(n)
    out = np.empty((T, states.shape[0]))
    for k in range(T):
        assigned = D[k][rows[None, :], cols].sum(axis=1) if n else np.zeros(states.shape[0])
        out[k] = assigned + unused @ D[k, n, :m]
    return out


def trace_components(tensors: CostTensors, trace: np.ndarray, params: MetricParams, weights: WeightSchedule):
    """
    Weighted per-time (loc, miss, false, switch) of a fixed assignment trace.

    Returns raw arrays (no normalization). switch[k] is the cost k -> k+1.
    """
    T, n, m = tensors.T, tensors.n, tensors.m
    trace = np.asarray(trace, dtype=np.int64).reshape(T, n)
    parts = [weights.w1 * _trace_stage(tensor, trace, n, m)
             for tensor in (tensors.loc, tensors.miss, tensors.false)]
    switch = np.zeros(T)
    for k in range(T - 1):
        if n:
            switch[k] = weights.w2[k] * params.switch_pth * float(
                switch_weights(trace[k][None, :], trace[k + 1][None, :])[0, 0]
            )
    return parts[0], parts[1], parts[2], switch


def _trace_stage(tensor: np.ndarray, trace: np.ndarray, n: int, m: int) -> np.ndarray:
    T = tensor.shape[0]
    out = np.zeros(T)
    for k in range(T):
        pi = trace[k]
        cols = _columns(pi[None, :], m)[0]
        used = set(int(v) - 1 for v in pi if v > 0)
        out[k] = tensor[k, np.arange(n), cols].sum() + sum(tensor[k, n, j] for j in range(m) if j not in used)
    return out


class _SwitchMatrix:
    """Row access to the |Pi| x |Pi| switch matrix, cached when small enough"""

    def __init__(self, states: np.ndarray):
        self.states = states
        size = states.shape[0]
        self.full = switch_weights(states, states) if size * size <= SWITCH_CACHE_LIMIT else None

    def rows(self, start: int, stop: int) -> np.ndarray:
        if self.full is not None:
            return self.full[start:stop]
        return switch_weights(self.states[start:stop], self.states)

    def row(self, idx: int) -> np.ndarray:
        return self.rows(idx, idx + 1)[0]


def _first_within(values: np.ndarray) -> int:
    best = float(values.min())
    tol = TRACE_TOLERANCE * max(1.0, abs(best))
    return int(np.flatnonzero(values <= best + tol)[0])


def _solve_trellis(tensors: CostTensors, params: MetricParams, weights: WeightSchedule,
                   max_states: Optional[int]) -> np.ndarray:
    """Lexicographically smallest optimal trace, shape (T, n)"""
    T, n, m = tensors.T, tensors.n, tensors.m
    states = enumerate_assignment_vectors(n, m, limit=max_states)
    size = states.shape[0]
    logger.debug(f"Trellis n={n} m={m}: {size} states x {T} steps")
    if n == 0:
        return np.zeros((T, 0), dtype=np.int64)

    stage = stage_cost_matrix(tensors.total, states) * weights.w1[:, None]
    switch = _SwitchMatrix(states)
    gp = params.switch_pth

    values = [None] * T
    values[T - 1] = stage[T - 1]
    for k in range(T - 2, -1, -1):
        future = values[k + 1]
        best = np.empty(size)
        for start in range(0, size, SWITCH_CHUNK_ROWS):
            stop = min(start + SWITCH_CHUNK_ROWS, size)
            best[start:stop] = (weights.w2[k] * gp * switch.rows(start, stop) + future[None, :]).min(axis=1)
        values[k] = stage[k] + best

    trace = np.zeros((T, n), dtype=np.int64)
    current = _first_within(values[0])
    trace[0] = states[current]
    for k in range(T - 1):
        candidates = weights.w2[k] * gp * switch.row(current) + values[k + 1]
        current = _first_within(candidates)
        trace[k + 1] = states[current]
    return trace


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Cluster:
    """Independent subproblem: the trajectories of X and Y that can interact"""
    x_indices: Tuple[int, ...]
    y_indices: Tuple[int, ...]
    X: TrajectorySet
    Y: TrajectorySet


def cluster_split(X: TrajectorySet, Y: TrajectorySet, params: MetricParams) -> List[Cluster]:
    """
    Connected components of the "ever closer than c" relation between
    trajectories of X and Y. Unlinked trajectories form singleton clusters.
    """
    check_compatible(X, Y)
    n, m = len(X), len(Y)
    if n + m == 0:
        return []
    dist = pair_distance_tensor(X, Y, params.base)
    linked = np.any(np.nan_to_num(dist, nan=np.inf) < params.c, axis=0)
    ii, jj = np.nonzero(linked)
    graph = sparse.coo_matrix((np.ones(ii.size), (ii, n + jj)), shape=(n + m, n + m))
    n_comp, labels = connected_components(graph, directed=False)

    clusters = []
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        xs = tuple(int(v) for v in members if v < n)
        ys = tuple(int(v) - n for v in members if v >= n)
        clusters.append(Cluster(xs, ys, X.subset(xs), Y.subset(ys)))
    clusters.sort(key=lambda c: (c.x_indices[0] if c.x_indices else n, c.y_indices[0] if c.y_indices else m))
    logger.debug(f"Split n={n} m={m} into {len(clusters)} clusters: "
                 f"{[(len(c.x_indices), len(c.y_indices)) for c in clusters]}")
    return clusters


def _resolve_workers(max_workers: Optional[int]) -> int:
    if max_workers is None:
        max_workers = int(get_config().get('max_workers', 4))
    return max(1, max_workers)


def _solve_cluster(tensors: CostTensors, cluster: Cluster, params: MetricParams,
                   weights: WeightSchedule, max_states: Optional[int]):
    sub = tensors.subset(cluster.x_indices, cluster.y_indices)
    trace = _solve_trellis(sub, params, weights, max_states)
    return trace, trace_components(sub, trace, params, weights)


def exact_metric(
    X: TrajectorySet,
    Y: TrajectorySet,
    params: MetricParams,
    weights: Optional[WeightSchedule] = None,
    max_states: Optional[int] = None,
    max_workers: Optional[int] = None,
    cluster: bool = True,
) -> ErrorReport:
    """
    Time-weighted multi-dimensional assignment metric d(X, Y).

    Args:
        X: Ground truth
        Y: Estimate
        params: c, p, gamma, base norm and normalization
        weights: w1/w2 schedule, uniform if None
        max_states: Cap on |Pi| per cluster (config `max_assignment_states`)
        max_workers: Threads for independent clusters (config `max_workers`)
        cluster: Split into independent clusters first

    Returns:
        ErrorReport with the weighted decomposition and the assignment trace
    """
    weights = weights or WeightSchedule.uniform(X.T)
    check_compatible(X, Y, weights)
    if max_states is None:
        max_states = int(get_config().get('max_assignment_states', 50_000))

    tensors = build_cost_tensors(X, Y, params)
    T, n = X.T, len(X)
    if cluster:
        clusters = cluster_split(X, Y, params)
    else:
        clusters = [Cluster(tuple(range(n)), tuple(range(len(Y))), X, Y)]

    workers = min(_resolve_workers(max_workers), max(1, len(clusters)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_solve_cluster, tensors, c, params, weights, max_states) for c in clusters]
            solved = [f.result() for f in futures]
    else:
        solved = [_solve_cluster(tensors, c, params, weights, max_states) for c in clusters]

    trace = np.zeros((T, n), dtype=np.int64)
    parts = [np.zeros(T) for _ in range(4)]
    for c, (sub_trace, sub_parts) in zip(clusters, solved):
        for pos, i in enumerate(c.x_indices):
            local = sub_trace[:, pos]
            mapped = np.zeros(T, dtype=np.int64)
            hit = local > 0
            mapped[hit] = np.asarray(c.y_indices, dtype=np.int64)[local[hit] - 1] + 1
            trace[:, i] = mapped
        for acc, part in zip(parts, sub_parts):
            acc += part

    report = build_report('tm', params, *parts, assignment_trace=trace)
    logger.debug(f"Exact metric over {len(clusters)} clusters: {report.total:.6g}")
    return report


def exact_metric_bruteforce(
    X: TrajectorySet,
    Y: TrajectorySet,
    params: MetricParams,
    weights: Optional[WeightSchedule] = None,
    max_sequences: Optional[int] = None,
) -> ErrorReport:
    """
    Exhaustive minimisation over every assignment-vector sequence.

    Raises:
        CapacityError: |Pi|^T exceeds `max_sequences`
    """
    weights = weights or WeightSchedule.uniform(X.T)
    check_compatible(X, Y, weights)
    if max_sequences is None:
        max_sequences = int(get_config().get('bruteforce_max_sequences', 10_000_000))

    T, n, m = X.T, len(X), len(Y)
    size = count_assignment_vectors(n, m)
    if size ** T > max_sequences:
        raise CapacityError(f"{size}^{T} assignment sequences exceed the limit of {max_sequences}")

    tensors = build_cost_tensors(X, Y, params)
    states = enumerate_assignment_vectors(n, m)
    stage = stage_cost_matrix(tensors.total, states) * weights.w1[:, None]
    switch = switch_weights(states, states) * params.switch_pth

    acc = stage[0]
    for k in range(1, T):
        acc = acc[..., None] + weights.w2[k - 1] * switch + stage[k]
    flat = np.asarray(acc).reshape(-1)
    best = _first_within(flat)
    picks = np.unravel_index(best, (size,) * T)
    trace = np.stack([states[int(idx)] for idx in picks]).reshape(T, n)

    parts = trace_components(tensors, trace, params, weights)
    return build_report('tm', params, *parts, assignment_trace=trace)
