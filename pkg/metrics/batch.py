"""
Metric dispatch, averaging over scenarios and ranking of algorithms
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import get_config
from metrics.analysis import d_infinity, d_zero
from metrics.core import ErrorReport, MetricParams, TrajectorySet, WeightSchedule
from metrics.errors import DomainError
from metrics.exact import exact_metric
from metrics.lp import lp_metric
from metrics.ospa import ospa2
from metrics.schedules import ScheduleSpec, resolve_weights

logger = logging.getLogger(__name__)

METRIC_SELECTORS = ('tm', 'tm-lp', 'd0', 'dinf', 'ospa2')

# Relative tolerance under which two aggregates share a rank
RANK_TOLERANCE = 1e-9

Weights = Union[WeightSchedule, ScheduleSpec, None]


def _weights_for(weights: Weights, T: int) -> WeightSchedule:
    if isinstance(weights, WeightSchedule):
        return weights
    return resolve_weights(weights, T)


def evaluate(selector: str, X: TrajectorySet, Y: TrajectorySet, params: MetricParams,
             weights: Weights = None, max_workers: Optional[int] = None) -> ErrorReport:
    """
    Evaluate one metric by name.

    Args:
        selector: One of METRIC_SELECTORS
        X: Ground truth
        Y: Estimate
        params: Metric parameters (OSPA2 uses c, p and the base norm only)
        weights: Weight schedule or a spec resolved against X.T
        max_workers: Threads for independent clusters

    Returns:
        ErrorReport; for 'ospa2' the per-time arrays are zero and
        `decomposed` is False
    """
    if selector not in METRIC_SELECTORS:
        raise DomainError(f"unknown metric {selector!r}; expected one of {METRIC_SELECTORS}")

    if selector == 'ospa2':
        value = ospa2(X, Y, params.c, params.p, params.base)
        zeros = np.zeros(X.T)
        return ErrorReport('ospa2', value, params.p, zeros, zeros.copy(), zeros.copy(), zeros.copy(),
                           decomposed=False)

    schedule = _weights_for(weights, X.T)
    if selector == 'tm':
        return exact_metric(X, Y, params, schedule, max_workers=max_workers)
    if selector == 'tm-lp':
        return lp_metric(X, Y, params, schedule, max_workers=max_workers)
    if selector == 'd0':
        return d_zero(X, Y, params, schedule)
    return d_infinity(X, Y, params, schedule)


def aggregate(values: Sequence[float], p_prime: float) -> float:
    """((1/N) sum d_i^p') ^ (1/p')"""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("cannot aggregate an empty batch")
    if not (1 <= p_prime < np.inf):
        raise DomainError(f"p' must satisfy 1 <= p' < inf, got {p_prime}")
    return float(np.mean(values ** p_prime) ** (1.0 / p_prime))


@dataclass(frozen=True, eq=False)
class BatchResult:
    metric: str
    values: Tuple[float, ...]
    aggregate: float
    p_prime: float
    reports: Tuple[ErrorReport, ...] = ()


def _check_dimensions(pairs: Sequence[Tuple[TrajectorySet, TrajectorySet]]):
    dims = {s.dim for pair in pairs for s in pair if s.dim is not None}
    if len(dims) > 1:
        raise DomainError(f"scenarios have different state dimensions {sorted(dims)}")


def batch_metric(
    pairs: Sequence[Tuple[TrajectorySet, TrajectorySet]],
    selector: str,
    params: MetricParams,
    weights: Weights = None,
    p_prime: Optional[float] = None,
    max_workers: Optional[int] = None,
) -> BatchResult:
    """
    Evaluate a metric on every (truth, estimate) pair and average the values.

    Scenarios run concurrently; results keep the input order.
    """
    pairs = list(pairs)
    if not pairs:
        raise DomainError("cannot evaluate an empty batch")
    _check_dimensions(pairs)
    p_prime = params.p if p_prime is None else p_prime
    if max_workers is None:
        max_workers = int(get_config().get('max_workers', 4))
    workers = min(max(1, max_workers), len(pairs))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(evaluate, selector, X, Y, params, weights, 1) for X, Y in pairs]
            reports = [f.result() for f in futures]
    else:
        reports = [evaluate(selector, X, Y, params, weights) for X, Y in pairs]

    values = tuple(r.total for r in reports)
    result = BatchResult(selector, values, aggregate(values, p_prime), p_prime, tuple(reports))
    logger.debug(f"Batch of {len(pairs)} scenarios with {selector}: aggregate {result.aggregate:.6g}")
    return result


@dataclass(frozen=True)
class RankEntry:
    rank: int
    name: str
    value: float


def rank_algorithms(results: Mapping[str, Union[BatchResult, float]]) -> List[RankEntry]:
    """
    Sort algorithms by ascending aggregate. Values within RANK_TOLERANCE
    (relative) share a rank and are listed by name.
    """
    scored = sorted(
        ((r.aggregate if isinstance(r, BatchResult) else float(r), name) for name, r in results.items()),
        key=lambda item: item[0],
    )
    groups: List[List[Tuple[float, str]]] = []
    for value, name in scored:
        if groups:
            anchor = groups[-1][0][0]
            if abs(value - anchor) <= RANK_TOLERANCE * max(1.0, abs(anchor)):
                groups[-1].append((value, name))
                continue
        groups.append([(value, name)])

    ranking = []
    rank = 1
    for group in groups:
        for value, name in sorted(group, key=lambda item: item[1]):
            ranking.append(RankEntry(rank, name, value))
        rank += len(group)
    return ranking


def compare_algorithms(
    truths: Sequence[TrajectorySet],
    estimates: Mapping[str, Sequence[TrajectorySet]],
    selector: str,
    params: MetricParams,
    weights: Weights = None,
    p_prime: Optional[float] = None,
    max_workers: Optional[int] = None,
) -> Tuple[Dict[str, BatchResult], List[RankEntry]]:
    """
    Batch-evaluate several algorithms on the same truths and rank them.

    Args:
        truths: Ground truth of every scenario
        estimates: Algorithm name -> one estimate per scenario
    """
    if not estimates:
        raise DomainError("no algorithms to compare")
    results = {}
    for name, sets in estimates.items():
        if len(sets) != len(truths):
            raise DomainError(f"algorithm {name!r} has {len(sets)} estimates for {len(truths)} scenarios")
        results[name] = batch_metric(list(zip(truths, sets)), selector, params, weights, p_prime, max_workers)
    return results, rank_algorithms(results)
