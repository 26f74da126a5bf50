"""
Bound distances around the trajectory metric and the inequality chain
d0 <= relaxed <= exact <= d_inf.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from metrics.core import (
    ErrorReport,
    MetricParams,
    TrajectorySet,
    WeightSchedule,
    build_report,
    check_compatible,
    tau_set,
)
from metrics.costs import build_cost_tensors
from metrics.errors import ChainViolation
from metrics.exact import exact_metric, trace_components
from metrics.gospa import gospa, solve_assignment
from metrics.lp import lp_metric

logger = logging.getLogger(__name__)

CHAIN_TOLERANCE = 1e-8


def d_zero(X: TrajectorySet, Y: TrajectorySet, params: MetricParams,
           weights: Optional[WeightSchedule] = None) -> ErrorReport:
    """
    Weighted sum of per-step GOSPA costs, the gamma -> 0 limit.

    Track switches are free, so the result is not a metric.
    """
    weights = weights or WeightSchedule.uniform(X.T)
    check_compatible(X, Y, weights)
    T = X.T
    loc, miss, false = np.zeros(T), np.zeros(T), np.zeros(T)
    trace = np.zeros((T, len(X)), dtype=np.int64)
    for k in range(1, T + 1):
        xs, x_idx = tau_set(X, k)
        ys, y_idx = tau_set(Y, k)
        result = gospa(xs, ys, params)
        loc[k - 1] = result.loc_pth
        miss[k - 1] = result.miss_pth
        false[k - 1] = result.false_pth
        for i, j in result.theta:
            trace[k - 1, x_idx[i]] = y_idx[j] + 1
    w1 = weights.w1
    return build_report('d0', params, w1 * loc, w1 * miss, w1 * false, np.zeros(T),
                        is_metric=False, assignment_trace=trace)


def d_infinity(X: TrajectorySet, Y: TrajectorySet, params: MetricParams,
               weights: Optional[WeightSchedule] = None) -> ErrorReport:
    """
    Best single time-invariant trajectory matching, the gamma -> infinity limit.

    Solved as one 2-D assignment whose pairing cost is the weighted sum of the
    stage costs of keeping that pair for the whole window.
    """
    weights = weights or WeightSchedule.uniform(X.T)
    check_compatible(X, Y, weights)
    tensors = build_cost_tensors(X, Y, params)
    n, m = tensors.n, tensors.m
    summed = np.einsum('k,kij->ij', weights.w1, tensors.total)
    result = solve_assignment(summed[:n, :m], summed[:n, m], summed[n, :m])
    trace = np.tile(result.pi, (X.T, 1))
    parts = trace_components(tensors, trace, params, weights)
    return build_report('dinf', params, *parts, assignment_trace=trace)


@dataclass(frozen=True)
class ChainReport:
    d_zero: float
    d_lp: float
    d_exact: float
    d_infinity: float

    @property
    def values(self) -> tuple:
        return self.d_zero, self.d_lp, self.d_exact, self.d_infinity

    @property
    def strict(self) -> tuple:
        """Which of the three inequalities hold strictly"""
        v = self.values
        return tuple(v[i + 1] - v[i] > CHAIN_TOLERANCE for i in range(3))


def check_inequality_chain(X: TrajectorySet, Y: TrajectorySet, params: MetricParams,
                           weights: Optional[WeightSchedule] = None,
                           tolerance: float = CHAIN_TOLERANCE) -> ChainReport:
    """
    Compute d0, the relaxed metric, the exact metric and d_inf and check
    that they are ordered (non-strictly, within `tolerance`).

    Raises:
        ChainViolation: the ordering fails
    """
    report = ChainReport(
        d_zero=d_zero(X, Y, params, weights).total,
        d_lp=lp_metric(X, Y, params, weights).total,
        d_exact=exact_metric(X, Y, params, weights).total,
        d_infinity=d_infinity(X, Y, params, weights).total,
    )
    v = report.values
    if any(v[i] > v[i + 1] + tolerance for i in range(3)):
        raise ChainViolation(
            "expected d0 <= relaxed <= exact <= d_inf",
            {'d0': v[0], 'relaxed': v[1], 'exact': v[2], 'd_inf': v[3]},
        )
    logger.debug(f"Inequality chain {v}, strict: {report.strict}")
    return report
