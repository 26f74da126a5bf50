"""
OSPA between target sets and OSPA(2) between sets of trajectories
"""
import logging

import numpy as np
from scipy.optimize import linear_sum_assignment

from metrics.core import TrajectorySet, check_compatible
from metrics.costs import pair_distance_tensor
from metrics.errors import DomainError
from metrics.gospa import as_target_set, pairwise_distances

logger = logging.getLogger(__name__)


def _check_params(c: float, p: float):
    if not c > 0:
        raise DomainError(f"cut-off c must be > 0, got {c}")
    if not (1 <= p < np.inf):
        raise DomainError(f"exponent p must satisfy 1 <= p < inf, got {p}")


def _ospa_from_distances(dist: np.ndarray, c: float, p: float) -> float:
    n, m = dist.shape
    if n == 0 and m == 0:
        return 0.0
    if n == 0 or m == 0:
        return float(c)
    cost = np.minimum(dist, c) ** p
    rows, cols = linear_sum_assignment(cost)
    total = cost[rows, cols].sum() + c ** p * abs(n - m)
    return float((total / max(n, m)) ** (1.0 / p))


def ospa(x, y, c: float, p: float = 1.0, base: float = 2.0) -> float:
    """
    OSPA distance between two finite sets of states.

    Args:
        x, y: (count, n_x) arrays of states
        c: Cut-off distance
        p: Order
        base: Norm order of the base distance

    Returns:
        0 for two empty sets, c if exactly one is empty
    """
    _check_params(c, p)
    return _ospa_from_distances(pairwise_distances(as_target_set(x), as_target_set(y), base), c, p)


def trajectory_distance_matrix(X: TrajectorySet, Y: TrajectorySet, c: float, p: float = 1.0,
                               base: float = 2.0) -> np.ndarray:
    """
    Time-averaged base distance between every trajectory of X and of Y.

    Per step the distance is 0 when both are absent, c when one is absent
    and min(c, d) otherwise; the result is ((1/T) sum_k d_k^p)^(1/p).
    """
    _check_params(c, p)
    check_compatible(X, Y)
    dist = pair_distance_tensor(X, Y, base)
    px = X.presence[:, :, None]
    py = Y.presence[:, None, :]
    per_step = np.where(px & py, np.minimum(np.nan_to_num(dist, nan=c), c), np.where(px | py, c, 0.0))
    return (np.mean(per_step ** p, axis=0)) ** (1.0 / p)


def ospa2(X: TrajectorySet, Y: TrajectorySet, c: float, p: float = 1.0, base_norm: float = 2.0) -> float:
    """OSPA over sets of trajectories with a time-averaged trajectory distance"""
    value = _ospa_from_distances(trajectory_distance_matrix(X, Y, c, p, base_norm), c, p)
    logger.debug(f"OSPA2 n={len(X)} m={len(Y)} T={X.T}: {value:.6g}")
    return value
