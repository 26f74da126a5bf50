"""
Per-time cost matrices shared by the exact, LP and bound metrics.

For each step k the augmented (n+1) x (m+1) matrix D^k holds
d_G(x_i^k, y_j^k)^p, with the last row and column standing for "unassigned".
It is split into localisation (L), missed (M) and false (F) parts so every
metric can report the same decomposition.
"""
import logging
from dataclasses import dataclass

import numpy as np

from metrics.core import MetricParams, TrajectorySet, check_compatible

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CostTensors:
    """
    Arrays of shape (T, n+1, m+1).

    loc[k, i, j] = d^p when both targets exist at k and d < c;
    miss and false carry c^p / 2 for each existing target that is left
    without a close partner (including the unassigned row / column).
    """
    loc: np.ndarray
    miss: np.ndarray
    false: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.loc + self.miss + self.false

    @property
    def T(self) -> int:
        return int(self.loc.shape[0])

    @property
    def n(self) -> int:
        return int(self.loc.shape[1] - 1)

    @property
    def m(self) -> int:
        return int(self.loc.shape[2] - 1)

    def subset(self, rows, cols) -> 'CostTensors':
        """Restrict to some trajectories, keeping the unassigned row and column"""
        r = list(rows) + [self.n]
        c = list(cols) + [self.m]
        pick = np.ix_(range(self.T), r, c)
        return CostTensors(self.loc[pick], self.miss[pick], self.false[pick])


def pair_distance_tensor(X: TrajectorySet, Y: TrajectorySet, base: float = 2.0) -> np.ndarray:
    """(T, n, m) base distances, NaN where either target is absent"""
    check_compatible(X, Y)
    T, n, m = X.T, len(X), len(Y)
    if n == 0 or m == 0:
        return np.full((T, n, m), np.nan)
    diff = X.state_tensor[:, :, None, :] - Y.state_tensor[:, None, :, :]
    with np.errstate(invalid='ignore'):
        dist = np.linalg.norm(diff, ord=base, axis=-1)
    both = X.presence[:, :, None] & Y.presence[:, None, :]
    dist[~both] = np.nan
    return dist


def build_cost_tensors(X: TrajectorySet, Y: TrajectorySet, params: MetricParams) -> CostTensors:
    check_compatible(X, Y)
    T, n, m = X.T, len(X), len(Y)
    half = params.half_cutoff_pth
    px = X.presence
    py = Y.presence

    loc = np.zeros((T, n + 1, m + 1))
    miss = np.zeros((T, n + 1, m + 1))
    false = np.zeros((T, n + 1, m + 1))

    dist = pair_distance_tensor(X, Y, params.base)
    both = px[:, :, None] & py[:, None, :]
    close = both & (np.nan_to_num(dist, nan=np.inf) < params.c)

    loc[:, :n, :m] = np.where(close, np.nan_to_num(dist, nan=0.0) ** params.p, 0.0)
    miss[:, :n, :m] = np.where(px[:, :, None] & ~close, half, 0.0)
    false[:, :n, :m] = np.where(py[:, None, :] & ~close, half, 0.0)
    miss[:, :n, m] = np.where(px, half, 0.0)
    false[:, n, :m] = np.where(py, half, 0.0)

    logger.debug(f"Cost tensors T={T} n={n} m={m}: {int(close.sum())} close pairs")
    return CostTensors(loc, miss, false)
