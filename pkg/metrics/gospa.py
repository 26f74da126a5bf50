"""
Rectangular 2-D assignment with unassignment, and the GOSPA metric (alpha = 2)
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from metrics.core import MetricParams
from metrics.errors import DomainError

logger = logging.getLogger(__name__)

# Relative slack when comparing objectives of competing matchings
TIE_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class AssignmentResult:
    """
    Optimal matching of a rectangular assignment problem.

    `pi[i]` is 0 when row i is unassigned and j + 1 when it is matched to
    column j (the assignment-vector convention used by the trajectory metric).
    """
    pi: np.ndarray
    objective: float

    @property
    def pairs(self) -> Tuple[Tuple[int, int], ...]:
        """Matched (row, column) pairs, 0-based"""
        return tuple((int(i), int(v) - 1) for i, v in enumerate(self.pi) if v > 0)


def as_target_set(x) -> np.ndarray:
    """
    Coerce a target set to a (count, n_x) float array.

    A 1-D input is read as a set of scalar states.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DomainError(f"target set must be a 2-D array of states, got shape {arr.shape}")
    return arr


def pairwise_distances(x: np.ndarray, y: np.ndarray, base: float = 2.0) -> np.ndarray:
    """Base-metric distances between every state of x and every state of y"""
    x = as_target_set(x)
    y = as_target_set(y)
    if x.shape[0] == 0 or y.shape[0] == 0:
        return np.zeros((x.shape[0], y.shape[0]))
    if x.shape[1] != y.shape[1]:
        raise DomainError(f"state dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return np.linalg.norm(x[:, None, :] - y[None, :, :], ord=base, axis=-1)


def _augmented_matrix(cost: np.ndarray, row_cost: np.ndarray, col_cost: np.ndarray) -> np.ndarray:
    n, m = cost.shape
    big = np.full((n + m, m + n), np.inf)
    big[:n, :m] = cost
    big[:n, m:][np.diag_indices(n)] = row_cost
    big[n:, :m][np.diag_indices(m)] = col_cost
    big[n:, m:] = 0.0
    return big


def _solve_free(cost: np.ndarray, row_cost: np.ndarray, col_cost: np.ndarray) -> Tuple[np.ndarray, float]:
    """Unconstrained optimum via the augmented square problem"""
    n, m = cost.shape
    pi = np.zeros(n, dtype=int)
    if n == 0:
        return pi, float(col_cost.sum())
    if m == 0:
        return pi, float(row_cost.sum())
    big = _augmented_matrix(cost, row_cost, col_cost)
    rows, cols = linear_sum_assignment(big)
    objective = float(big[rows, cols].sum())
    for r, col in zip(rows, cols):
        if r < n and col < m:
            pi[r] = col + 1
    return pi, objective


def _solve_fixed(cost, row_cost, col_cost, fixed: Dict[int, int]) -> Tuple[Optional[np.ndarray], float]:
    """Optimum with some rows forced to given values; None if infeasible"""
    n, m = cost.shape
    constant = 0.0
    taken = set()
    for i, v in fixed.items():
        if v == 0:
            constant += row_cost[i]
        else:
            if v - 1 in taken or not np.isfinite(cost[i, v - 1]):
                return None, np.inf
            taken.add(v - 1)
            constant += cost[i, v - 1]
    free_rows = [i for i in range(n) if i not in fixed]
    free_cols = [j for j in range(m) if j not in taken]
    sub_pi, sub_obj = _solve_free(
        cost[np.ix_(free_rows, free_cols)], row_cost[free_rows], col_cost[free_cols]
    )
    pi = np.zeros(n, dtype=int)
    for i, v in fixed.items():
        pi[i] = v
    for pos, i in enumerate(free_rows):
        if sub_pi[pos] > 0:
            pi[i] = free_cols[sub_pi[pos] - 1] + 1
    return pi, constant + sub_obj


def solve_assignment(
    cost,
    row_unassigned,
    col_unassigned,
    lexicographic: bool = True,
) -> AssignmentResult:
    """
    Minimal-cost one-to-one matching where rows and columns may stay unassigned.

    Args:
        cost: (n, m) pairing costs; +inf forbids a pair
        row_unassigned: cost of leaving each row unassigned (scalar or length n)
        col_unassigned: cost of leaving each column unassigned (scalar or length m)
        lexicographic: return the lexicographically smallest optimal `pi`
            (0 = unassigned sorts first)

    Returns:
        AssignmentResult with the optimal objective
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise DomainError(f"cost must be an (n, m) matrix, got shape {cost.shape}")
    n, m = cost.shape
    row_cost = np.broadcast_to(np.asarray(row_unassigned, dtype=float), (n,)).copy()
    col_cost = np.broadcast_to(np.asarray(col_unassigned, dtype=float), (m,)).copy()
    if np.any(np.isnan(cost)) or np.any(cost == -np.inf):
        raise DomainError("pairing costs must be finite or +inf")
    if not (np.all(np.isfinite(row_cost)) and np.all(np.isfinite(col_cost))):
        raise DomainError("unassignment costs must be finite")

    pi, best = _solve_free(cost, row_cost, col_cost)
    if lexicographic and n > 0:
        tol = TIE_TOLERANCE * max(1.0, abs(best))
        fixed: Dict[int, int] = {}
        for i in range(n):
            current = int(pi[i])
            for v in range(current):
                if v > 0 and not np.isfinite(cost[i, v - 1]):
                    continue
                trial_pi, trial_obj = _solve_fixed(cost, row_cost, col_cost, {**fixed, i: v})
                if trial_pi is not None and trial_obj <= best + tol:
                    pi = trial_pi
                    break
            fixed[i] = int(pi[i])
        # report the objective of the chosen matching itself
        _, best = _solve_fixed(cost, row_cost, col_cost, {i: int(v) for i, v in enumerate(pi)})

    return AssignmentResult(pi=pi, objective=float(best))


@dataclass(frozen=True)
class GospaResult:
    """
    GOSPA value with its p-powered decomposition.

    total = (loc_pth + (c^p / 2) * (missed + false)) ** (1 / p)
    """
    total: float
    loc_pth: float
    missed: int
    false: int
    theta: Tuple[Tuple[int, int], ...]
    half_cutoff_pth: float

    @property
    def miss_pth(self) -> float:
        return self.half_cutoff_pth * self.missed

    @property
    def false_pth(self) -> float:
        return self.half_cutoff_pth * self.false

    @property
    def pth_total(self) -> float:
        return self.loc_pth + self.miss_pth + self.false_pth


def gospa(x, y, params: MetricParams) -> GospaResult:
    """
    GOSPA distance (alpha = 2) between two finite sets of states.

    Pairs at base distance >= c are never matched: their cost c^p equals the
    cost of one missed plus one false target.
    """
    x = as_target_set(x)
    y = as_target_set(y)
    dist = pairwise_distances(x, y, params.base)
    half = params.half_cutoff_pth
    cost = np.where(dist < params.c, dist ** params.p, np.inf)
    result = solve_assignment(cost, half, half)
    theta = result.pairs
    loc_pth = float(sum(cost[i, j] for i, j in theta))
    missed = x.shape[0] - len(theta)
    false = y.shape[0] - len(theta)
    pth = loc_pth + half * (missed + false)
    return GospaResult(
        total=pth ** (1.0 / params.p),
        loc_pth=loc_pth,
        missed=missed,
        false=false,
        theta=theta,
        half_cutoff_pth=half,
    )


def gospa_singleton(x: Optional[Sequence[float]], y: Optional[Sequence[float]], params: MetricParams) -> float:
    """GOSPA between two sets with at most one element each (None = empty)"""
    if x is None and y is None:
        return 0.0
    if x is None or y is None:
        return params.c / 2.0 ** (1.0 / params.p)
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise DomainError(f"state dimension mismatch: {x.size} vs {y.size}")
    return float(min(params.c, np.linalg.norm(x - y, ord=params.base)))
