"""
LP relaxation of the trajectory metric.

Binary assignment matrices are relaxed to soft assignments: nonnegative
(n+1) x (m+1) matrices whose first n rows and first m columns sum to one and
whose corner entry is zero. Absolute switching terms |W^k - W^{k+1}| are
linearised with one slack variable e^k(i, j) and two inequalities each.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, List, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from config import get_config
from metrics.core import (
    ErrorReport,
    MetricParams,
    TrajectorySet,
    WeightSchedule,
    build_report,
    check_compatible,
)
from metrics.costs import CostTensors, build_cost_tensors
from metrics.errors import DomainError, SolverError
from metrics.exact import Cluster, cluster_split

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LpProblem:
    """
    Linear program in scipy `linprog` form.

    Variables are laid out k-major: the T soft-assignment blocks W^k (row-major,
    (n+1)(m+1) each) followed by the T-1 slack blocks e^k (n*m each).
    """
    T: int
    n: int
    m: int
    c: np.ndarray
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    bounds: np.ndarray
    tensors: CostTensors = field(repr=False)
    weights: WeightSchedule = field(repr=False)
    params: MetricParams = field(repr=False)

    @property
    def block(self) -> int:
        return (self.n + 1) * (self.m + 1)

    @property
    def n_soft(self) -> int:
        return self.T * self.block

    @property
    def n_slack(self) -> int:
        return max(self.T - 1, 0) * self.n * self.m

    @property
    def n_variables(self) -> int:
        return self.n_soft + self.n_slack

    def w_index(self, k: int, i: int, j: int) -> int:
        """Column of W^{k+1}(i+1, j+1) (all arguments 0-based)"""
        return k * self.block + i * (self.m + 1) + j

    def e_index(self, k: int, i: int, j: int) -> int:
        return self.n_soft + k * self.n * self.m + i * self.m + j

    def variable_name(self, col: int) -> str:
        if col < self.n_soft:
            k, rest = divmod(col, self.block)
            i, j = divmod(rest, self.m + 1)
            return f'w_{k + 1}_{i + 1}_{j + 1}'
        k, rest = divmod(col - self.n_soft, self.n * self.m)
        i, j = divmod(rest, self.m)
        return f'e_{k + 1}_{i + 1}_{j + 1}'


@dataclass(frozen=True, eq=False)
class LpSolution:
    objective: float
    soft_assignments: np.ndarray
    slack: np.ndarray
    residuals: dict


def _build_from_tensors(tensors: CostTensors, params: MetricParams, weights: WeightSchedule) -> LpProblem:
    T, n, m = tensors.T, tensors.n, tensors.m
    block = (n + 1) * (m + 1)
    n_soft = T * block
    n_slack = max(T - 1, 0) * n * m

    c = np.concatenate([
        (weights.w1[:, None, None] * tensors.total).reshape(-1),
        np.repeat(params.switch_pth / 2.0 * weights.w2, n * m),
    ])

    # row and column sums of every block
    rows, cols = [], []
    eq = 0
    for k in range(T):
        base = k * block
        for i in range(n):
            for j in range(m + 1):
                rows.append(eq)
                cols.append(base + i * (m + 1) + j)
            eq += 1
        for j in range(m):
            for i in range(n + 1):
                rows.append(eq)
                cols.append(base + i * (m + 1) + j)
            eq += 1
    A_eq = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(eq, n_soft + n_slack)
    )
    b_eq = np.ones(eq)

    # +-(W^k - W^{k+1}) - e^k <= 0 on the interior entries
    data, rows, cols = [], [], []
    ub = 0
    for k in range(T - 1):
        for i in range(n):
            for j in range(m):
                now = k * block + i * (m + 1) + j
                nxt = now + block
                slack = n_soft + k * n * m + i * m + j
                for sign in (1.0, -1.0):
                    data += [sign, -sign, -1.0]
                    rows += [ub, ub, ub]
                    cols += [now, nxt, slack]
                    ub += 1
    A_ub = sparse.csr_matrix((data, (rows, cols)), shape=(ub, n_soft + n_slack))
    b_ub = np.zeros(ub)

    bounds = np.zeros((n_soft + n_slack, 2))
    bounds[:, 1] = np.inf
    for k in range(T):
        bounds[k * block + block - 1, 1] = 0.0

    return LpProblem(T, n, m, c, A_eq, b_eq, A_ub, b_ub, bounds, tensors, weights, params)


def build_lp(X: TrajectorySet, Y: TrajectorySet, params: MetricParams,
             weights: Optional[WeightSchedule] = None) -> LpProblem:
    """
    Build the LP whose optimum, raised to 1/p, is the relaxed metric.

    Args:
        X: Ground truth
        Y: Estimate
        params: Metric parameters
        weights: w1/w2 schedule, uniform if None

    Returns:
        LpProblem in `linprog` form
    """
    weights = weights or WeightSchedule.uniform(X.T)
    check_compatible(X, Y, weights)
    problem = _build_from_tensors(build_cost_tensors(X, Y, params), params, weights)
    logger.debug(f"LP T={problem.T} n={problem.n} m={problem.m}: {problem.n_variables} variables, "
                 f"{problem.A_eq.shape[0]} equalities, {problem.A_ub.shape[0]} inequalities")
    return problem


def _marginals(res, name: str, size: int) -> np.ndarray:
    part = getattr(res, name, None)
    if part is None or getattr(part, 'marginals', None) is None:
        return np.zeros(size)
    return np.asarray(part.marginals, dtype=float)


def solve_lp(problem: LpProblem, tolerance: Optional[float] = None) -> LpSolution:
    """
    Solve with the HiGHS dual simplex and verify the solution.

    Raises:
        SolverError: the solver fails or a primal, dual or gap residual
            exceeds `tolerance` (config `lp_tolerance`)
    """
    if tolerance is None:
        tolerance = float(get_config().get('lp_tolerance', 1e-8))

    if problem.n_variables == 0 or problem.A_eq.shape[0] == 0:
        x = np.zeros(problem.n_variables)
        return _solution(problem, x, 0.0, {'primal': 0.0, 'dual': 0.0, 'gap': 0.0})

    res = linprog(
        problem.c,
        A_ub=problem.A_ub if problem.A_ub.shape[0] else None,
        b_ub=problem.b_ub if problem.A_ub.shape[0] else None,
        A_eq=problem.A_eq,
        b_eq=problem.b_eq,
        bounds=[(lo, None if np.isinf(hi) else hi) for lo, hi in problem.bounds],
        method='highs-ds',
        options={
            'primal_feasibility_tolerance': 1e-10,
            'dual_feasibility_tolerance': 1e-10,
        },
    )
    if res.status != 0 or res.x is None:
        raise SolverError(f"LP solve failed (status {res.status}): {res.message}")

    x = np.asarray(res.x, dtype=float)
    primal_obj = float(problem.c @ x)
    y_eq = _marginals(res, 'eqlin', problem.A_eq.shape[0])
    y_ub = _marginals(res, 'ineqlin', problem.A_ub.shape[0])
    dual_obj = float(problem.b_eq @ y_eq + problem.b_ub @ y_ub)

    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    primal = max(
        float(np.max(np.abs(problem.A_eq @ x - problem.b_eq), initial=0.0)),
        float(np.max(problem.A_ub @ x - problem.b_ub, initial=0.0)) if problem.A_ub.shape[0] else 0.0,
        float(np.max(lo - x, initial=0.0)),
        float(np.max(np.where(np.isfinite(hi), x - hi, 0.0), initial=0.0)),
    )
    reduced = problem.c - problem.A_eq.T @ y_eq - (problem.A_ub.T @ y_ub if problem.A_ub.shape[0] else 0.0)
    scale = max(1.0, float(np.max(np.abs(problem.c), initial=0.0)))
    free_above = ~np.isfinite(hi)
    dual = max(
        float(np.max(-reduced[free_above], initial=0.0)),
        float(np.max(y_ub, initial=0.0)),
    ) / scale
    gap = abs(primal_obj - dual_obj) / (1.0 + abs(primal_obj) + abs(dual_obj))
    residuals = {'primal': primal, 'dual': dual, 'gap': gap}
    logger.debug(f"LP objective {primal_obj:.10g}, residuals {residuals}")

    if max(residuals.values()) > tolerance:
        raise SolverError("LP solution residuals above tolerance", residuals)
    return _solution(problem, x, primal_obj, residuals)


def _solution(problem: LpProblem, x: np.ndarray, objective: float, residuals: dict) -> LpSolution:
    T, n, m = problem.T, problem.n, problem.m
    W = x[:problem.n_soft].reshape(T, n + 1, m + 1)
    e = x[problem.n_soft:].reshape(max(T - 1, 0), n, m)
    return LpSolution(objective, W, e, residuals)


def _soft_components(tensors: CostTensors, W: np.ndarray, slack: np.ndarray,
                     params: MetricParams, weights: WeightSchedule):
    T = tensors.T
    loc = weights.w1 * np.einsum('kij,kij->k', tensors.loc, W)
    miss = weights.w1 * np.einsum('kij,kij->k', tensors.miss, W)
    false = weights.w1 * np.einsum('kij,kij->k', tensors.false, W)
    switch = np.zeros(T)
    if T > 1:
        switch[:-1] = weights.w2 * params.switch_pth / 2.0 * slack.reshape(T - 1, -1).sum(axis=1)
    return loc, miss, false, switch


def _solve_cluster(tensors: CostTensors, cluster: Cluster, params: MetricParams,
                   weights: WeightSchedule, tolerance: Optional[float]):
    sub = tensors.subset(cluster.x_indices, cluster.y_indices)
    problem = _build_from_tensors(sub, params, weights)
    solution = solve_lp(problem, tolerance)
    return solution, _soft_components(sub, solution.soft_assignments, solution.slack, params, weights)


def lp_metric(
    X: TrajectorySet,
    Y: TrajectorySet,
    params: MetricParams,
    weights: Optional[WeightSchedule] = None,
    max_workers: Optional[int] = None,
    cluster: bool = True,
    tolerance: Optional[float] = None,
) -> ErrorReport:
    """
    LP relaxation of the trajectory metric with its soft decomposition.

    Returns:
        ErrorReport whose `soft_assignments` has shape (T, n+1, m+1) and whose
        `details['lp_residuals']` holds the worst residuals over all clusters
    """
    weights = weights or WeightSchedule.uniform(X.T)
    check_compatible(X, Y, weights)
    tensors = build_cost_tensors(X, Y, params)
    T, n, m = X.T, len(X), len(Y)
    if cluster:
        clusters = cluster_split(X, Y, params)
    else:
        clusters = [Cluster(tuple(range(n)), tuple(range(m)), X, Y)]

    if max_workers is None:
        max_workers = int(get_config().get('max_workers', 4))
    workers = min(max(1, max_workers), max(1, len(clusters)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_solve_cluster, tensors, c, params, weights, tolerance) for c in clusters]
            solved = [f.result() for f in futures]
    else:
        solved = [_solve_cluster(tensors, c, params, weights, tolerance) for c in clusters]

    W = np.zeros((T, n + 1, m + 1))
    parts = [np.zeros(T) for _ in range(4)]
    worst = {'primal': 0.0, 'dual': 0.0, 'gap': 0.0}
    for c, (solution, sub_parts) in zip(clusters, solved):
        sub_W = solution.soft_assignments
        xs, ys = list(c.x_indices), list(c.y_indices)
        if xs and ys:
            W[np.ix_(range(T), xs, ys)] = sub_W[:, :-1, :-1]
        if xs:
            W[np.ix_(range(T), xs, [m])] = sub_W[:, :-1, -1:]
        if ys:
            W[np.ix_(range(T), [n], ys)] = sub_W[:, -1:, :-1]
        for acc, part in zip(parts, sub_parts):
            acc += part
        for key in worst:
            worst[key] = max(worst[key], solution.residuals.get(key, 0.0))

    report = build_report('tm-lp', params, *parts, soft_assignments=W, details={'lp_residuals': worst})
    logger.debug(f"LP metric over {len(clusters)} clusters: {report.total:.6g}")
    return report


def lp_objective(X: TrajectorySet, Y: TrajectorySet, soft_assignments: np.ndarray,
                 params: MetricParams, weights: Optional[WeightSchedule] = None) -> float:
    """
    Relaxed objective at a given soft-assignment sequence.

    The value is p-powered and divided by T under window normalization, so its
    1/p-th root is comparable with `lp_metric(...).total`.
    """
    weights = weights or WeightSchedule.uniform(X.T)
    check_compatible(X, Y, weights)
    tensors = build_cost_tensors(X, Y, params)
    W = np.asarray(soft_assignments, dtype=float)
    if W.shape != tensors.loc.shape:
        raise DomainError(f"soft assignments must have shape {tensors.loc.shape}, got {W.shape}")
    n, m = tensors.n, tensors.m
    value = float(np.einsum('k,kij,kij->', weights.w1, tensors.total, W))
    if X.T > 1 and n and m:
        jumps = np.abs(np.diff(W[:, :n, :m], axis=0)).reshape(X.T - 1, -1).sum(axis=1)
        value += params.switch_pth / 2.0 * float(weights.w2 @ jumps)
    if params.normalization == 'window':
        value /= X.T
    return value


def assignment_matrix(pi: Sequence[int], n_y: int) -> np.ndarray:
    """Binary (n+1) x (m+1) matrix of an assignment vector"""
    pi = np.asarray(pi, dtype=np.int64)
    n = pi.size
    if np.any(pi < 0) or np.any(pi > n_y):
        raise DomainError(f"assignment vector entries must lie in 0..{n_y}")
    W = np.zeros((n + 1, n_y + 1))
    for i, v in enumerate(pi):
        W[i, v - 1 if v > 0 else n_y] = 1.0
    W[n, :n_y] = 1.0 - W[:n, :n_y].sum(axis=0)
    if np.any(W[n, :n_y] < 0):
        raise DomainError(f"assignment vector repeats an estimate: {pi.tolist()}")
    return W


def compose_soft_assignments(W_xz: np.ndarray, W_zy: np.ndarray) -> np.ndarray:
    """
    Compose X->Z and Z->Y soft assignments into an X->Y soft assignment.

    Interior entries are sum_l W_xz(i, l) W_zy(l, j); the unassigned column
    and row take whatever keeps the row and column sums at one; the corner is 0.
    Accepts single matrices or (T, ., .) stacks.
    """
    W_xz = np.asarray(W_xz, dtype=float)
    W_zy = np.asarray(W_zy, dtype=float)
    single = W_xz.ndim == 2
    if single:
        W_xz, W_zy = W_xz[None], W_zy[None]
    if W_xz.ndim != 3 or W_zy.ndim != 3 or W_xz.shape[0] != W_zy.shape[0]:
        raise DomainError("soft assignments must be matrices or equally long stacks of matrices")
    if W_xz.shape[2] != W_zy.shape[1]:
        raise DomainError(f"inner dimensions differ: {W_xz.shape[2] - 1} vs {W_zy.shape[1] - 1}")

    n, m = W_xz.shape[1] - 1, W_zy.shape[2] - 1
    T = W_xz.shape[0]
    out = np.zeros((T, n + 1, m + 1))
    out[:, :n, :m] = W_xz[:, :n, :-1] @ W_zy[:, :-1, :m]
    out[:, :n, m] = 1.0 - out[:, :n, :m].sum(axis=2)
    out[:, n, :m] = 1.0 - out[:, :n, :m].sum(axis=1)
    return out[0] if single else out


def check_soft_assignment(W: np.ndarray) -> float:
    """Largest violation of the soft-assignment constraints (0 when feasible)"""
    W = np.asarray(W, dtype=float)
    if W.ndim == 2:
        W = W[None]
    n, m = W.shape[1] - 1, W.shape[2] - 1
    violations = [
        np.abs(W[:, :n, :].sum(axis=2) - 1.0),
        np.abs(W[:, :, :m].sum(axis=1) - 1.0),
        np.abs(W[:, n, m]),
        np.maximum(-W, 0.0),
    ]
    return float(max(np.max(v, initial=0.0) for v in violations))


def _format_terms(terms: List[str], indent: str = ' ', per_line: int = 6) -> List[str]:
    lines = []
    for start in range(0, len(terms), per_line):
        chunk = ' '.join(terms[start:start + per_line])
        lines.append(indent + chunk)
    return lines or [indent + '0']


def _signed(coef: float, name: str, first: bool) -> str:
    if first:
        return f'{coef:.17g} {name}'
    return f'{"-" if coef < 0 else "+"} {abs(coef):.17g} {name}'


def dump_lp(problem: LpProblem, target: Union[str, Path, IO[str]]):
    """Write the LP in CPLEX LP text format for cross-checking with other solvers"""
    lines = ['\\ Time-weighted trajectory metric, LP relaxation',
             f'\\ T={problem.T} n={problem.n} m={problem.m}',
             'Minimize']
    nonzero = [(col, coef) for col, coef in enumerate(problem.c) if coef != 0]
    terms = [_signed(coef, problem.variable_name(col), idx == 0) for idx, (col, coef) in enumerate(nonzero)]
    lines.append(' obj:')
    lines += _format_terms(terms, indent='  ')
    lines.append('Subject To')

    def _rows(matrix: sparse.csr_matrix, rhs: np.ndarray, sense: str, prefix: str):
        for r in range(matrix.shape[0]):
            start, stop = matrix.indptr[r], matrix.indptr[r + 1]
            row_terms = [_signed(matrix.data[p], problem.variable_name(matrix.indices[p]), p == start)
                         for p in range(start, stop)]
            lines.append(f' {prefix}{r + 1}:')
            body = _format_terms(row_terms, indent='  ')
            body[-1] += f' {sense} {rhs[r]:.17g}'
            lines.extend(body)

    _rows(problem.A_eq, problem.b_eq, '=', 'eq')
    _rows(problem.A_ub, problem.b_ub, '<=', 'sw')
    lines.append('Bounds')
    for col, (lo, hi) in enumerate(problem.bounds):
        if lo == hi:
            lines.append(f' {problem.variable_name(col)} = {lo:.17g}')
    lines.append('End')
    text = '\n'.join(lines) + '\n'

    if hasattr(target, 'write'):
        target.write(text)
    else:
        Path(target).write_text(text, encoding='utf-8')
        logger.info(f"Wrote LP with {problem.n_variables} variables to {target}")
