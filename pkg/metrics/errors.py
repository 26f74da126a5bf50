"""
Exceptions raised by the trajectory metrics library.
The CLI maps them to exit codes (see cli/commands.py).
"""
from typing import Optional


class TrajectoryMetricError(Exception):
    """Base class for all library errors"""


class ValidationError(TrajectoryMetricError, ValueError):
    """
    Input data breaks the trajectory-set schema or one of its invariants.

    Args:
        message: Human readable description
        label: Label of the offending trajectory, if any
        field: Name of the offending field (e.g. 'birth', 'states[3]')
    """

    def __init__(self, message: str, label: Optional[str] = None, field: Optional[str] = None):
        self.label = label
        self.field = field
        where = []
        if label is not None:
            where.append(f"trajectory '{label}'")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ''
        super().__init__(f"{prefix}{message}")


class DomainError(TrajectoryMetricError, ValueError):
    """An argument is outside the domain of the operation"""


class CapacityError(TrajectoryMetricError):
    """An enumeration would exceed its configured cap"""


class SolverError(TrajectoryMetricError, RuntimeError):
    """
    The LP solver failed or returned a solution whose residuals are above tolerance.
    """

    def __init__(self, message: str, residuals: Optional[dict] = None):
        self.residuals = dict(residuals or {})
        if self.residuals:
            details = ', '.join(f"{k}={v:.3e}" for k, v in self.residuals.items())
            message = f"{message} ({details})"
        super().__init__(message)


class ChainViolation(TrajectoryMetricError, AssertionError):
    """d0 <= d_lp <= d <= d_inf does not hold for an instance"""

    def __init__(self, message: str, values: dict):
        self.values = dict(values)
        super().__init__(message)
