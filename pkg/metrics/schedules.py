"""
Weight schedules for the time-weighted metrics
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from metrics.core import WeightSchedule
from metrics.errors import DomainError, ValidationError

logger = logging.getLogger(__name__)

SCHEDULE_KINDS = (
    'uniform',
    'online-exp',
    'online-exp-normalized',
    'predictor-exp',
    'predictor-exp-normalized',
    'sampling-proportional',
    'sampling-proportional-normalized',
    'sampling-online-exp-normalized',
    'custom',
)

_NEEDS_RHO = {
    'online-exp', 'online-exp-normalized',
    'predictor-exp', 'predictor-exp-normalized',
    'sampling-online-exp-normalized',
}
_NEEDS_TIMES = {'sampling-proportional', 'sampling-proportional-normalized', 'sampling-online-exp-normalized'}


@dataclass(frozen=True)
class ScheduleSpec:
    """
    Description of a weight schedule, independent of the window length.

    Args:
        kind: One of SCHEDULE_KINDS
        rho: Forgetting factor in (0, 1) for the exponential kinds
        sampling_times: t_1 < ... < t_T for the sampling kinds (t_0 = 0)
        w1: Localisation weights for 'custom'
        w2: Switching weights for 'custom' (default w2[k] = w1[k+1])
    """
    kind: str = 'uniform'
    rho: Optional[float] = None
    sampling_times: Optional[Sequence[float]] = None
    w1: Optional[Sequence[float]] = None
    w2: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise DomainError(f"unknown weight schedule {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if self.kind in _NEEDS_RHO:
            if self.rho is None:
                raise DomainError(f"schedule {self.kind!r} needs a forgetting factor rho")
            if not (0.0 < self.rho < 1.0):
                raise DomainError(f"forgetting factor rho must lie in (0, 1), got {self.rho}")
        if self.kind in _NEEDS_TIMES and self.sampling_times is None:
            raise DomainError(f"schedule {self.kind!r} needs sampling times")
        if self.kind == 'custom' and self.w1 is None:
            raise DomainError("custom schedule needs w1")


def _sampling_intervals(times: Sequence[float], T: int) -> np.ndarray:
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size != T:
        raise DomainError(f"expected {T} sampling times, got {times.size}")
    if not np.all(np.isfinite(times)):
        raise DomainError("sampling times must be finite")
    delta = np.diff(np.concatenate([[0.0], times]))
    if np.any(delta <= 0):
        raise DomainError("sampling times must be strictly increasing and start after t_0 = 0")
    return delta


def _follow(w1: np.ndarray) -> WeightSchedule:
    return WeightSchedule(w1, w1[1:])


def make_schedule(spec: ScheduleSpec, T: int) -> WeightSchedule:
    """
    Build the weights of a schedule for a window of length T.

    Every built-in kind sets w2[k] = w1[k+1].
    """
    if isinstance(T, bool) or not isinstance(T, (int, np.integer)) or T < 1:
        raise DomainError(f"window length must be an integer >= 1, got {T!r}")
    k = np.arange(1, T + 1, dtype=float)
    kind = spec.kind

    if kind == 'uniform':
        return WeightSchedule.uniform(T)
    if kind == 'online-exp':
        return _follow(spec.rho ** (T - k))
    if kind == 'online-exp-normalized':
        w = spec.rho ** (T - k)
        return _follow(w / w.sum())
    if kind == 'predictor-exp':
        return _follow(spec.rho ** (k - 1))
    if kind == 'predictor-exp-normalized':
        w = spec.rho ** (k - 1)
        return _follow(w / w.sum())
    if kind == 'sampling-proportional':
        return _follow(_sampling_intervals(spec.sampling_times, T))
    if kind == 'sampling-proportional-normalized':
        w = _sampling_intervals(spec.sampling_times, T)
        return _follow(w / w.sum())
    if kind == 'sampling-online-exp-normalized':
        w = _sampling_intervals(spec.sampling_times, T) * spec.rho ** (T - k)
        return _follow(w / w.sum())

    # custom
    w1 = np.asarray(spec.w1, dtype=float).reshape(-1)
    if w1.size != T:
        raise DomainError(f"custom w1 has {w1.size} entries, window has T={T}")
    w2 = w1[1:] if spec.w2 is None else np.asarray(spec.w2, dtype=float).reshape(-1)
    return WeightSchedule(w1, w2)


def resolve_weights(spec: Optional[ScheduleSpec], T: int) -> WeightSchedule:
    """Weights for a window of length T, uniform when no schedule is given"""
    if spec is None:
        return WeightSchedule.uniform(T)
    return make_schedule(spec, T)


def load_weights_file(path: Union[str, Path]) -> ScheduleSpec:
    """
    Read a custom schedule from JSON: {"w1": [...], "w2": [...]} (w2 optional)
    """
    try:
        payload = json.loads(Path(path).read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON in weights file {path}: {e}") from e
    if not isinstance(payload, dict) or 'w1' not in payload:
        raise ValidationError(f"weights file {path} must be an object with a 'w1' list")
    logger.debug(f"Loaded custom weights from {path}")
    return ScheduleSpec(kind='custom', w1=payload['w1'], w2=payload.get('w2'))


def load_sampling_times(path: Union[str, Path]) -> list:
    """Read sampling times from a JSON list"""
    try:
        payload = json.loads(Path(path).read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON in sampling times file {path}: {e}") from e
    if not isinstance(payload, list):
        raise ValidationError(f"sampling times file {path} must hold a JSON list")
    return payload
