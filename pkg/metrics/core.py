"""
Core domain types: trajectories, sets of trajectories, metric parameters,
weight schedules and error reports, plus the trajectory-set file format.

Time steps are 1-based everywhere in the public API (k = 1..T).
"""
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from metrics.errors import DomainError, ValidationError

logger = logging.getLogger(__name__)

NORMALIZATION_MODES = ('none', 'window')

StateRow = Optional[Sequence[float]]


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    A single trajectory X = (birth, x^{1:nu}).

    `states` has shape (nu, n_x); rows whose `present` flag is False are holes
    (Absent) and hold NaN. The first and last rows are always present.
    """
    birth: int
    states: np.ndarray
    present: np.ndarray
    label: str = ''

    def __post_init__(self):
        label = self.label
        if isinstance(self.birth, bool) or not isinstance(self.birth, (int, np.integer)):
            raise ValidationError("birth must be an integer", label, 'birth')
        if self.birth < 1:
            raise ValidationError(f"birth must be >= 1, got {self.birth}", label, 'birth')

        states = np.array(self.states, dtype=float, copy=True)
        present = np.array(self.present, dtype=bool, copy=True)
        if states.ndim != 2 or present.ndim != 1 or states.shape[0] != present.shape[0]:
            raise ValidationError("states must be a (nu, n_x) array matching the presence mask", label, 'states')
        if states.shape[0] == 0:
            raise ValidationError("a trajectory needs at least one state", label, 'states')
        if states.shape[1] == 0:
            raise ValidationError("states must have dimension >= 1", label, 'states')
        if not present[0] or not present[-1]:
            raise ValidationError("first and last states must be present", label, 'states')
        if not np.all(np.isfinite(states[present])):
            bad = int(np.argmax(~np.all(np.isfinite(states), axis=1) & present))
            raise ValidationError("states must be finite numbers", label, f'states[{bad}]')
        states[~present] = np.nan

        object.__setattr__(self, 'birth', int(self.birth))
        object.__setattr__(self, 'states', _readonly(states))
        object.__setattr__(self, 'present', _readonly(present))

    @classmethod
    def from_rows(cls, birth: int, rows: Sequence[StateRow], label: str = '') -> 'Trajectory':
        """Build a trajectory from state rows, None marking a hole"""
        rows = list(rows)
        if not rows:
            raise ValidationError("a trajectory needs at least one state", label, 'states')
        dims = {len(r) for r in rows if r is not None}
        if len(dims) > 1:
            raise ValidationError(f"state dimension mismatch {sorted(dims)}", label, 'states')
        if not dims:
            raise ValidationError("first and last states must be present", label, 'states')
        dim = dims.pop()
        states = np.full((len(rows), dim), np.nan)
        present = np.zeros(len(rows), dtype=bool)
        for idx, row in enumerate(rows):
            if row is not None:
                states[idx] = row
                present[idx] = True
        return cls(birth=birth, states=states, present=present, label=label)

    @property
    def length(self) -> int:
        return int(self.states.shape[0])

    @property
    def end(self) -> int:
        """Last time step covered by the trajectory"""
        return self.birth + self.length - 1

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    def state_at(self, k: int) -> Optional[np.ndarray]:
        """State at time step k, or None outside the extent or at a hole"""
        if k < self.birth or k > self.end:
            return None
        idx = k - self.birth
        if not self.present[idx]:
            return None
        return self.states[idx]

    def rows(self) -> Iterator[Optional[list]]:
        for state, here in zip(self.states, self.present):
            yield [float(v) for v in state] if here else None

    def canonical(self) -> tuple:
        """Hashable label-free form, used for set equality"""
        return (self.birth, tuple(tuple(r) if r is not None else None for r in self.rows()))


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """
    A finite set of trajectories over the window 1..T.
    """
    window_length: int
    trajectories: Tuple[Trajectory, ...] = ()

    def __post_init__(self):
        T = self.window_length
        if isinstance(T, bool) or not isinstance(T, (int, np.integer)) or T < 1:
            raise ValidationError(f"window length T must be an integer >= 1, got {T!r}", None, 'T')
        trajectories = tuple(self.trajectories)
        dims = set()
        for traj in trajectories:
            if not isinstance(traj, Trajectory):
                raise ValidationError("set members must be Trajectory objects", None, 'trajectories')
            if traj.end > T:
                raise ValidationError(
                    f"extends to step {traj.end}, past the window end T={T}", traj.label, 'states'
                )
            dims.add(traj.dim)
        if len(dims) > 1:
            raise ValidationError(f"trajectories have different state dimensions {sorted(dims)}", None, 'states')
        object.__setattr__(self, 'window_length', int(T))
        object.__setattr__(self, 'trajectories', trajectories)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def __getitem__(self, index: int) -> Trajectory:
        return self.trajectories[index]

    @property
    def T(self) -> int:
        return self.window_length

    @property
    def dim(self) -> Optional[int]:
        """State dimension, None for an empty set"""
        return self.trajectories[0].dim if self.trajectories else None

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(t.label for t in self.trajectories)

    @cached_property
    def presence(self) -> np.ndarray:
        """Boolean (T, n) matrix, True where trajectory i has a state at step k"""
        mask = np.zeros((self.T, len(self)), dtype=bool)
        for i, traj in enumerate(self.trajectories):
            mask[traj.birth - 1:traj.end, i] = traj.present
        return _readonly(mask)

    @cached_property
    def state_tensor(self) -> np.ndarray:
        """(T, n, n_x) states with NaN where a trajectory has no state"""
        dim = self.dim or 0
        tensor = np.full((self.T, len(self), dim), np.nan)
        for i, traj in enumerate(self.trajectories):
            tensor[traj.birth - 1:traj.end, i, :] = traj.states
        return _readonly(tensor)

    def subset(self, indices: Iterable[int]) -> 'TrajectorySet':
        return TrajectorySet(self.T, tuple(self.trajectories[i] for i in indices))

    def canonical(self) -> tuple:
        return tuple(sorted(t.canonical() for t in self.trajectories))

    def same_trajectories(self, other: 'TrajectorySet') -> bool:
        """Set equality of the trajectories, ignoring labels and order"""
        return self.T == other.T and self.canonical() == other.canonical()


@dataclass(frozen=True)
class MetricParams:
    """
    Parameters shared by the metrics.

    Args:
        c: Cut-off distance, > 0
        p: Exponent, 1 <= p < inf
        gamma: Switching penalty, > 0
        base: Order of the norm used as base metric (2 = Euclidean, np.inf allowed)
        normalization: 'none' or 'window' (divide the p-powered sum by T)
    """
    c: float
    p: float = 1.0
    gamma: float = 1.0
    base: float = 2.0
    normalization: str = 'none'

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"cut-off c must be > 0, got {self.c}")
        if not (math.isfinite(self.p) and self.p >= 1):
            raise DomainError(f"exponent p must satisfy 1 <= p < inf, got {self.p}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"switching penalty gamma must be > 0, got {self.gamma}")
        if not (self.base >= 1):
            raise DomainError(f"base norm order must be >= 1, got {self.base}")
        if self.normalization not in NORMALIZATION_MODES:
            raise DomainError(f"normalization must be one of {NORMALIZATION_MODES}, got {self.normalization!r}")

    @property
    def half_cutoff_pth(self) -> float:
        """c^p / 2, the cost of one missed or false target"""
        return self.c ** self.p / 2.0

    @property
    def switch_pth(self) -> float:
        """gamma^p, the cost of one full track switch"""
        return self.gamma ** self.p


@dataclass(frozen=True, eq=False)
class WeightSchedule:
    """Localisation weights w1 (length T) and switching weights w2 (length T-1)"""
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        w1 = np.array(self.w1, dtype=float, copy=True).reshape(-1)
        w2 = np.array(self.w2, dtype=float, copy=True).reshape(-1)
        if w1.size < 1:
            raise DomainError("w1 needs at least one entry")
        if w2.size != w1.size - 1:
            raise DomainError(f"w2 must have T-1={w1.size - 1} entries, got {w2.size}")
        if not (np.all(np.isfinite(w1)) and np.all(w1 > 0)):
            raise DomainError("every localisation weight w1 must be finite and > 0")
        if not (np.all(np.isfinite(w2)) and np.all(w2 > 0)):
            raise DomainError("every switching weight w2 must be finite and > 0")
        object.__setattr__(self, 'w1', _readonly(w1))
        object.__setattr__(self, 'w2', _readonly(w2))

    @classmethod
    def uniform(cls, T: int) -> 'WeightSchedule':
        return cls(np.ones(T), np.ones(max(T - 1, 0)))

    @property
    def T(self) -> int:
        return int(self.w1.size)

    def scaled(self, factor: float) -> 'WeightSchedule':
        return WeightSchedule(self.w1 * factor, self.w2 * factor)


@dataclass(frozen=True)
class TargetSlice:
    """Per-trajectory singleton-or-empty target sets at a fixed time step k"""
    k: int
    x: Tuple[Optional[np.ndarray], ...]
    y: Tuple[Optional[np.ndarray], ...]


@dataclass(frozen=True, eq=False)
class ErrorReport:
    """
    Metric value with its per-time decomposition.

    The per-time arrays have length T, are already multiplied by their weights
    and divided by T under window normalization. switch[k-1] holds the cost of
    the transition k -> k+1 (the last entry is 0).
    """
    metric: str
    total: float
    p: float
    loc: np.ndarray
    miss: np.ndarray
    false: np.ndarray
    switch: np.ndarray
    normalized: bool = False
    is_metric: bool = True
    decomposed: bool = True
    assignment_trace: Optional[np.ndarray] = None
    soft_assignments: Optional[np.ndarray] = None
    details: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.loc.size)

    @property
    def components(self) -> dict:
        """Summed p-powered components"""
        return {
            'loc': float(self.loc.sum()),
            'miss': float(self.miss.sum()),
            'false': float(self.false.sum()),
            'switch': float(self.switch.sum()),
        }

    @property
    def pth_total(self) -> float:
        return float(sum(self.components.values()))


def build_report(metric: str, params: MetricParams, loc, miss, false, switch, **extra) -> ErrorReport:
    """
    Assemble an ErrorReport from raw (weighted, unnormalized) per-time costs,
    applying window normalization and the p-th root.
    """
    arrays = [np.clip(np.asarray(a, dtype=float), 0.0, None) for a in (loc, miss, false, switch)]
    T = arrays[0].size
    normalized = params.normalization == 'window'
    if normalized:
        arrays = [a / T for a in arrays]
    pth = float(sum(a.sum() for a in arrays))
    total = pth ** (1.0 / params.p)
    return ErrorReport(metric, total, params.p, *arrays, normalized=normalized, **extra)


def _check_step(k: int, T: Optional[int]):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise DomainError(f"time step must be an integer, got {k!r}")
    if k < 1 or (T is not None and k > T):
        raise DomainError(f"time step {k} outside 1..{T if T is not None else 'T'}")


def tau(traj: Trajectory, k: int, window_length: Optional[int] = None) -> np.ndarray:
    """
    Target set of a trajectory at time step k: a (1, n_x) array holding the
    state, or an empty (0, n_x) array before birth, after death or at a hole.
    """
    _check_step(k, window_length)
    state = traj.state_at(k)
    if state is None:
        return np.empty((0, traj.dim))
    return state.reshape(1, -1)


def tau_set(tset: TrajectorySet, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Union of the per-trajectory target sets at time step k.

    Returns:
        (states, indices): states has shape (m, n_x); indices are the 0-based
        positions of the originating trajectories.
    """
    _check_step(k, tset.T)
    indices = np.flatnonzero(tset.presence[k - 1])
    states = tset.state_tensor[k - 1, indices, :]
    return states, indices


def target_slice(X: TrajectorySet, Y: TrajectorySet, k: int) -> TargetSlice:
    """Per-trajectory target sets of X and Y at time step k"""
    check_compatible(X, Y)
    _check_step(k, X.T)
    return TargetSlice(
        k=k,
        x=tuple(t.state_at(k) for t in X),
        y=tuple(t.state_at(k) for t in Y),
    )


def check_compatible(X: TrajectorySet, Y: TrajectorySet, weights: Optional[WeightSchedule] = None):
    """Raise DomainError if the two sets (and weights) cannot be compared"""
    if X.T != Y.T:
        raise DomainError(f"window mismatch: T={X.T} vs T={Y.T}")
    if X.dim is not None and Y.dim is not None and X.dim != Y.dim:
        raise DomainError(f"state dimension mismatch: {X.dim} vs {Y.dim}")
    if weights is not None and weights.T != X.T:
        raise DomainError(f"weight schedule covers {weights.T} steps, window has T={X.T}")


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def trajectory_set_from_dict(payload: dict) -> TrajectorySet:
    """Validate a decoded JSON document and build the TrajectorySet"""
    if not isinstance(payload, dict):
        raise ValidationError("document must be a JSON object")
    unknown = sorted(set(payload) - {'T', 'trajectories'})
    if unknown:
        raise ValidationError(f"unknown keys {unknown}")
    T = payload.get('T')
    if isinstance(T, bool) or not isinstance(T, int):
        raise ValidationError("T must be an integer", None, 'T')
    items = payload.get('trajectories')
    if not isinstance(items, list):
        raise ValidationError("trajectories must be a list", None, 'trajectories')

    trajectories = []
    for pos, item in enumerate(items):
        if not isinstance(item, dict):
            raise ValidationError("entry must be an object", None, f'trajectories[{pos}]')
        label = item.get('label')
        if not isinstance(label, str):
            raise ValidationError("label must be a string", None, f'trajectories[{pos}].label')
        extra = sorted(set(item) - {'label', 'birth', 'states'})
        if extra:
            raise ValidationError(f"unknown keys {extra}", label, None)
        birth = item.get('birth')
        if isinstance(birth, bool) or not isinstance(birth, int):
            raise ValidationError("birth must be an integer", label, 'birth')
        rows = item.get('states')
        if not isinstance(rows, list) or not rows:
            raise ValidationError("states must be a non-empty list", label, 'states')
        for idx, row in enumerate(rows):
            if row is None:
                continue
            if not isinstance(row, list) or not row or not all(_is_number(v) for v in row):
                raise ValidationError("state must be a list of numbers or null", label, f'states[{idx}]')
            try:
                finite = all(math.isfinite(float(v)) for v in row)
            except OverflowError:
                finite = False
            if not finite:
                raise ValidationError("state values must be finite", label, f'states[{idx}]')
        if birth < 1 or birth + len(rows) - 1 > T:
            raise ValidationError(
                f"extent {birth}..{birth + len(rows) - 1} does not fit the window 1..{T}", label, 'birth'
            )
        trajectories.append(Trajectory.from_rows(birth, rows, label))
    return TrajectorySet(T, tuple(trajectories))


def trajectory_set_to_dict(tset: TrajectorySet) -> dict:
    return {
        'T': tset.T,
        'trajectories': [
            {'label': t.label, 'birth': t.birth, 'states': list(t.rows())}
            for t in tset
        ],
    }


def load_trajectory_set(source: Union[str, Path, bytes]) -> TrajectorySet:
    """
    Load a trajectory set from a path or from raw JSON bytes.

    Raises:
        ValidationError: schema or invariant violation (with label and field)
    """
    if isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
        origin = '<bytes>'
    else:
        origin = str(source)
        raw = Path(source).read_bytes()
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as e:
        raise ValidationError(f"{origin} is not valid UTF-8: {e}") from e

    def _reject_constant(name):
        raise ValidationError(f"non-finite number {name} is not allowed")

    try:
        payload = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON in {origin}: {e}") from e
    tset = trajectory_set_from_dict(payload)
    logger.debug(f"Loaded {len(tset)} trajectories (T={tset.T}) from {origin}")
    return tset


def save_trajectory_set(tset: TrajectorySet) -> bytes:
    """Serialize to the canonical JSON form (UTF-8, one trajectory per line)"""
    doc = trajectory_set_to_dict(tset)
    lines = [json.dumps(t, ensure_ascii=False, allow_nan=False) for t in doc['trajectories']]
    body = ',\n    '.join(lines)
    if lines:
        text = f'{{"T": {doc["T"]}, "trajectories": [\n    {body}\n]}}\n'
    else:
        text = f'{{"T": {doc["T"]}, "trajectories": []}}\n'
    return text.encode('utf-8')


def write_trajectory_set(tset: TrajectorySet, path: Union[str, Path]):
    path = Path(path)
    path.write_bytes(save_trajectory_set(tset))
    logger.info(f"Wrote {len(tset)} trajectories (T={tset.T}) to {path}")
