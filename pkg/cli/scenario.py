"""
Two-target benchmark scenario: two parallel constant truths and four
estimates (clean, early label swap, late label swap, lost target).
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from config import get_config
from metrics.core import Trajectory, TrajectorySet, write_trajectory_set
from metrics.errors import DomainError

logger = logging.getLogger(__name__)

SCENARIO_FILES = ('truth', 'e1', 'e2', 'e3', 'e4')


def _line(values: np.ndarray, label: str) -> Trajectory:
    states = np.asarray(values, dtype=float).reshape(-1, 1)
    return Trajectory(birth=1, states=states, present=np.ones(states.shape[0], dtype=bool), label=label)


def generate_benchmark_scenario(
    separation: Optional[float] = None,
    seed: Optional[int] = None,
    window_length: int = 800,
    early_swap: int = 250,
    late_swap: int = 650,
    fault_step: int = 550,
    deviation: float = 3.0,
    c: Optional[float] = None,
) -> Dict[str, TrajectorySet]:
    """
    Build the benchmark sets in memory.

    Truths sit at 0 and `separation`. Every estimate deviates by exactly
    `deviation` per step, with random sign. E2 and E3 swap the estimates'
    targets from `early_swap` / `late_swap` on; E4 moves the second estimate
    to half the separation away from step `fault_step` on.

    Args:
        separation: Distance between the truths (config `scenario_separation`)
        seed: Seed of the deviation signs (config `scenario_seed`)
        window_length: T
        c: Cut-off the scenario must stay unambiguous for (config `c`)

    Returns:
        dict with keys 'truth', 'e1' .. 'e4'
    """
    config = get_config()
    separation = float(config.get('scenario_separation', 100.0) if separation is None else separation)
    seed = int(config.get('scenario_seed', 0) if seed is None else seed)
    c = float(config.get('c', 5.0) if c is None else c)
    T = int(window_length)

    if separation <= 2 * c + 2 * deviation:
        raise DomainError(f"separation {separation} must exceed 2c + 2*deviation = {2 * c + 2 * deviation}")
    if T < 1:
        raise DomainError(f"window length must be >= 1, got {T}")
    for name, step in (('early_swap', early_swap), ('late_swap', late_swap), ('fault_step', fault_step)):
        if not 1 <= step <= T:
            raise DomainError(f"{name} must lie in 1..{T}, got {step}")

    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(2, T))
    x1 = np.zeros(T)
    x2 = np.full(T, separation)
    near1 = x1 + deviation * signs[0]
    near2 = x2 + deviation * signs[1]
    k = np.arange(1, T + 1)

    truth = TrajectorySet(T, (_line(x1, 'X1'), _line(x2, 'X2')))

    def _swapped(from_step: int) -> TrajectorySet:
        after = k >= from_step
        y1 = np.where(after, near2, near1)
        y2 = np.where(after, near1, near2)
        return TrajectorySet(T, (_line(y1, 'Y1'), _line(y2, 'Y2')))

    lost = np.where(k >= fault_step, x2 + separation / 2.0, near2)
    return {
        'truth': truth,
        'e1': TrajectorySet(T, (_line(near1, 'Y1'), _line(near2, 'Y2'))),
        'e2': _swapped(early_swap),
        'e3': _swapped(late_swap),
        'e4': TrajectorySet(T, (_line(near1, 'Y1'), _line(lost, 'Y2'))),
    }


def cmd_generate_benchmark_scenario(out_dir: Union[str, Path], separation: Optional[float] = None,
                                seed: Optional[int] = None, **kwargs) -> List[Path]:
    """
    Write truth.json and e1.json .. e4.json into `out_dir`.

    Returns:
        Paths of the written files
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sets = generate_benchmark_scenario(separation=separation, seed=seed, **kwargs)
    paths = []
    for name in SCENARIO_FILES:
        path = out_dir / f'{name}.json'
        write_trajectory_set(sets[name], path)
        paths.append(path)
    logger.info(f"Generated benchmark scenario in {out_dir}")
    return paths
