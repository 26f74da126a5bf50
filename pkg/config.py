"""
Configuration for the trajectory metrics toolkit
"""
import json
import logging
import os
from pathlib import Path
from typing import Optional

logger = logging.getLogger(__name__)

# Default configuration (fallback only)
DEFAULT_CONFIG = {
    'c': 5.0,
    'p': 1.0,
    'gamma': None,
    'base_norm': 2.0,
    'normalize': 'none',
    'weights': 'uniform',
    'rho': None,
    'p_prime': None,
    'max_assignment_states': 50_000,
    'bruteforce_max_sequences': 10_000_000,
    'lp_tolerance': 1e-8,
    'max_workers': 4,
    'log_level': 'INFO',
    'table_decimals': 2,
    'scenario_separation': 100.0,
    'scenario_seed': 0,
}

# Config file path
CONFIG_DIR = Path(os.getenv('TRAJECTORY_METRICS_HOME', str(Path.home() / '.trajectory_metrics')))
CONFIG_FILE = CONFIG_DIR / 'config.json'

_CONFIG: Optional[dict] = None


def ensure_config_dir():
    """Ensure config directory exists"""
    CONFIG_DIR.mkdir(parents=True, exist_ok=True)


def load_config(path: Optional[Path] = None) -> dict:
    """
    Load configuration from file or use defaults.

    Args:
        path: Explicit config file; defaults to CONFIG_FILE

    Returns:
        dict: File values merged over DEFAULT_CONFIG
    """
    config_file = Path(path) if path is not None else CONFIG_FILE

    if config_file.exists():
        try:
            with open(config_file, 'r', encoding='utf-8') as f:
                config = json.load(f)
            if not isinstance(config, dict):
                raise ValueError("top level must be an object")
            unknown = sorted(set(config) - set(DEFAULT_CONFIG))
            if unknown:
                logger.warning(f"Ignoring unknown config keys in {config_file}: {unknown}")
            known = {k: v for k, v in config.items() if k in DEFAULT_CONFIG}
            return {**DEFAULT_CONFIG, **known}
        except Exception as e:
            logger.warning(f"Could not read config file {config_file}: {e}")
            logger.warning("Using default config")

    return DEFAULT_CONFIG.copy()


def save_config(config: dict, path: Optional[Path] = None):
    """Save configuration to file"""
    config_file = Path(path) if path is not None else CONFIG_FILE
    if path is None:
        ensure_config_dir()
    else:
        config_file.parent.mkdir(parents=True, exist_ok=True)

    with open(config_file, 'w', encoding='utf-8') as f:
        json.dump(config, f, indent=2)


def get_config() -> dict:
    """Get the cached configuration (loaded on first use)"""
    global _CONFIG
    if _CONFIG is None:
        _CONFIG = load_config()
    return _CONFIG


def set_config(config: dict):
    """Replace the cached configuration (CLI --config, tests)"""
    global _CONFIG
    _CONFIG = {**DEFAULT_CONFIG, **config}


def reset_config_cache():
    """Forget the cached configuration so the next get_config() reloads it"""
    global _CONFIG
    _CONFIG = None
