"""
Centralized configuration for the GP tracking-certificate toolkit.

This module defines all process-wide defaults in one place, making it
easy to adjust numerical tolerances, integrator settings and output
locations without digging through the rest of the codebase. Experiment
specific values (kernel hyperparameters, plant, bound parameters) live in
the experiment config files under ``experiments/``; the constants here
are the fallbacks those files are validated against.

Deployment overrides are read from the environment (or a ``.env`` file)
with the ``GPTRACK_`` prefix. When imported, it ensures the output and
log directories exist so that other modules don't need to create them.
"""

from __future__ import annotations

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


def _env_bool(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in {"1", "true", "yes", "on"}


# File system paths
_BASE_DIR: Path = Path(__file__).resolve().parent
EXPERIMENTS_DIR: Path = _BASE_DIR / "experiments"
OUTPUT_DIR: Path = Path(os.getenv("GPTRACK_OUTPUT_DIR", _BASE_DIR / "output"))
LOG_DIR: Path = Path(os.getenv("GPTRACK_LOG_DIR", _BASE_DIR / "logs"))

for _dir in (OUTPUT_DIR, LOG_DIR):
    os.makedirs(_dir, exist_ok=True)

# Logging configuration
LOG_TO_CONSOLE: bool = _env_bool("GPTRACK_LOG_TO_CONSOLE", False)
LOGGER_NAME: str = "gp_tracking"

# Worker pool
DEFAULT_WORKERS: int = int(os.getenv("GPTRACK_WORKERS", "1"))

# Kernel numerics
METRIC_CLAMP: float = 1e-12          # radicands in [-METRIC_CLAMP, 0] are clamped to 0
LAG_SEARCH_POINTS: int = 4001        # grid size for scalar lag maximizations
LAG_SEARCH_MAX: float = 12.0         # scaled lags beyond this are numerically zero
PRIOR_JITTER: float = 1e-10

# GP prediction
PREDICT_CHUNK: int = 2048

# Bound machinery
TAU_SEARCH_RANGE: tuple[float, float] = (1e-12, float("inf"))  # upper end is the box edge
TAU_BISECTION_STEPS: int = 200
AUTO_TAU_RATIO: float = 0.01

# Closed loop
CONTROLLABILITY_TOL: float = 1e-8
EIGEN_SEPARATION: float = 1e-8
SUP_SAFETY_FACTOR: float = 1.05
GAIN_MARGIN: float = 1.05
FIXED_POINT_ROUNDS: int = 20
FIXED_POINT_TOL: float = 1e-12

# Simulation
FINE_DT: float = 3e-4
T_P: float = 30.0
BOUND_DT: float = 1e-2

# Episodic learning
EPISODE_CAP: int = 200
EPISODE_COUNT_CAP: int = 1_000_000
MAX_EPISODE_SAMPLES: int = 4000      # largest per-episode batch the T_s search will fit

# Baseline comparison (|f| <= F_BAR for the benchmark nonlinearity)
F_BAR: float = 3.0

# Derived values for convenience
OUTPUT_DIR_STR: str = str(OUTPUT_DIR)
LOG_DIR_STR: str = str(LOG_DIR)

__all__ = [
    "EXPERIMENTS_DIR",
    "OUTPUT_DIR",
    "LOG_DIR",
    "LOG_TO_CONSOLE",
    "LOGGER_NAME",
    "DEFAULT_WORKERS",
    "METRIC_CLAMP",
    "LAG_SEARCH_POINTS",
    "LAG_SEARCH_MAX",
    "PRIOR_JITTER",
    "PREDICT_CHUNK",
    "TAU_SEARCH_RANGE",
    "TAU_BISECTION_STEPS",
    "AUTO_TAU_RATIO",
    "CONTROLLABILITY_TOL",
    "EIGEN_SEPARATION",
    "SUP_SAFETY_FACTOR",
    "GAIN_MARGIN",
    "FIXED_POINT_ROUNDS",
    "FIXED_POINT_TOL",
    "FINE_DT",
    "T_P",
    "BOUND_DT",
    "EPISODE_CAP",
    "EPISODE_COUNT_CAP",
    "MAX_EPISODE_SAMPLES",
    "F_BAR",
    "OUTPUT_DIR_STR",
    "LOG_DIR_STR",
]
