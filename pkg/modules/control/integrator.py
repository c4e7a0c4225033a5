from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from modules.errors import DivergenceError, InputError


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def step_count(T: float, dt: float) -> int:
    if not dt > 0:
        raise InputError(f"time step must be positive, got {dt}")
    if T < 0:
        raise InputError(f"horizon must be nonnegative, got {T}")
    return int(np.floor(T / dt + 1e-9))


def integrate(dynamics: Callable[[float, np.ndarray], np.ndarray], x0, T: float, dt: float,
              t0: float = 0.0) -> Trajectory:
    """Classical fixed-step RK4; samples at ``t0 + k * dt`` for ``k = 0 .. floor(T / dt)``."""
    steps = step_count(T, dt)
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    times = t0 + dt * np.arange(steps + 1)
    states = np.empty((steps + 1, x.size))
    states[0] = x
    half = 0.5 * dt
    for k in range(steps):
        t = times[k]
        k1 = dynamics(t, x)
        k2 = dynamics(t + half, x + half * k1)
        k3 = dynamics(t + half, x + half * k2)
        k4 = dynamics(t + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(float(times[k + 1]))
        states[k + 1] = x
    return Trajectory(times, states)
