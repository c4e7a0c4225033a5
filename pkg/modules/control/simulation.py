from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError, cholesky, eigh

from config import PRIOR_JITTER
from modules.analytics.logger import warning
from modules.control.integrator import Trajectory, integrate, step_count
from modules.errors import InputError, NumericalDegeneracyError
from modules.gp.kernels import KernelSpec, as_points, kernel_matrix
from modules.gp.model import GPModel, TrainingSet

if TYPE_CHECKING:
    from modules.control.tracking import ClosedLoop, LinearPlant

__all__ = [
    "integrate",
    "Trajectory",
    "ControlAffineSystem",
    "benchmark_system",
    "ReferenceSpec",
    "reference",
    "SimRun",
    "run_closed_loop",
    "PriorSampler",
    "sample_prior_function",
]


@dataclass(frozen=True)
class ControlAffineSystem:
    """``x' = A x + b (f(x) + g(x) u)``; ``f`` and ``g`` take ``(n, d)`` arrays."""

    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    plant: "LinearPlant"


def _benchmark_f(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return 1.0 - np.sin(2.0 * X[:, 0]) + 1.0 / (1.0 + np.exp(-X[:, 1]))


def _benchmark_g(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    return 1.0 + 0.5 * np.sin(X[:, 1] / 2.0)


def benchmark_system() -> ControlAffineSystem:
    from modules.control.tracking import LinearPlant

    plant = LinearPlant(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([0.0, 1.0]))
    return ControlAffineSystem(_benchmark_f, _benchmark_g, plant)


@dataclass(frozen=True)
class ReferenceSpec:
    """Sinusoid ``amplitude * sin(frequency * t)`` on the first state of an
    integrator chain; the remaining states are its time derivatives and
    ``r_ref`` is the next derivative."""

    amplitude: float = 2.0
    frequency: float = 1.0
    dimension: int = 2

    def __post_init__(self):
        if not self.frequency > 0:
            raise InputError(f"reference frequency must be positive, got {self.frequency}")
        if self.dimension < 1:
            raise InputError(f"reference dimension must be >= 1, got {self.dimension}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.frequency

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phase = self.frequency * t
        orders = np.arange(self.dimension + 1)
        derivs = (
            self.amplitude
            * self.frequency ** orders[None, :]
            * np.sin(phase[:, None] + orders[None, :] * np.pi / 2.0)
        )
        return derivs[:, : self.dimension], derivs[:, self.dimension]


def reference(spec: ReferenceSpec, t: float) -> tuple[np.ndarray, float]:
    states, r = spec.evaluate(t)
    return states[0], float(r[0])


@dataclass(frozen=True)
class SimRun:
    times: np.ndarray
    states: np.ndarray
    references: np.ndarray
    controls: np.ndarray
    raw: TrainingSet
    seed: int | None

    @property
    def errors(self) -> np.ndarray:
        return self.states - self.references

    @property
    def error_norm(self) -> np.ndarray:
        return np.linalg.norm(self.errors, axis=1)

    def max_speed(self) -> float:
        """Largest ``||x'||`` along the run from finite differences of the states."""
        if self.times.size < 2:
            return 0.0
        velocity = np.diff(self.states, axis=0) / np.diff(self.times)[:, None]
        return float(np.max(np.linalg.norm(velocity, axis=1)))

    def to_frame(self) -> pd.DataFrame:
        d = self.states.shape[1]
        frame = pd.DataFrame({"t": self.times})
        for j in range(d):
            frame[f"x_{j + 1}"] = self.states[:, j]
        for j in range(d):
            frame[f"xref_{j + 1}"] = self.references[:, j]
        frame["u"] = self.controls
        frame["e_norm"] = self.error_norm
        return frame


def run_closed_loop(loop: "ClosedLoop", model: GPModel, ref: ReferenceSpec, T_p: float, fine_dt: float,
                    seed=None, system: ControlAffineSystem | None = None,
                    measurement_noise: float | None = None) -> SimRun:
    """Simulate the compensated closed loop from ``x(0) = x_ref(0)`` and record
    noisy measurements ``y = f(x) + eps`` at every ``fine_dt``."""
    system = system or benchmark_system()
    plant = loop.plant
    if model.kernel.dim != plant.dim or ref.dimension != plant.dim:
        raise InputError(
            f"dimension mismatch: plant {plant.dim}, model {model.kernel.dim}, reference {ref.dimension}"
        )
    A, b, theta = plant.A, plant.b, loop.gains

    def control(t: float, x: np.ndarray) -> float:
        x_ref, r_ref = reference(ref, t)
        row = x[None, :]
        mu = model.mean(row)[0] if model.size else 0.0
        return float((-theta @ (x - x_ref) + r_ref - mu) / system.g(row)[0])

    def dynamics(t: float, x: np.ndarray) -> np.ndarray:
        row = x[None, :]
        u = control(t, x)
        return A @ x + b * (system.f(row)[0] + system.g(row)[0] * u)

    x0, _ = reference(ref, 0.0)
    trajectory = integrate(dynamics, x0, step_count(T_p, fine_dt) * fine_dt, fine_dt)
    references, r_refs = ref.evaluate(trajectory.times)
    mu = model.mean(trajectory.states) if model.size else np.zeros(trajectory.times.size)
    controls = (
        -(trajectory.states - references) @ theta + r_refs - mu
    ) / system.g(trajectory.states)

    noise_variance = model.data.noise_variance if measurement_noise is None else measurement_noise
    if noise_variance < 0:
        raise InputError(f"measurement noise variance must be nonnegative, got {noise_variance}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(noise_variance), trajectory.times.size)
    targets = system.f(trajectory.states) + noise
    raw = TrainingSet(trajectory.states, targets, model.data.noise_variance)
    return SimRun(trajectory.times, trajectory.states, references, controls, raw,
                  seed if isinstance(seed, (int, np.integer)) else None)


class PriorSampler:
    """Joint draws of a zero-mean GP prior on a fixed grid.

    The grid covariance is factored once; an eigendecomposition takes over
    when the jittered Cholesky factorization fails.
    """

    def __init__(self, spec: KernelSpec, grid, jitter: float = PRIOR_JITTER):
        self.spec = spec
        self.grid = as_points(grid, spec.dim)
        cov = kernel_matrix(spec, self.grid)
        cov[np.diag_indices_from(cov)] += jitter * spec.signal_variance
        try:
            self._factor = cholesky(cov, lower=True, check_finite=False)
        except LinAlgError:
            values, vectors = eigh(cov, check_finite=False)
            if values[0] < -1e-8 * values[-1]:
                raise NumericalDegeneracyError(
                    f"prior covariance has eigenvalue {values[0]:.3e}; grid cannot be sampled"
                ) from None
            warning("-", "prior", "jittered Cholesky failed; sampling through eigendecomposition")
            self._factor = vectors * np.sqrt(np.clip(values, 0.0, None))

    def draw(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        n = self.grid.shape[0]
        if size is None:
            return self._factor @ rng.standard_normal(n)
        return (self._factor @ rng.standard_normal((n, size))).T


def sample_prior_function(spec: KernelSpec, grid, seed) -> np.ndarray:
    return PriorSampler(spec, grid).draw(np.random.default_rng(seed))
