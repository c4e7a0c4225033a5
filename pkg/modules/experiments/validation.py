"""
Monte-Carlo checks of the probabilistic guarantees against functions drawn
from the GP prior on a grid.

``validate_bounds`` trains on noisy samples of each draw and counts the
draws for which ``|f - mu| <= eta`` holds on the whole grid.
``validate_lipschitz`` compares the finite-difference slope of 1-D draws
with the probabilistic Lipschitz constant.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from modules.analytics.logger import certificate, warning
from modules.bounds.error_bounds import BoundParams, ErrorBound, auto_tau, probabilistic_lipschitz
from modules.control.simulation import PriorSampler
from modules.experiments.artifacts import write_csv
from modules.experiments.common import map_seeds, seed_streams
from modules.experiments.schema import ExperimentConfig
from modules.gp.domain import DomainBox
from modules.gp.kernels import kernel_lipschitz, stddev_lipschitz
from modules.gp.model import TrainingSet, fit

# trials handled by one worker task; the prior factorization is shared within it
TRIALS_PER_TASK = 10


def grid_lipschitz(values: np.ndarray, points_per_axis: int, box: DomainBox) -> float:
    """Euclidean combination of the largest per-axis finite-difference slopes of a grid function."""
    shape = (points_per_axis,) * box.dimension
    field = np.asarray(values, dtype=float).reshape(shape)
    pitch = box.edge / (points_per_axis - 1)
    slopes = [np.max(np.abs(np.diff(field, axis=axis))) / pitch for axis in range(box.dimension)]
    return float(np.linalg.norm(slopes))


def _chunks(streams: list, size: int) -> list[tuple[int, list]]:
    return [(start, streams[start:start + size]) for start in range(0, len(streams), size)]


def _bound_trials(task: tuple[ExperimentConfig, int, int, list]) -> list[dict]:
    config, seed, offset, streams = task
    spec = config.kernel.to_spec()
    box = config.bound.box(spec.dim)
    checks = config.validation
    noise_variance = config.training.noise_variance
    n_grid = checks.grid_points
    grid = box.grid(n_grid)
    sampler = PriorSampler(spec, grid)
    L_k = kernel_lipschitz(spec, box)
    L_sigma = stddev_lipschitz(spec, box) if spec.stationary else None

    records = []
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        f = sampler.draw(rng)
        idx = rng.choice(grid.shape[0], size=checks.training_points, replace=False)
        y = f[idx] + rng.normal(0.0, np.sqrt(noise_variance), idx.size)
        model = fit(spec, TrainingSet(grid[idx], y, noise_variance))
        L_f = grid_lipschitz(f, n_grid, box)
        tau = box.edge if config.bound.tau == "auto" else config.bound.tau
        params = BoundParams(tau, config.bound.delta, L_f)
        if config.bound.tau == "auto":
            params = params.with_tau(auto_tau(model, params, box, L_k=L_k, L_sigma=L_sigma))
        bound = ErrorBound.build(model, params, box, L_k=L_k, L_sigma=L_sigma)
        error = np.abs(f - model.mean(grid))
        eta = bound.eta(grid)
        records.append({
            "seed": seed,
            "trial": offset + i,
            "covered": bool(np.all(error <= eta)),
            "max_ratio": float(np.max(error / eta)),
            "L_f": L_f,
            "tau": params.tau,
            "beta": bound.beta,
            "gamma": bound.gamma,
        })
    return records


def _lipschitz_trials(task: tuple[ExperimentConfig, int, int, list]) -> list[dict]:
    config, seed, offset, streams = task
    spec = config.kernel.to_spec()
    box = config.bound.box(spec.dim)
    points = int(round(box.edge / config.validation.pitch)) + 1
    sampler = PriorSampler(spec, box.grid(points))
    L_hat = probabilistic_lipschitz(spec, box, config.bound.lipschitz_delta)

    records = []
    for i, stream in enumerate(streams):
        f = sampler.draw(np.random.default_rng(stream))
        slope = grid_lipschitz(f, points, box)
        records.append({
            "seed": seed,
            "trial": offset + i,
            "slope": slope,
            "L_f_hat": L_hat,
            "covered": bool(slope <= L_hat),
        })
    return records


def _monte_carlo(config: ExperimentConfig, out: Path, worker, experiment: str) -> tuple[pd.DataFrame, dict]:
    trials = config.validation.trials
    tasks = [
        (config, seed, offset, chunk)
        for seed in config.seeds
        for offset, chunk in _chunks(seed_streams(seed, trials), TRIALS_PER_TASK)
    ]
    records = [r for chunk in map_seeds(worker, tasks, config.workers, experiment) for r in chunk]
    frame = pd.DataFrame(records)
    write_csv(frame, out / "trials.csv")

    coverage = float(frame["covered"].mean())
    required = config.validation.required_coverage
    if coverage >= required:
        certificate(experiment, "coverage", f"{coverage:.4f} >= {required} over {len(frame)} trials")
    else:
        warning(experiment, "coverage", f"{coverage:.4f} < {required} over {len(frame)} trials")
    summary = {
        "experiment": experiment,
        "trials": int(len(frame)),
        "coverage": coverage,
        "required_coverage": required,
        "status": "ok" if coverage >= required else "violated",
    }
    return frame, summary


def validate_bounds(config: ExperimentConfig, out: Path) -> dict:
    frame, summary = _monte_carlo(config, out, _bound_trials, "validate_bounds")
    summary.update({
        "delta": config.bound.delta,
        "N": config.validation.training_points,
        "grid_points": config.validation.grid_points,
        "max_ratio": float(frame["max_ratio"].max()),
        "beta": float(frame["beta"].iloc[0]),
        "gamma_max": float(frame["gamma"].max()),
    })
    return summary


def validate_lipschitz(config: ExperimentConfig, out: Path) -> dict:
    frame, summary = _monte_carlo(config, out, _lipschitz_trials, "validate_lipschitz")
    summary.update({
        "delta_L": config.bound.lipschitz_delta,
        "L_f_hat": float(frame["L_f_hat"].iloc[0]),
        "max_slope": float(frame["slope"].max()),
        "pitch": config.validation.pitch,
    })
    return summary
