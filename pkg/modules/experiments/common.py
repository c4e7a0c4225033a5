"""Pieces every runner needs: the seed pool, training data and bound parameters."""

from __future__ import annotations

import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
from tqdm import tqdm

from modules.analytics.logger import certificate, info
from modules.bounds.error_bounds import BoundParams, auto_tau, probabilistic_lipschitz
from modules.control.simulation import ControlAffineSystem
from modules.experiments.artifacts import read_training_set
from modules.experiments.schema import BoundBlock, TrainingBlock
from modules.gp.domain import DomainBox
from modules.gp.kernels import KernelSpec
from modules.gp.model import GPModel, TrainingSet

T = TypeVar("T")
R = TypeVar("R")


def progress(iterable: Iterable[T], total: int, desc: str) -> Iterable[T]:
    return tqdm(iterable, total=total, desc=desc, leave=False, disable=not sys.stderr.isatty())


def map_seeds(func: Callable[[T], R], tasks: Sequence[T], workers: int, desc: str) -> list[R]:
    """Apply ``func`` to every task; results come back in task order.

    ``func`` and the tasks must be picklable when ``workers > 1``.
    """
    if workers <= 1 or len(tasks) <= 1:
        return list(progress(map(func, tasks), len(tasks), desc))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(progress(executor.map(func, tasks), len(tasks), desc))


def seed_streams(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


def training_data(block: TrainingBlock, system: ControlAffineSystem,
                  rng: np.random.Generator) -> TrainingSet:
    """Grid (or file) inputs with targets ``f(x) + eps``; a file supplies its own targets."""
    if block.file:
        return read_training_set(block.file, block.noise_variance)
    X = block.grid()
    noise = rng.normal(0.0, np.sqrt(block.noise_variance), X.shape[0])
    return TrainingSet(X, system.f(X) + noise, block.noise_variance)


def bound_params(block: BoundBlock, spec: KernelSpec, box: DomainBox, experiment: str) -> BoundParams:
    """Bound parameters with a placeholder tau when the block asks for ``auto``."""
    tau = box.edge if block.tau == "auto" else block.tau
    if block.lipschitz == "probabilistic":
        L_f = probabilistic_lipschitz(spec, box, block.lipschitz_delta)
        certificate(experiment, "lipschitz", f"L_f={L_f:.6g} with probability {1 - block.lipschitz_delta:g}")
        return BoundParams(tau, block.delta, L_f, "probabilistic", block.lipschitz_delta)
    return BoundParams(tau, block.delta, block.lipschitz, "given", block.lipschitz_delta)


def resolve_tau(block: BoundBlock, model: GPModel, params: BoundParams, box: DomainBox,
                experiment: str, L_k: float | None = None) -> BoundParams:
    if block.tau != "auto":
        return params
    tau = auto_tau(model, params, box, L_k=L_k)
    info(experiment, "tau", f"auto tau={tau:.6g}")
    return params.with_tau(tau)
