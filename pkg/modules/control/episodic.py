"""
Episodic data generation driving the certified tracking bound below a target.

Each episode runs the current controller for ``T_p`` from ``x_ref(0)``,
records measurements at ``fine_dt``, keeps the coarsest rung of the
sampling-time ladder that still satisfies

    max_t sigma^2(x_ref(t)) <= 16 L_dk upsilon_{i-1}^2,

refits the GP on all data collected so far and re-derives tau, beta,
the gains and the next certified bound upsilon_i.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from config import BOUND_DT, EPISODE_CAP, EPISODE_COUNT_CAP, GAIN_MARGIN, MAX_EPISODE_SAMPLES
from modules.analytics.logger import certificate, info, warning
from modules.bounds.error_bounds import BoundParams, ErrorBound
from modules.control.simulation import ControlAffineSystem, ReferenceSpec, benchmark_system, run_closed_loop
from modules.control.tracking import (
    ClosedLoop,
    gains_for_decay_rate,
    max_tracking_bound,
    reference_sup,
    tau_for_stddev,
)
from modules.errors import EpisodeCapExceeded, InfeasibilityError, InputError
from modules.gp.density import data_density
from modules.gp.domain import DomainBox
from modules.gp.kernels import KernelSpec, gradient_lipschitz, kernel_lipschitz, stddev_lipschitz
from modules.gp.model import GPModel, TrainingSet, downsample, fit

EXPERIMENT = "episodic"


@dataclass(frozen=True)
class EpisodeConfig:
    target_error: float
    xi: float
    T_p: float
    fine_dt: float
    delta: float
    kernel: KernelSpec
    reference: ReferenceSpec
    box: DomainBox
    lipschitz: float
    noise_variance: float
    system: ControlAffineSystem = field(default_factory=benchmark_system)
    episode_cap: int = EPISODE_CAP
    gain_margin: float = GAIN_MARGIN
    bound_dt: float = BOUND_DT
    density_points: int = 64
    pole_pattern: Sequence[complex] | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.xi < 1:
            raise InputError(f"xi must lie in (0, 1), got {self.xi}")
        if not self.target_error > 0:
            raise InputError(f"target error must be positive, got {self.target_error}")
        if not 0 < self.fine_dt <= self.T_p:
            raise InputError(f"need 0 < fine_dt <= T_p, got fine_dt={self.fine_dt}, T_p={self.T_p}")
        if not 0 < self.delta < 1:
            raise InputError(f"delta must lie in (0, 1), got {self.delta}")
        if self.episode_cap < 1:
            raise InputError(f"episode cap must be >= 1, got {self.episode_cap}")

    @property
    def plant(self):
        return self.system.plant


@dataclass(frozen=True)
class EpisodeReport:
    episode: int
    sampling_time: float
    ladder_rung: int
    theta: tuple[float, ...]
    lambda_max: float
    zeta: float
    data_size: int
    upsilon_bar: float
    upsilon_run: float
    observed_max_error: float
    certificate_held: bool
    tau: float
    beta: float
    rho_min: float
    min_sampling_time: float
    max_speed: float
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = False) -> dict:
        """Report fields; ``wall_time`` only with ``timing`` so artifacts stay reproducible."""
        out = dict(self.__dict__)
        out["theta"] = list(self.theta)
        if not timing:
            del out["wall_time"]
        return out


@dataclass(frozen=True)
class InitialCertificate:
    model: GPModel
    loop: ClosedLoop
    tau: float
    beta: float
    upsilon_bar: float
    L_k: float
    L_sigma: float
    L_dk: float


def select_gains(config: EpisodeConfig, L_sigma: float, beta_value: float, zeta: float, L_dk: float) -> ClosedLoop:
    """Gains with ``-lambda_max >= margin (8 sqrt(L_dk) + xi L_sigma) / xi * zeta sqrt(beta)``."""
    coefficient = (8.0 * np.sqrt(L_dk) + config.xi * L_sigma) / config.xi * np.sqrt(beta_value)
    return gains_for_decay_rate(
        config.plant, coefficient, margin=config.gain_margin, pattern=config.pole_pattern, zeta0=zeta
    )


def sampling_ladder(fine_dt: float, T_p: float) -> np.ndarray:
    rungs = int(np.floor(np.log2(T_p / fine_dt) + 1e-9))
    return fine_dt * 2.0 ** np.arange(max(rungs, 0) + 1)


def select_sampling_time(raw: TrainingSet, model_builder: Callable[[TrainingSet], GPModel], x_ref: np.ndarray,
                         upsilon_prev: float, L_dk: float, fine_dt: float, T_p: float,
                         max_samples: int = MAX_EPISODE_SAMPLES) -> tuple[float, int, GPModel]:
    """Largest ladder rung ``fine_dt * 2^j`` whose downsampled data satisfies the variance condition.

    Strided subsets are nested along the ladder, so the condition is monotone
    in ``j`` and a bisection over rungs suffices. Rungs keeping more than
    ``max_samples`` new points count as failing.
    """
    ladder = sampling_ladder(fine_dt, T_p)
    threshold = 16.0 * L_dk * upsilon_prev**2
    cache: dict[int, tuple[bool, GPModel | None]] = {}

    def check(j: int) -> bool:
        if j not in cache:
            sampled = downsample(raw, fine_dt, ladder[j])
            if len(sampled) > max_samples:
                cache[j] = (False, None)
            else:
                model = model_builder(sampled)
                cache[j] = (float(np.max(model.variance(x_ref))) <= threshold, model)
        return cache[j][0]

    # check(lo) holds and check(hi) fails, with virtual rungs at both ends
    lo, hi = -1, len(ladder)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if check(mid):
            lo = mid
        else:
            hi = mid
    if lo < 0:
        raise InfeasibilityError(
            f"variance condition unreachable down to T_s = {ladder[hi]:g} "
            f"(threshold {threshold:.3g}); lengthen T_p or reduce measurement noise"
        )
    return float(ladder[lo]), lo, cache[lo][1]


def min_sampling_time(L_dk: float, target_error: float, noise_variance: float, max_speed: float) -> float:
    if min(L_dk, target_error, noise_variance, max_speed) <= 0:
        raise InputError("minimum sampling time needs positive inputs")
    return 16.0 * L_dk * target_error**3 / (noise_variance * max_speed)


def episode_count_bound(target_error: float, L_dk: float, k0: float, xi: float) -> tuple[int, bool]:
    """Guaranteed episode count and whether it was clipped at the cap."""
    if not 0 < xi < 1:
        raise InputError(f"xi must lie in (0, 1), got {xi}")
    if not target_error > 0:
        raise InputError(f"target error must be positive, got {target_error}")
    ratio = (np.log(4.0 * target_error * np.sqrt(L_dk)) - np.log(np.sqrt(k0))) / np.log(xi)
    if not np.isfinite(ratio) or ratio > EPISODE_COUNT_CAP:
        return EPISODE_COUNT_CAP, True
    return max(0, int(np.ceil(ratio))), False


def _reference_grid(reference: ReferenceSpec, T_p: float, dt: float) -> np.ndarray:
    states, _ = reference.evaluate(np.arange(0.0, T_p + 0.5 * dt, dt))
    return states


def _certify(config: EpisodeConfig, model: GPModel, x_ref: np.ndarray, L_k: float, L_sigma: float,
             L_dk: float, zeta: float) -> tuple[ClosedLoop, float, float, float]:
    sup_sigma = float(np.max(model.stddev(x_ref)))
    tau = tau_for_stddev(model, sup_sigma, config.box, config.delta, config.lipschitz, L_k, L_sigma)
    params = BoundParams(tau=tau, delta=config.delta, lipschitz=config.lipschitz)
    bound = ErrorBound.build(model, params, config.box, L_k=L_k, L_sigma=L_sigma)
    loop = select_gains(config, L_sigma, bound.beta, zeta, L_dk)
    sup_eta = reference_sup(lambda X: bound.eta(X, check_domain=False), config.reference, config.bound_dt)
    upsilon = max_tracking_bound(loop, sup_eta, L_sigma, bound.beta)
    return loop, tau, bound.beta, upsilon


def initial_certificate(config: EpisodeConfig) -> InitialCertificate:
    spec = config.kernel
    L_k = kernel_lipschitz(spec, config.box)
    L_sigma = stddev_lipschitz(spec, config.box)
    L_dk = gradient_lipschitz(spec)
    model = fit(spec, TrainingSet.empty(spec.dim, config.noise_variance))
    x_ref = _reference_grid(config.reference, config.T_p, config.bound_dt)
    loop, tau, beta_value, upsilon = _certify(
        config, model, x_ref, L_k, L_sigma, L_dk, float(np.linalg.norm(config.plant.b))
    )
    certificate(EXPERIMENT, "init", f"prior certificate upsilon_0={upsilon:.6g} (tau={tau:.3g}, beta={beta_value:.4g})")
    return InitialCertificate(model, loop, tau, beta_value, upsilon, L_k, L_sigma, L_dk)


def learn_control(config: EpisodeConfig, on_episode: Callable[[EpisodeReport], None] | None = None,
                  start: InitialCertificate | None = None) -> list[EpisodeReport]:
    start = start or initial_certificate(config)
    model, loop, upsilon = start.model, start.loop, start.upsilon_bar
    data = model.data
    x_ref = _reference_grid(config.reference, config.T_p, config.bound_dt)
    density_ref = _reference_grid(config.reference, config.T_p, config.T_p / max(config.density_points - 1, 1))
    seeds = np.random.SeedSequence(config.seed)
    reports: list[EpisodeReport] = []

    while upsilon > config.target_error:
        episode = len(reports) + 1
        if episode > config.episode_cap:
            raise EpisodeCapExceeded(config.episode_cap, reports)
        started = time.perf_counter()

        run = run_closed_loop(loop, model, config.reference, config.T_p, config.fine_dt,
                              seed=seeds.spawn(1)[0], system=config.system)
        observed = float(np.max(run.error_norm))
        held = observed <= upsilon
        if not held:
            warning(EXPERIMENT, f"episode {episode}", f"observed error {observed:.6g} exceeds certificate {upsilon:.6g}")

        def build(sampled: TrainingSet, base: TrainingSet = data) -> GPModel:
            return fit(config.kernel, base.concat(sampled))

        T_s, rung, model = select_sampling_time(
            run.raw, build, x_ref, upsilon, start.L_dk, config.fine_dt, config.T_p
        )
        data = model.data
        upsilon_run = upsilon
        loop, tau, beta_value, upsilon = _certify(
            config, model, x_ref, start.L_k, start.L_sigma, start.L_dk, loop.zeta
        )
        speed = run.max_speed()
        rho_min = min(data_density(model, x).rho for x in density_ref)
        report = EpisodeReport(
            episode=episode,
            sampling_time=T_s,
            ladder_rung=rung,
            theta=tuple(float(v) for v in loop.gains),
            lambda_max=loop.lambda_max,
            zeta=loop.zeta,
            data_size=len(data),
            upsilon_bar=upsilon,
            upsilon_run=upsilon_run,
            observed_max_error=observed,
            certificate_held=held,
            tau=tau,
            beta=beta_value,
            rho_min=float(rho_min),
            min_sampling_time=min_sampling_time(start.L_dk, config.target_error, config.noise_variance, speed),
            max_speed=speed,
            wall_time=time.perf_counter() - started,
        )
        reports.append(report)
        certificate(
            EXPERIMENT, f"episode {episode}",
            f"T_s={T_s:.3g} N={len(data)} lambda_max={loop.lambda_max:.4g} upsilon={upsilon:.6g} "
            f"({report.wall_time:.1f}s)",
        )
        if on_episode is not None:
            on_episode(report)

    info(EXPERIMENT, "done", f"target {config.target_error:g} reached after {len(reports)} episodes")
    return reports
