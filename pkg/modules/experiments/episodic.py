from __future__ import annotations

from pathlib import Path

from modules.analytics.logger import certificate, info, warning
from modules.control.episodic import (
    EpisodeConfig,
    EpisodeReport,
    episode_count_bound,
    initial_certificate,
    learn_control,
)
from modules.errors import EpisodeCapExceeded
from modules.experiments.artifacts import write_jsonl
from modules.experiments.common import bound_params, map_seeds
from modules.experiments.schema import ExperimentConfig

EXPERIMENT = "episodic"

# episodes before the guaranteed contraction is expected to dominate
SETTLING_EPISODES = 10


def episode_config(config: ExperimentConfig, seed: int) -> EpisodeConfig:
    spec = config.kernel.to_spec()
    box = config.bound.box(spec.dim)
    params = bound_params(config.bound, spec, box, EXPERIMENT)
    sim = config.simulation
    learning = config.episodic
    return EpisodeConfig(
        target_error=learning.target_error,
        xi=learning.xi,
        T_p=sim.horizon,
        fine_dt=sim.fine_dt,
        delta=params.delta,
        kernel=spec,
        reference=config.reference.to_spec(spec.dim),
        box=box,
        lipschitz=params.lipschitz,
        noise_variance=config.training.noise_variance,
        system=config.plant.control_system(),
        episode_cap=learning.episode_cap,
        gain_margin=learning.gain_margin,
        bound_dt=sim.bound_dt,
        density_points=learning.density_points,
        seed=seed,
    )


def contraction_ratios(reports: list[EpisodeReport]) -> list[float]:
    """``upsilon_i / upsilon_{i-1}`` for every episode."""
    return [r.upsilon_bar / r.upsilon_run for r in reports]


def _run_seed(task: tuple[ExperimentConfig, int, str]) -> dict:
    config, seed, out = task
    out = Path(out)
    stage = f"seed {seed}"
    episodes = episode_config(config, seed)
    start = initial_certificate(episodes)
    N_E, capped = episode_count_bound(
        episodes.target_error, start.L_dk, episodes.kernel.signal_variance, episodes.xi
    )
    certificate(EXPERIMENT, stage, f"at most N_E={N_E} episodes, confidence {1 - N_E * episodes.delta:.4g}")

    status = "ok"
    try:
        reports = learn_control(episodes, start=start)
    except EpisodeCapExceeded as exc:
        reports = exc.reports
        status = "capped"
    write_jsonl((r.to_dict() for r in reports), out / f"episodes_seed{seed}.jsonl")

    ratios = contraction_ratios(reports)
    late = ratios[SETTLING_EPISODES:]
    violations = sum(not r.certificate_held for r in reports)
    if violations:
        status = "violated"
    if reports and len(reports) > N_E:
        warning(EXPERIMENT, stage, f"{len(reports)} episodes exceed the guaranteed N_E={N_E}")
    if reports:
        info(EXPERIMENT, stage, f"{len(reports)} episodes in {sum(r.wall_time for r in reports):.1f}s")
    return {
        "seed": seed,
        "upsilon_0": start.upsilon_bar,
        "tau_0": start.tau,
        "beta_0": start.beta,
        "L_k": start.L_k,
        "L_sigma": start.L_sigma,
        "L_dk": start.L_dk,
        "target_error": episodes.target_error,
        "xi": episodes.xi,
        "N_E": N_E,
        "N_E_capped": capped,
        "confidence": 1.0 - N_E * episodes.delta,
        "episodes": len(reports),
        "upsilon_final": reports[-1].upsilon_bar if reports else start.upsilon_bar,
        "max_late_ratio": max(late) if late else None,
        "sampling_time_ok": all(r.sampling_time >= r.min_sampling_time for r in reports),
        "violations": violations,
        "status": status,
    }


def run(config: ExperimentConfig, out: Path) -> dict:
    tasks = [(config, seed, str(out)) for seed in config.seeds]
    runs = map_seeds(_run_seed, tasks, config.workers, EXPERIMENT)
    statuses = {r["status"] for r in runs}
    status = "violated" if "violated" in statuses else "capped" if "capped" in statuses else "ok"
    if status == "capped":
        capped = [r["seed"] for r in runs if r["status"] == "capped"]
        warning(EXPERIMENT, "done", f"episode cap hit for seeds {capped}")
    return {
        "experiment": EXPERIMENT,
        "runs": runs,
        "N_E": max(r["N_E"] for r in runs),
        "episodes": max(r["episodes"] for r in runs),
        "upsilon_final": max(r["upsilon_final"] for r in runs),
        "violations": sum(r["violations"] for r in runs),
        "status": status,
    }

