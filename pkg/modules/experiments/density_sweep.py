"""
Density sweep: training grids of decreasing pitch with the gains retuned
so that ``kappa`` stays fixed. The certified bound should then fall like
``rho_min^(-1/2)``; the fitted log-log slope is reported next to the slope
of the observed error and the gain an uncompensated controller would need.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from modules.analytics.logger import certificate, info, warning
from modules.bounds.error_bounds import ErrorBound
from modules.control.simulation import run_closed_loop
from modules.control.tracking import (
    baseline_gain,
    gains_for_kappa,
    kappa,
    max_tracking_bound,
    reference_sup,
    tau_for_density,
)
from modules.experiments.artifacts import write_csv
from modules.experiments.common import bound_params, map_seeds, seed_streams
from modules.experiments.schema import ExperimentConfig
from modules.gp.density import DensityResult, data_density, density_variance_bound
from modules.gp.kernels import kernel_lipschitz, stddev_lipschitz
from modules.gp.model import GPModel, TrainingSet, fit

EXPERIMENT = "density_sweep"


def pitch_grid(lower, upper, pitch: float) -> np.ndarray:
    axes = [np.arange(lo, hi + 0.5 * pitch, pitch) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def density_profile(model: GPModel, times: np.ndarray, points: np.ndarray, bound: ErrorBound,
                    densities: list[DensityResult] | None = None) -> pd.DataFrame:
    """Density, exact posterior stddev and its density bound at each point."""
    if densities is None:
        densities = [data_density(model, x) for x in points]
    sigma_bound = [density_variance_bound(model, x, d).bound for x, d in zip(points, densities)]
    return pd.DataFrame({
        "t": times,
        **{f"x_{j + 1}": points[:, j] for j in range(points.shape[1])},
        "rho": [d.rho for d in densities],
        "sigma_exact": model.stddev(points),
        "sigma_bound_prop10": sigma_bound,
        "eta": bound.eta(points),
    })


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x`` over positive pairs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def _run_pitch(task: tuple[ExperimentConfig, int, float, str]) -> dict:
    config, seed, pitch, out = task
    out = Path(out)
    stage = f"seed {seed} pitch {pitch:g}"
    sweep = config.density_sweep
    sim = config.simulation
    train_stream, run_stream = seed_streams(seed, 2)

    spec = config.kernel.to_spec()
    system = config.plant.control_system()
    box = config.bound.box(spec.dim)
    ref = config.reference.to_spec(spec.dim)

    X = pitch_grid(sweep.lower, sweep.upper, pitch)
    rng = np.random.default_rng(train_stream)
    noise_variance = config.training.noise_variance
    data = TrainingSet(X, system.f(X) + rng.normal(0.0, np.sqrt(noise_variance), X.shape[0]), noise_variance)
    model = fit(spec, data)

    times = np.linspace(0.0, ref.period, sweep.density_points)
    ref_states = ref.evaluate(times)[0]
    densities = [data_density(model, x) for x in ref_states]
    rho_min = float(min(d.rho for d in densities))

    L_k = kernel_lipschitz(spec, box)
    L_sigma = stddev_lipschitz(spec, box)
    params = bound_params(config.bound, spec, box, EXPERIMENT)
    tau = tau_for_density(model, rho_min, box, params.delta, params.lipschitz, L_k, L_sigma)
    bound = ErrorBound.build(model, params.with_tau(tau), box, L_k=L_k, L_sigma=L_sigma)

    loop = gains_for_kappa(system.plant, sweep.kappa, L_sigma, bound.beta)
    sup_eta = reference_sup(bound.eta, ref, sim.bound_dt, sim.sup_safety)
    upsilon_bar = max_tracking_bound(loop, sup_eta, L_sigma, bound.beta)
    run = run_closed_loop(loop, model, ref, sim.horizon, sim.fine_dt, seed=run_stream, system=system)
    e_max = float(np.max(run.error_norm))
    held = e_max <= upsilon_bar
    if held:
        certificate(EXPERIMENT, stage, f"e_max={e_max:.6g} <= upsilon_bar={upsilon_bar:.6g}")
    else:
        warning(EXPERIMENT, stage, f"e_max={e_max:.6g} exceeds upsilon_bar={upsilon_bar:.6g}")

    write_csv(
        density_profile(model, times, ref_states, bound, densities),
        out / f"density_seed{seed}_pitch{pitch:g}.csv",
    )
    return {
        "seed": seed,
        "pitch": pitch,
        "N": len(data),
        "rho_min": rho_min,
        "tau": tau,
        "beta": bound.beta,
        "gamma": bound.gamma,
        "L_mu": bound.L_mu,
        "L_sigma": L_sigma,
        "zeta": loop.zeta,
        "lambda_max": loop.lambda_max,
        "kappa": kappa(loop, L_sigma, bound.beta),
        "upsilon_bar": upsilon_bar,
        "e_max": e_max,
        "baseline_decay": baseline_gain(loop.zeta, sweep.f_bar, upsilon_bar),
        "held": held,
    }


def run(config: ExperimentConfig, out: Path) -> dict:
    pitches = sorted(config.density_sweep.pitches, reverse=True)
    tasks = [(config, seed, pitch, str(out)) for seed in config.seeds for pitch in pitches]
    rows = map_seeds(_run_pitch, tasks, config.workers, EXPERIMENT)
    frame = pd.DataFrame(rows)
    write_csv(frame, out / "density_sweep.csv")

    slopes = []
    for seed, group in frame.groupby("seed", sort=True):
        slopes.append({
            "seed": int(seed),
            "slope_upsilon": loglog_slope(group["rho_min"], group["upsilon_bar"]),
            "slope_error": loglog_slope(group["rho_min"], group["e_max"]),
        })
    failures = int((~frame["held"]).sum())
    slope = float(np.nanmean([s["slope_upsilon"] for s in slopes]))
    info(EXPERIMENT, "fit", f"mean log-log slope {slope:.4f} over {len(pitches)} pitches")
    return {
        "experiment": EXPERIMENT,
        "kappa": config.density_sweep.kappa,
        "f_bar": config.density_sweep.f_bar,
        "pitches": pitches,
        "slopes": slopes,
        "slope_upsilon": slope,
        "slope_error": float(np.nanmean([s["slope_error"] for s in slopes])),
        "violations": failures,
        "status": "violated" if failures else "ok",
    }
