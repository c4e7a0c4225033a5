"""
Tracking experiment: a fixed controller with a GP compensation, the
certified bound ``upsilon(t)`` from the comparison system and the observed
error ``||e(t)||`` for every seed.

Next to the bound with the configured ``L_f`` two more curves are
integrated: one with the probabilistic Lipschitz constant (when the kernel
supports it) and one driven by the true model error ``|f - mu|`` along the
reference.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from modules.analytics.logger import certificate, info, warning
from modules.bounds.error_bounds import BoundParams, ErrorBound, probabilistic_lipschitz
from modules.control.simulation import run_closed_loop
from modules.control.tracking import (
    gain_condition,
    kappa,
    max_tracking_bound,
    reference_sup,
    tracking_bound_ode,
)
from modules.errors import InfeasibilityError
from modules.experiments.artifacts import write_csv, write_training_set
from modules.experiments.common import bound_params, map_seeds, resolve_tau, seed_streams, training_data
from modules.experiments.schema import ExperimentConfig
from modules.gp.density import data_density
from modules.gp.kernels import kernel_lipschitz, stddev_lipschitz
from modules.gp.model import fit

EXPERIMENT = "tracking"

# relative slack when comparing the simulated error against the bound
VIOLATION_SLACK = 1e-9
DENSITY_POINTS = 64


def _half_period(t: float, period: float) -> int:
    return int(np.floor((t % period) / (0.5 * period)))


def _run_seed(task: tuple[ExperimentConfig, int, str]) -> dict:
    config, seed, out = task
    out = Path(out)
    stage = f"seed {seed}"
    train_stream, run_stream = seed_streams(seed, 2)

    spec = config.kernel.to_spec()
    system = config.plant.control_system()
    box = config.bound.box(spec.dim)
    ref = config.reference.to_spec(spec.dim)
    sim = config.simulation

    data = training_data(config.training, system, np.random.default_rng(train_stream))
    model = fit(spec, data)
    L_k = kernel_lipschitz(spec, box)
    L_sigma = stddev_lipschitz(spec, box)
    params = bound_params(config.bound, spec, box, EXPERIMENT)
    params = resolve_tau(config.bound, model, params, box, EXPERIMENT, L_k=L_k)
    bound = ErrorBound.build(model, params, box, L_k=L_k, L_sigma=L_sigma)

    loop = config.plant.loop()
    if not gain_condition(loop, L_sigma, bound.beta):
        raise InfeasibilityError(
            f"gains too weak: lambda_max={loop.lambda_max:.6g} does not dominate "
            f"L_sigma zeta sqrt(beta)={L_sigma * loop.zeta * bound.sqrt_beta:.6g}"
        )

    run = run_closed_loop(loop, model, ref, sim.horizon, sim.fine_dt, seed=run_stream, system=system)
    upsilon0 = loop.initial_bound(run.errors[0])

    def along_reference(values):
        return lambda times: values(ref.evaluate(times)[0])

    def comparison(eta_ref, source: ErrorBound = bound) -> np.ndarray:
        curve = tracking_bound_ode(loop, eta_ref, L_sigma, source.beta, upsilon0, sim.horizon, sim.fine_dt)
        return curve.states[:, 0]

    upsilon = comparison(along_reference(bound.eta))
    true_error = comparison(along_reference(lambda X: np.abs(system.f(X) - model.mean(X))))

    frame = pd.DataFrame({
        "t": run.times,
        "e_norm": run.error_norm,
        "upsilon": upsilon,
        "eta_ref": bound.eta(run.references),
        "sigma_ref": model.stddev(run.references),
    })

    L_f_hat = None
    if params.lipschitz_source == "given" and config.bound.lipschitz_delta and spec.has_derivative_kernels:
        L_f_hat = probabilistic_lipschitz(spec, box, config.bound.lipschitz_delta)
        prob_params = BoundParams(params.tau, params.delta, L_f_hat, "probabilistic", config.bound.lipschitz_delta)
        prob_bound = ErrorBound.build(model, prob_params, box, L_k=L_k, L_sigma=L_sigma)
        frame["upsilon_prob"] = comparison(along_reference(prob_bound.eta), prob_bound)
    frame["upsilon_true"] = true_error

    exceed = run.error_norm > upsilon * (1.0 + VIOLATION_SLACK)
    violations = int(np.count_nonzero(exceed))
    if violations:
        first = float(run.times[np.argmax(exceed)])
        warning(EXPERIMENT, stage, f"{violations} samples exceed the bound, first at t={first:.6g}")
    else:
        certificate(EXPERIMENT, stage, f"||e|| <= upsilon at all {run.times.size} samples")

    sup_eta = reference_sup(bound.eta, ref, sim.bound_dt, sim.sup_safety)
    density_times = np.linspace(0.0, ref.period, DENSITY_POINTS)
    rho_min = min(data_density(model, x).rho for x in ref.evaluate(density_times)[0])
    t_peak_error = float(run.times[np.argmax(run.error_norm)])
    t_peak_sigma = float(run.times[np.argmax(frame["sigma_ref"].to_numpy())])

    write_csv(run.to_frame(), out / f"run_seed{seed}.csv")
    write_csv(frame, out / f"tracking_seed{seed}.csv")
    write_training_set(data, out / f"training_seed{seed}.csv")

    summary = {
        "seed": seed,
        "N": len(data),
        **bound.report(),
        **loop.summary(),
        "kappa": kappa(loop, L_sigma, bound.beta),
        "rho_min": float(rho_min),
        "sup_eta_ref": sup_eta,
        "upsilon_bar": max_tracking_bound(loop, sup_eta, L_sigma, bound.beta),
        "upsilon_max": float(np.max(upsilon)),
        "upsilon_true_max": float(np.max(true_error)),
        "L_f_hat": L_f_hat,
        "e_max": float(np.max(run.error_norm)),
        "violations": violations,
        "t_peak_error": t_peak_error,
        "t_peak_sigma": t_peak_sigma,
        "peak_aligned": _half_period(t_peak_error, ref.period) == _half_period(t_peak_sigma, ref.period),
    }
    info(EXPERIMENT, stage, f"e_max={summary['e_max']:.6g}, upsilon_max={summary['upsilon_max']:.6g}")
    return summary


def run(config: ExperimentConfig, out: Path) -> dict:
    tasks = [(config, seed, str(out)) for seed in config.seeds]
    runs = map_seeds(_run_seed, tasks, config.workers, EXPERIMENT)
    violations = sum(r["violations"] for r in runs)
    return {
        "experiment": EXPERIMENT,
        "runs": runs,
        "violations": violations,
        "violated_seeds": [r["seed"] for r in runs if r["violations"]],
        "upsilon_max": max(r["upsilon_max"] for r in runs),
        "e_max": max(r["e_max"] for r in runs),
        "status": "violated" if violations else "ok",
    }
