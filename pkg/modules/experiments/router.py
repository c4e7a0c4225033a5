from pathlib import Path
from typing import Callable

from modules.analytics.logger import certificate, info
from modules.errors import CertificateViolation, GPTrackingError, InfeasibilityError
from modules.experiments import density_sweep, episodic, tracking, validation
from modules.experiments.artifacts import output_dir, write_json
from modules.experiments.schema import Experiment, ExperimentConfig

# Note: a new experiment needs a runner here and its required blocks in
# schema.REQUIRED_BLOCKS.
RUNNERS: dict[Experiment, Callable[[ExperimentConfig, Path], dict]] = {
    Experiment.TRACKING: tracking.run,
    Experiment.DENSITY_SWEEP: density_sweep.run,
    Experiment.EPISODIC: episodic.run,
    Experiment.VALIDATE_BOUNDS: validation.validate_bounds,
    Experiment.VALIDATE_LIPSCHITZ: validation.validate_lipschitz,
}

SUMMARY_FILE = "summary.json"


def run_experiment(config: ExperimentConfig) -> tuple[dict, Path]:
    """Run, write ``summary.json`` and raise for violated or capped outcomes."""
    name = config.experiment.value
    out = output_dir(config)
    info(name, "start", f"seeds={config.seeds} workers={config.workers} out={out}")
    try:
        summary = RUNNERS[config.experiment](config, out)
        summary["config"] = config.dump()
        path = write_json(summary, out / SUMMARY_FILE)

        status = summary.get("status", "ok")
        if status == "violated":
            raise CertificateViolation(
                f"{name}: {summary.get('violations', '?')} certificate violation(s), see {path}"
            )
        if status == "capped":
            raise InfeasibilityError(f"{name}: episode cap reached before the target error, see {path}")
    except GPTrackingError as exc:
        exc.experiment = name
        raise
    certificate(name, "done", f"all certificates held, summary at {path}")
    return summary, path
