import click

from config import DEFAULT_WORKERS
from modules.decorators import exit_on_error
from modules.experiments.artifacts import output_dir
from modules.experiments.loader import load_config
from modules.experiments.router import run_experiment
from modules.ui import messages
from utils.parsers import merge_seeds

CONFIG_OPTION = click.option(
    "--config", "config_path", required=True, type=click.Path(dir_okay=False),
    help="Experiment .ini file, or a summary.json from an earlier run.",
)


def summary_line(summary: dict) -> str:
    experiment = summary["experiment"]
    if experiment == "tracking":
        return messages.TRACKING_SUMMARY_TEXT.format(
            upsilon_max=summary["upsilon_max"], e_max=summary["e_max"],
            violations=summary["violations"], runs=len(summary["runs"]),
        )
    if experiment == "density_sweep":
        return messages.SWEEP_SUMMARY_TEXT.format(slope=summary["slope_upsilon"], points=len(summary["pitches"]))
    if experiment == "episodic":
        return messages.EPISODIC_SUMMARY_TEXT.format(
            episodes=summary["episodes"], upsilon=summary["upsilon_final"],
            bound=summary["N_E"], status=summary["status"],
        )
    return messages.COVERAGE_SUMMARY_TEXT.format(
        experiment=experiment, coverage=summary["coverage"], trials=summary["trials"]
    )


@click.group()
def cli():
    """Certified tracking with Gaussian-process compensation."""


@cli.command()
@CONFIG_OPTION
@click.option("--seed", "seeds", default=None, help="Seed or seed list, e.g. 3 or 1-10,15.")
@click.option("--workers", type=click.IntRange(min=1), default=None,
              help=f"Worker processes for seed-level parallelism (default {DEFAULT_WORKERS}).")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
@exit_on_error("run")
def run(config_path, seeds, workers, out):
    """Run an experiment and write its CSV/JSON artifacts."""
    config = load_config(config_path, seeds=seeds, workers=workers, out=out)
    click.echo(messages.RUN_START_TEXT.format(
        experiment=config.experiment.value,
        seeds=merge_seeds(config.seeds),
        workers=config.workers,
        out=output_dir(config),
    ))
    summary, path = run_experiment(config)
    click.echo(summary_line(summary))
    click.echo(messages.RUN_DONE_TEXT.format(experiment=config.experiment.value, summary=path))


@cli.command()
@CONFIG_OPTION
@exit_on_error("validate")
def validate(config_path):
    """Check a config file without running it."""
    config = load_config(config_path)
    click.echo(messages.CONFIG_OK_TEXT.format(path=config_path, experiment=config.experiment.value))


if __name__ == "__main__":
    cli()
