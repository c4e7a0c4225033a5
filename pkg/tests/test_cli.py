import pandas as pd
import pytest
from click.testing import CliRunner

from config import EXPERIMENTS_DIR
from main import cli
from modules.decorators import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VIOLATION, exit_code_for, exit_on_error
from modules.errors import (
    CertificateViolation,
    ConfigError,
    EpisodeCapExceeded,
    IllConditionedDataError,
    InfeasibilityError,
    UnsupportedOperationError,
)
from modules.experiments.artifacts import read_json

LIPSCHITZ_INI = """\
experiment = validate_lipschitz
seeds = 0

[kernel]
family = squared_exponential
lengthscales = 1.0

[bound]
lipschitz = probabilistic
lipschitz_delta = 0.01
box_edge = 10.0

[validation]
trials = 20
pitch = 0.1
required_coverage = 0.9
"""


@pytest.fixture
def runner():
    return CliRunner()


def write_ini(tmp_path, text, name="experiment.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestValidateCommand:
    @pytest.mark.parametrize("path", sorted(EXPERIMENTS_DIR.glob("*.ini")), ids=lambda p: p.stem)
    def test_shipped_configs(self, runner, path):
        result = runner.invoke(cli, ["validate", "--config", str(path)])
        assert result.exit_code == 0, result.output
        assert path.stem in result.output

    def test_delta_out_of_range(self, runner, tmp_path):
        text = LIPSCHITZ_INI.replace("[bound]\n", "[bound]\ndelta = 1.5\n")
        result = runner.invoke(cli, ["validate", "--config", write_ini(tmp_path, text)])
        assert result.exit_code == EXIT_CONFIG
        assert "bound.delta" in result.output

    def test_probabilistic_lipschitz_with_rough_kernel(self, runner, tmp_path):
        text = LIPSCHITZ_INI.replace("squared_exponential", "matern32")
        result = runner.invoke(cli, ["validate", "--config", write_ini(tmp_path, text)])
        assert result.exit_code == EXIT_CONFIG
        assert "matern32" in result.output

    def test_missing_block(self, runner, tmp_path):
        text = LIPSCHITZ_INI.split("[validation]")[0]
        result = runner.invoke(cli, ["validate", "--config", write_ini(tmp_path, text)])
        assert result.exit_code == EXIT_CONFIG
        assert "needs the block(s): validation" in result.output

    def test_ini_syntax_error(self, runner, tmp_path):
        text = LIPSCHITZ_INI + "no equals sign here\n"
        result = runner.invoke(cli, ["validate", "--config", write_ini(tmp_path, text)])
        assert result.exit_code == EXIT_CONFIG
        assert "line" in result.output

    def test_missing_file(self, runner, tmp_path):
        result = runner.invoke(cli, ["validate", "--config", str(tmp_path / "absent.ini")])
        assert result.exit_code == EXIT_CONFIG

    def test_zero_workers_rejected(self, runner, tmp_path):
        path = write_ini(tmp_path, LIPSCHITZ_INI)
        result = runner.invoke(cli, ["run", "--config", path, "--workers", "0"])
        assert result.exit_code == EXIT_CONFIG


class TestRunCommand:
    def test_lipschitz_validation_end_to_end(self, runner, tmp_path):
        out = tmp_path / "first"
        path = write_ini(tmp_path, LIPSCHITZ_INI)
        result = runner.invoke(cli, ["run", "--config", path, "--seed", "1-2", "--out", str(out)])
        assert result.exit_code == 0, result.output

        summary = read_json(out / "summary.json")
        assert summary["config"]["seeds"] == [1, 2]
        assert summary["trials"] == 40
        assert summary["status"] == "ok"
        trials = pd.read_csv(out / "trials.csv")
        assert len(trials) == 40
        assert set(trials["seed"]) == {1, 2}

        result = runner.invoke(cli, ["validate", "--config", str(out / "summary.json")])
        assert result.exit_code == 0, result.output

        again = tmp_path / "again"
        result = runner.invoke(cli, ["run", "--config", str(out / "summary.json"), "--out", str(again)])
        assert result.exit_code == 0, result.output
        assert (again / "trials.csv").read_bytes() == (out / "trials.csv").read_bytes()

    @pytest.mark.slow
    def test_tracking_end_to_end(self, runner, tmp_path):
        result = runner.invoke(cli, [
            "run", "--config", str(EXPERIMENTS_DIR / "tracking.ini"),
            "--seed", "0", "--out", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        summary = read_json(tmp_path / "summary.json")
        assert summary["violations"] == 0
        assert summary["e_max"] <= summary["upsilon_max"]
        assert (tmp_path / "run_seed0.csv").is_file()
        assert (tmp_path / "tracking_seed0.csv").is_file()

    @pytest.mark.slow
    def test_density_sweep_end_to_end(self, runner, tmp_path):
        result = runner.invoke(cli, [
            "run", "--config", str(EXPERIMENTS_DIR / "density_sweep.ini"),
            "--seed", "0", "--out", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "density_sweep.csv").is_file()


class TestExitCodes:
    @pytest.mark.parametrize("exc, code", [
        (CertificateViolation("x"), EXIT_VIOLATION),
        (ConfigError([("bound.delta", "too big")]), EXIT_CONFIG),
        (IllConditionedDataError(3, 10), EXIT_NUMERICAL),
        (InfeasibilityError("x"), EXIT_NUMERICAL),
        (EpisodeCapExceeded(3, []), EXIT_NUMERICAL),
        (UnsupportedOperationError("x"), EXIT_NUMERICAL),
    ])
    def test_mapping(self, exc, code):
        assert exit_code_for(exc) == code

    def test_unmapped_errors_propagate(self):
        assert exit_code_for(RuntimeError("x")) is None

    def test_decorator_exits(self):
        @exit_on_error("test")
        def failing():
            raise CertificateViolation("bound crossed")

        with pytest.raises(SystemExit) as caught:
            failing()
        assert caught.value.code == EXIT_VIOLATION

    def test_decorator_passes_results(self):
        assert exit_on_error("test")(lambda: 5)() == 5
