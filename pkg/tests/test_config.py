import numpy as np
import pytest

from config import EXPERIMENTS_DIR
from modules.errors import ConfigError
from modules.experiments.artifacts import (
    read_json,
    read_jsonl,
    read_training_set,
    write_json,
    write_jsonl,
    write_training_set,
)
from modules.experiments.loader import load_config, read_config
from modules.experiments.schema import Experiment, validate_config
from modules.gp.model import TrainingSet


def tracking_dict(**overrides) -> dict:
    data = {
        "experiment": "tracking",
        "seeds": "0-2",
        "kernel": {"family": "squared_exponential", "lengthscales": ["1.0", "1.0"]},
        "plant": {"theta": ["10", "20"]},
        "bound": {"tau": "0.01", "delta": "0.01", "lipschitz": "2.0"},
        "reference": {},
        "training": {},
        "simulation": {"horizon": "2.0", "fine_dt": "0.01"},
    }
    for block, values in overrides.items():
        if isinstance(values, dict):
            data[block] = {**data.get(block, {}), **values}
        else:
            data[block] = values
    return data


def diagnostics(data: dict) -> list[tuple[str, str]]:
    with pytest.raises(ConfigError) as caught:
        validate_config(data)
    return caught.value.diagnostics


class TestSchema:
    def test_accepts_benchmark(self):
        config = validate_config(tracking_dict())
        assert config.experiment is Experiment.TRACKING
        assert config.seeds == [0, 1, 2]
        assert config.kernel.dim == 2
        assert config.plant.loop().lambda_max == pytest.approx(-10.0)

    def test_delta_out_of_range(self):
        paths = [path for path, _ in diagnostics(tracking_dict(bound={"delta": "1.5"}))]
        assert paths == ["bound.delta"]

    def test_unknown_key(self):
        paths = [path for path, _ in diagnostics(tracking_dict(bound={"gamma": "1"}))]
        assert paths == ["bound.gamma"]

    def test_probabilistic_lipschitz_needs_smooth_kernel(self):
        data = tracking_dict(
            kernel={"family": "matern32"},
            bound={"lipschitz": "probabilistic", "lipschitz_delta": "0.01"},
        )
        (_, msg), = diagnostics(data)
        assert "matern32" in msg

    def test_probabilistic_lipschitz_needs_delta(self):
        paths = [path for path, _ in diagnostics(tracking_dict(bound={"lipschitz": "probabilistic"}))]
        assert paths == ["bound"]

    def test_missing_blocks(self):
        data = tracking_dict()
        del data["plant"], data["simulation"]
        (_, msg), = diagnostics(data)
        assert "plant" in msg and "simulation" in msg

    def test_tracking_needs_gains(self):
        (_, msg), = diagnostics(tracking_dict(plant={"theta": None}))
        assert "theta" in msg

    def test_kernel_dimension_must_match_plant(self):
        (_, msg), = diagnostics(tracking_dict(kernel={"lengthscales": "1.0"}, training={"lower": "0", "upper": "1"}))
        assert "2-D" in msg

    def test_linear_kernel_rejected_for_control(self):
        (_, msg), = diagnostics(tracking_dict(kernel={"family": "linear"}))
        assert "stationary" in msg

    def test_unknown_family(self):
        paths = [path for path, _ in diagnostics(tracking_dict(kernel={"family": "periodic"}))]
        assert paths == ["kernel.family"]

    def test_bad_seed_list(self):
        paths = [path for path, _ in diagnostics(tracking_dict(seeds="3-1"))]
        assert paths == ["seeds"]

    def test_auto_tau(self):
        assert validate_config(tracking_dict(bound={"tau": "auto"})).bound.tau == "auto"

    def test_lipschitz_validation_is_one_dimensional(self):
        data = {
            "experiment": "validate_lipschitz",
            "kernel": {"lengthscales": ["1.0", "1.0"]},
            "bound": {"lipschitz": "probabilistic", "lipschitz_delta": "0.01"},
            "validation": {},
        }
        (_, msg), = diagnostics(data)
        assert "1-D" in msg

    def test_dump_round_trip(self):
        config = validate_config(tracking_dict(bound={"tau": "auto"}))
        assert validate_config(config.dump()) == config

    @pytest.mark.parametrize("path", sorted(EXPERIMENTS_DIR.glob("*.ini")), ids=lambda p: p.stem)
    def test_shipped_configs_validate(self, path):
        config = load_config(path)
        assert config.experiment.value == path.stem


class TestLoader:
    def test_overrides(self, tmp_path):
        config = load_config(EXPERIMENTS_DIR / "tracking.ini", seeds="4,6-7", workers=3, out=str(tmp_path))
        assert config.seeds == [4, 6, 7]
        assert config.workers == 3
        assert config.output == str(tmp_path)

    def test_bad_seed_override(self):
        with pytest.raises(ConfigError) as caught:
            load_config(EXPERIMENTS_DIR / "tracking.ini", seeds="x")
        assert caught.value.diagnostics[0][0] == "seeds"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config(tmp_path / "absent.ini")

    def test_ini_syntax_error(self, tmp_path):
        path = tmp_path / "broken.ini"
        path.write_text("experiment = tracking\n[kernel]\nthis line is broken\n", encoding="utf-8")
        with pytest.raises(ConfigError) as caught:
            read_config(path)
        assert caught.value.diagnostics[0][0] == "line 3"

    def test_summary_without_config(self, tmp_path):
        path = write_json({"experiment": "tracking"}, tmp_path / "summary.json")
        with pytest.raises(ConfigError):
            read_config(path)

    def test_summary_round_trip(self, tmp_path):
        config = load_config(EXPERIMENTS_DIR / "episodic.ini")
        path = write_json({"config": config.dump(), "status": "ok"}, tmp_path / "summary.json")
        assert load_config(path) == config


class TestArtifacts:
    def test_json_handles_numpy_and_nan(self, tmp_path):
        path = write_json({"b": np.float64(1.5), "a": np.arange(3), "c": float("nan")}, tmp_path / "x.json")
        assert read_json(path) == {"a": [0, 1, 2], "b": 1.5, "c": None}
        assert path.read_text(encoding="utf-8").index('"a"') < path.read_text(encoding="utf-8").index('"b"')

    def test_jsonl(self, tmp_path):
        rows = [{"episode": 1, "upsilon": 0.5}, {"episode": 2, "upsilon": np.float64(0.4)}]
        assert read_jsonl(write_jsonl(rows, tmp_path / "x.jsonl")) == [
            {"episode": 1, "upsilon": 0.5}, {"episode": 2, "upsilon": 0.4},
        ]

    def test_training_set_csv(self, tmp_path):
        data = TrainingSet([[0.1, 0.2], [0.3, 0.4]], [1.0, -1.0], 0.01)
        path = write_training_set(data, tmp_path / "train.csv")
        assert path.read_text(encoding="utf-8").splitlines()[0] == "x_1,x_2,y"
        restored = read_training_set(path, 0.01)
        assert np.allclose(restored.inputs, data.inputs)
        assert np.allclose(restored.targets, data.targets)
