"""CSV and JSON writers shared by the experiment runners."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd
import simplejson

from config import OUTPUT_DIR
from modules.experiments.schema import ExperimentConfig
from modules.gp.model import TrainingSet

FLOAT_FORMAT = "%.12g"


def output_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output) if config.output else OUTPUT_DIR / config.experiment.value
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_json(data: dict, path: Path) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        simplejson.dump(data, fh, sort_keys=True, indent=2, ignore_nan=True, default=_plain)
        fh.write("\n")
    return path


def write_jsonl(records: Iterable[dict], path: Path) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(simplejson.dumps(record, sort_keys=True, ignore_nan=True, default=_plain))
            fh.write("\n")
    return path


def read_json(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return simplejson.load(fh)


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [simplejson.loads(line) for line in fh if line.strip()]


def write_training_set(data: TrainingSet, path: Path) -> Path:
    return write_csv(data.to_frame(), path)


def read_training_set(path: str | Path, noise_variance: float) -> TrainingSet:
    return TrainingSet.from_frame(pd.read_csv(path), noise_variance)
