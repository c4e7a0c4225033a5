from __future__ import annotations

from pathlib import Path

import simplejson
from configobj import ConfigObj, ConfigObjError

from modules.errors import ConfigError
from modules.experiments.schema import ExperimentConfig, validate_config
from utils.parsers import extract_seeds


def _read_ini(path: Path) -> dict:
    try:
        parsed = ConfigObj(str(path), file_error=True, encoding="utf-8")
    except ConfigObjError as exc:
        errors = getattr(exc, "errors", None) or [exc]
        raise ConfigError(
            [(f"line {getattr(err, 'line_number', '?')}", str(err)) for err in errors]
        ) from None
    return parsed.dict()


def _read_summary(path: Path) -> dict:
    """The resolved config embedded in a summary written by an earlier run."""
    try:
        with open(path, encoding="utf-8") as fh:
            summary = simplejson.load(fh)
    except simplejson.JSONDecodeError as exc:
        raise ConfigError([(f"line {exc.lineno}", exc.msg)]) from None
    if not isinstance(summary, dict) or "config" not in summary:
        raise ConfigError([("config", "summary JSON has no embedded config")])
    return summary["config"]


def read_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([("config", f"no such file: {path}")])
    if path.suffix.lower() == ".json":
        return _read_summary(path)
    return _read_ini(path)


def load_config(path: str | Path, seeds: str | None = None, workers: int | None = None,
                out: str | None = None) -> ExperimentConfig:
    """Read, apply CLI overrides and validate."""
    data = read_config(path)
    if seeds is not None:
        try:
            data["seeds"] = extract_seeds(seeds)
        except ValueError as exc:
            raise ConfigError([("seeds", str(exc))]) from None
    if workers is not None:
        data["workers"] = workers
    if out is not None:
        data["output"] = str(out)
    return validate_config(data)
