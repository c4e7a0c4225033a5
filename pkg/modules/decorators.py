from functools import wraps

import click

from modules.analytics.logger import error
from modules.errors import (
    CertificateViolation,
    ConfigError,
    GPTrackingError,
    InputError,
    NumericalError,
    UnsupportedOperationError,
)
from modules.ui.messages import CONFIG_ERROR_TEXT, FAILURE_TEXT, VIOLATION_TEXT

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3
EXIT_NUMERICAL = 4

# Checked in order; the first matching class wins.
EXIT_CODES: tuple[tuple[type[BaseException], int], ...] = (
    (CertificateViolation, EXIT_VIOLATION),
    (InputError, EXIT_CONFIG),
    (UnsupportedOperationError, EXIT_NUMERICAL),
    (NumericalError, EXIT_NUMERICAL),
)


def exit_code_for(exc: BaseException) -> int | None:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return None


def _describe(exc: GPTrackingError) -> str:
    if isinstance(exc, ConfigError):
        return "\n".join(CONFIG_ERROR_TEXT.format(path=path, msg=msg) for path, msg in exc.diagnostics)
    if isinstance(exc, CertificateViolation):
        return VIOLATION_TEXT.format(msg=exc)
    return FAILURE_TEXT.format(kind=type(exc).__name__, msg=exc)


def exit_on_error(stage: str):
    """Turn package errors raised by a CLI command into logged exit codes.

    Runners tag errors with an ``experiment`` attribute on the way out so
    the log record carries it.
    """

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except GPTrackingError as exc:
                code = exit_code_for(exc)
                if code is None:
                    raise
                experiment = getattr(exc, "experiment", None) or "-"
                error(experiment, stage, f"{type(exc).__name__}: {exc}")
                click.echo(_describe(exc), err=True)
                raise SystemExit(code) from exc

        return wrapper

    return decorator
