"""Exception hierarchy shared by the library and the CLI exit-code mapping."""

from __future__ import annotations


class GPTrackingError(Exception):
    """Base class for every error raised on purpose by this package."""

    # subclasses with their own __init__ must define __reduce__ to cross process boundaries


class InputError(GPTrackingError, ValueError):
    pass


class ConfigError(InputError):
    """Config file failed to parse or validate.

    ``diagnostics`` is a list of ``(field_path, message)`` pairs; the field
    path is dotted (``bound.delta``) or ``line N`` for parse errors.
    """

    def __init__(self, diagnostics: list[tuple[str, str]]):
        self.diagnostics = list(diagnostics)
        text = "; ".join(f"{path}: {msg}" for path, msg in self.diagnostics)
        super().__init__(text or "invalid config")

    def __reduce__(self):
        return type(self), (self.diagnostics,)


class DomainError(InputError):
    """Query point outside the box a bound was certified on."""


class UnsupportedOperationError(GPTrackingError, NotImplementedError):
    pass


class NumericalError(GPTrackingError, ArithmeticError):
    pass


class IllConditionedDataError(NumericalError):
    def __init__(self, pivot: int, size: int):
        self.pivot = pivot
        self.size = size
        super().__init__(
            f"K + noise*I is not positive definite: leading minor {pivot} of {size} failed"
        )

    def __reduce__(self):
        return type(self), (self.pivot, self.size)


class NumericalDegeneracyError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, time: float):
        self.time = time
        super().__init__(f"state became non-finite at t={time:.6g}")

    def __reduce__(self):
        return type(self), (self.time,)


class InfeasibilityError(NumericalError):
    pass


class CertificateViolation(GPTrackingError):
    pass


class EpisodeCapExceeded(InfeasibilityError):
    def __init__(self, cap: int, reports: list):
        self.cap = cap
        self.reports = list(reports)
        super().__init__(f"learning loop hit the safety cap of {cap} episodes")

    def __reduce__(self):
        return type(self), (self.cap, self.reports)
