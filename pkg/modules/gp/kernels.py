"""
Kernel families and the continuity constants derived from them.

Stationary families (squared exponential, Matérn 3/2 and 5/2) are written
through a unit-variance radial profile of the scaled lag
``s = ||(x - x') / l||``. Every derivative the bound machinery needs is a
closed form in ``s``:

    k'(s)         first derivative along the lag
    g(s) = k'/s   so that grad_x k = sigma_f^2 * g(s) * (x - x') / l^2
    k''(s)        second derivative along the lag
    h(s) = g'/s   needed by the mixed partials d^2 k / dx_i dx'_i

The linear kernel is ``sigma_f^2 * (x / l)^T (x' / l)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from config import LAG_SEARCH_MAX, LAG_SEARCH_POINTS, METRIC_CLAMP
from modules.errors import InputError, NumericalDegeneracyError, UnsupportedOperationError
from modules.gp.domain import DomainBox

_SQRT3 = np.sqrt(3.0)
_SQRT5 = np.sqrt(5.0)


class KernelFamily(str, Enum):
    SQUARED_EXPONENTIAL = "squared_exponential"
    MATERN32 = "matern32"
    MATERN52 = "matern52"
    LINEAR = "linear"


FAMILY_ALIASES: dict[str, KernelFamily] = {
    "se": KernelFamily.SQUARED_EXPONENTIAL,
    "rbf": KernelFamily.SQUARED_EXPONENTIAL,
    "squared_exponential": KernelFamily.SQUARED_EXPONENTIAL,
    "matern32": KernelFamily.MATERN32,
    "matern_3/2": KernelFamily.MATERN32,
    "matern-3/2": KernelFamily.MATERN32,
    "matern52": KernelFamily.MATERN52,
    "matern_5/2": KernelFamily.MATERN52,
    "matern-5/2": KernelFamily.MATERN52,
    "linear": KernelFamily.LINEAR,
}


def parse_family(name: str | KernelFamily) -> KernelFamily:
    if isinstance(name, KernelFamily):
        return name
    key = str(name).strip().lower().replace(" ", "")
    try:
        return FAMILY_ALIASES[key]
    except KeyError:
        raise InputError(f"unknown kernel family: {name!r}") from None


@dataclass(frozen=True)
class _RadialProfile:
    value: Callable[[np.ndarray], np.ndarray]
    dk: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    d2k: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray] | None
    dh: Callable[[np.ndarray], np.ndarray] | None
    # lag maximizing |k'(s)|
    steepest_lag: float


_PROFILES: dict[KernelFamily, _RadialProfile] = {
    KernelFamily.SQUARED_EXPONENTIAL: _RadialProfile(
        value=lambda s: np.exp(-0.5 * s**2),
        dk=lambda s: -s * np.exp(-0.5 * s**2),
        g=lambda s: -np.exp(-0.5 * s**2),
        d2k=lambda s: (s**2 - 1.0) * np.exp(-0.5 * s**2),
        h=lambda s: np.exp(-0.5 * s**2),
        dh=lambda s: -s * np.exp(-0.5 * s**2),
        steepest_lag=1.0,
    ),
    KernelFamily.MATERN32: _RadialProfile(
        value=lambda s: (1.0 + _SQRT3 * s) * np.exp(-_SQRT3 * s),
        dk=lambda s: -3.0 * s * np.exp(-_SQRT3 * s),
        g=lambda s: -3.0 * np.exp(-_SQRT3 * s),
        d2k=lambda s: -3.0 * (1.0 - _SQRT3 * s) * np.exp(-_SQRT3 * s),
        h=None,  # g'(s)/s is singular at zero lag
        dh=None,
        steepest_lag=1.0 / _SQRT3,
    ),
    KernelFamily.MATERN52: _RadialProfile(
        value=lambda s: (1.0 + _SQRT5 * s + 5.0 * s**2 / 3.0) * np.exp(-_SQRT5 * s),
        dk=lambda s: -(5.0 / 3.0) * s * (1.0 + _SQRT5 * s) * np.exp(-_SQRT5 * s),
        g=lambda s: -(5.0 / 3.0) * (1.0 + _SQRT5 * s) * np.exp(-_SQRT5 * s),
        d2k=lambda s: -(5.0 / 3.0) * (1.0 + _SQRT5 * s - 5.0 * s**2) * np.exp(-_SQRT5 * s),
        h=lambda s: (25.0 / 3.0) * np.exp(-_SQRT5 * s),
        dh=lambda s: -_SQRT5 * (25.0 / 3.0) * np.exp(-_SQRT5 * s),
        steepest_lag=(_SQRT5 + 5.0) / 10.0,
    ),
}


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily
    signal_variance: float
    lengthscales: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "family", parse_family(self.family))
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if not ls:
            raise InputError("at least one lengthscale is required")
        if not self.signal_variance > 0:
            raise InputError(f"signal variance must be positive, got {self.signal_variance}")
        if any(not v > 0 for v in ls):
            raise InputError(f"lengthscales must be positive, got {ls}")
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "lengthscales", ls)

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    @property
    def sigma_f(self) -> float:
        return float(np.sqrt(self.signal_variance))

    @property
    def stationary(self) -> bool:
        return self.family is not KernelFamily.LINEAR

    @property
    def has_derivative_kernels(self) -> bool:
        """Partials up to fourth order exist (SE, Matérn 5/2, linear)."""
        return self.family is not KernelFamily.MATERN32

    @property
    def min_lengthscale(self) -> float:
        return min(self.lengthscales)

    def prior_variance(self, X) -> np.ndarray:
        return kernel_diag(self, X)


def _profile(spec: KernelSpec) -> _RadialProfile:
    try:
        return _PROFILES[spec.family]
    except KeyError:
        raise UnsupportedOperationError(
            f"{spec.family.value} kernel is not stationary"
        ) from None


def as_points(X, dim: int) -> np.ndarray:
    """Coerce ``X`` to an ``(n, dim)`` float array; a 1-D vector is one point."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1) if dim > 1 or X.size == 1 else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != dim:
        raise InputError(f"expected points of dimension {dim}, got array of shape {X.shape}")
    return X


def _as_point(x, dim: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise InputError(f"expected a point of dimension {dim}, got shape {x.shape}")
    return x


def _scaled_lag(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    ls = np.asarray(spec.lengthscales)
    return np.sqrt(cdist(X / ls, Y / ls, "sqeuclidean"))


# ---------------------------------------------------------------------------
# Batched evaluation
# ---------------------------------------------------------------------------

def kernel_matrix(spec: KernelSpec, X, Y=None) -> np.ndarray:
    X = as_points(X, spec.dim)
    Y = X if Y is None else as_points(Y, spec.dim)
    if spec.family is KernelFamily.LINEAR:
        ls = np.asarray(spec.lengthscales)
        return spec.signal_variance * (X / ls) @ (Y / ls).T
    return spec.signal_variance * _profile(spec).value(_scaled_lag(spec, X, Y))


def kernel_diag(spec: KernelSpec, X) -> np.ndarray:
    X = as_points(X, spec.dim)
    if spec.family is KernelFamily.LINEAR:
        ls = np.asarray(spec.lengthscales)
        return spec.signal_variance * np.sum((X / ls) ** 2, axis=1)
    return np.full(X.shape[0], spec.signal_variance)


def derivative_kernel_matrix(spec: KernelSpec, i: int, X, Y=None) -> np.ndarray:
    """Mixed partial ``d^2 k / dx_i dx'_i`` between two point sets."""
    if not 0 <= i < spec.dim:
        raise InputError(f"axis index {i} out of range for dimension {spec.dim}")
    X = as_points(X, spec.dim)
    Y = X if Y is None else as_points(Y, spec.dim)
    li2 = spec.lengthscales[i] ** 2
    if spec.family is KernelFamily.LINEAR:
        return np.full((X.shape[0], Y.shape[0]), spec.signal_variance / li2)
    prof = _profile(spec)
    if prof.h is None:
        raise UnsupportedOperationError(
            f"{spec.family.value} kernel is not smooth enough for derivative kernels"
        )
    s = _scaled_lag(spec, X, Y)
    diff_i = X[:, i][:, None] - Y[:, i][None, :]
    return spec.signal_variance * (-prof.g(s) / li2 - prof.h(s) * diff_i**2 / li2**2)


# ---------------------------------------------------------------------------
# Point-wise operations
# ---------------------------------------------------------------------------

def kernel_eval(spec: KernelSpec, x, x_prime) -> float:
    x, x_prime = _as_point(x, spec.dim), _as_point(x_prime, spec.dim)
    return float(kernel_matrix(spec, x[None, :], x_prime[None, :])[0, 0])


def kernel_gradient(spec: KernelSpec, x, x_prime) -> np.ndarray:
    """Gradient of ``k(x, x')`` with respect to the first argument."""
    x, x_prime = _as_point(x, spec.dim), _as_point(x_prime, spec.dim)
    ls2 = np.asarray(spec.lengthscales) ** 2
    if spec.family is KernelFamily.LINEAR:
        return spec.signal_variance * x_prime / ls2
    diff = x - x_prime
    s = float(np.sqrt(np.sum(diff**2 / ls2)))
    return spec.signal_variance * float(_profile(spec).g(s)) * diff / ls2


def kernel_metric(spec: KernelSpec, x, x_prime) -> float:
    x, x_prime = _as_point(x, spec.dim), _as_point(x_prime, spec.dim)
    radicand = (
        kernel_eval(spec, x, x)
        + kernel_eval(spec, x_prime, x_prime)
        - 2.0 * kernel_eval(spec, x, x_prime)
    )
    if radicand < -METRIC_CLAMP:
        raise NumericalDegeneracyError(
            f"kernel metric radicand {radicand:.3e} is negative beyond tolerance"
        )
    return float(np.sqrt(max(radicand, 0.0)))


def derivative_kernel_eval(spec: KernelSpec, i: int, x, x_prime) -> float:
    x, x_prime = _as_point(x, spec.dim), _as_point(x_prime, spec.dim)
    return float(derivative_kernel_matrix(spec, i, x[None, :], x_prime[None, :])[0, 0])


# ---------------------------------------------------------------------------
# Continuity constants
# ---------------------------------------------------------------------------

def _lag_limit(spec: KernelSpec, domain: DomainBox | None) -> float:
    if domain is None:
        return LAG_SEARCH_MAX
    return min(domain.max_scaled_lag(spec.lengthscales), LAG_SEARCH_MAX)


def _lag_grid(upper: float) -> np.ndarray:
    return np.unique(np.concatenate([
        np.linspace(0.0, upper, LAG_SEARCH_POINTS),
        np.geomspace(1e-3, max(upper, 1e-3), LAG_SEARCH_POINTS // 4),
    ]))


def kernel_lipschitz(spec: KernelSpec, domain: DomainBox | None = None) -> float:
    """Upper bound on ``sup ||grad k||`` over the domain (``L_k``)."""
    if spec.family is KernelFamily.LINEAR:
        if domain is None:
            raise InputError("the linear kernel needs a bounded domain for L_k")
        ls2 = np.asarray(spec.lengthscales) ** 2
        return spec.signal_variance * domain.max_norm(scale=ls2)
    prof = _profile(spec)
    lag = prof.steepest_lag
    if domain is not None:
        lag = min(lag, domain.max_scaled_lag(spec.lengthscales))
    return spec.signal_variance * float(abs(prof.dk(lag))) / spec.min_lengthscale


def stddev_lipschitz(spec: KernelSpec, domain: DomainBox | None = None) -> float:
    """Lipschitz constant ``L_sigma`` of the kernel metric.

    Supremum over lags of ``|k'(s)| / sqrt(2 k(0) - 2 k(s))`` together with
    its analytic zero-lag limit ``sqrt(|k''(0)|)``.
    """
    if not spec.stationary:
        raise UnsupportedOperationError(
            "L_sigma is defined for stationary kernels; use the sqrt(2 L_k tau) modulus"
        )
    prof = _profile(spec)
    limit = np.sqrt(abs(float(prof.d2k(0.0))))
    s = _lag_grid(_lag_limit(spec, domain))
    s = s[s > 0]
    gap = 1.0 - prof.value(s)
    ratio = np.abs(prof.dk(s)) / np.sqrt(2.0 * np.maximum(gap, np.finfo(float).tiny))
    numeric = float(np.max(ratio[gap > 0])) if np.any(gap > 0) else 0.0
    return spec.sigma_f * max(limit, numeric) / spec.min_lengthscale


def gradient_lipschitz(spec: KernelSpec) -> float:
    """Lipschitz constant ``L_dk`` of ``grad k``: the Hessian norm bound
    ``max(|k''(s)|, |k'(s)/s|) / l_min^2``."""
    if not spec.stationary:
        raise UnsupportedOperationError(
            "L_dk is not defined for the linear kernel; use the linear geometric subset"
        )
    prof = _profile(spec)
    s = _lag_grid(LAG_SEARCH_MAX)
    peak = float(np.max(np.maximum(np.abs(prof.d2k(s)), np.abs(prof.g(s)))))
    return spec.signal_variance * peak / spec.min_lengthscale**2


def derivative_kernel_variance(spec: KernelSpec, i: int) -> float:
    """``max_x k^di(x, x)``; constant for stationary kernels."""
    if not spec.has_derivative_kernels:
        raise UnsupportedOperationError(
            f"{spec.family.value} kernel is not smooth enough for derivative kernels"
        )
    li2 = spec.lengthscales[i] ** 2
    if spec.family is KernelFamily.LINEAR:
        return spec.signal_variance / li2
    return spec.signal_variance * float(-_profile(spec).g(0.0)) / li2


def _derivative_grad_norm(prof: _RadialProfile, a: np.ndarray, rho: np.ndarray) -> np.ndarray:
    # Scaled coordinates: a = lag along axis i, rho = lag norm orthogonal to it.
    s = np.sqrt(a**2 + rho**2)
    h = prof.h(s)
    f_s = -s * h - prof.dh(s) * a**2
    with np.errstate(invalid="ignore", divide="ignore"):
        along = np.where(s > 0, f_s * a / s, 0.0) - 2.0 * h * a
        across = np.where(s > 0, f_s * rho / s, 0.0)
    return np.hypot(along, across)


def derivative_kernel_lipschitz(spec: KernelSpec, i: int, domain: DomainBox | None = None) -> float:
    """Lipschitz constant of ``x -> k^di(x, x')`` over the domain.

    Maximizes the gradient norm of the derivative kernel in scaled lag
    coordinates on a grid, then polishes the best grid point with L-BFGS-B.
    """
    if not 0 <= i < spec.dim:
        raise InputError(f"axis index {i} out of range for dimension {spec.dim}")
    if spec.family is KernelFamily.LINEAR:
        return 0.0
    if not spec.has_derivative_kernels:
        raise UnsupportedOperationError(
            f"{spec.family.value} kernel is not smooth enough for derivative kernels"
        )
    prof = _profile(spec)
    ls = np.asarray(spec.lengthscales)
    if domain is None:
        a_max = LAG_SEARCH_MAX
        rho_max = LAG_SEARCH_MAX if spec.dim > 1 else 0.0
    else:
        a_max = min(domain.edge / ls[i], LAG_SEARCH_MAX)
        others = np.delete(1.0 / ls, i)
        rho_max = min(domain.edge * float(np.linalg.norm(others)), LAG_SEARCH_MAX)

    a_axis = np.linspace(0.0, a_max, 401)
    rho_axis = np.linspace(0.0, rho_max, 201) if rho_max > 0 else np.zeros(1)
    A, R = np.meshgrid(a_axis, rho_axis, indexing="ij")
    values = _derivative_grad_norm(prof, A, R)
    best = np.unravel_index(int(np.argmax(values)), values.shape)
    start = np.array([A[best], R[best]])

    result = minimize(
        lambda z: -float(_derivative_grad_norm(prof, np.array(z[0]), np.array(z[1]))),
        start,
        method="L-BFGS-B",
        bounds=[(0.0, a_max), (0.0, rho_max)],
    )
    peak = max(float(values[best]), -float(result.fun))
    return spec.signal_variance * peak / (ls[i] ** 2 * spec.min_lengthscale)
