"""
Kernel data density and the posterior-variance bounds it drives.

A training input x' belongs to the neighbourhood K_rho'(x) when

    k^2(x, x) <= k^2(x', x') <= 1/rho' + k^2(x', x).

Every point passing the first inequality leaves the neighbourhood once
rho' exceeds its exit threshold ``1 / (k^2(x', x') - k^2(x', x))``, so
membership is decided by comparing rho' with that threshold. The density
rho(x) is the largest rho' whose neighbourhood holds at least
``rho' * sigma_on^2 * k(x, x)`` points.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from modules.analytics.logger import warning
from modules.errors import InputError, NumericalDegeneracyError, UnsupportedOperationError
from modules.gp.kernels import KernelSpec, as_points, gradient_lipschitz, kernel_diag, kernel_matrix
from modules.gp.model import GPModel


class BindingConstraint(str, Enum):
    CARDINALITY = "cardinality"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class DensityResult:
    rho: float
    subset_indices: np.ndarray
    binding_constraint: BindingConstraint

    @property
    def size(self) -> int:
        return int(self.subset_indices.size)


@dataclass(frozen=True)
class DensityBound:
    bound: float
    stddev: float
    rho: float
    degenerate: bool

    @property
    def holds(self) -> bool:
        return self.stddev <= self.bound + 1e-9


def _point(model: GPModel, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.kernel.dim,):
        raise InputError(f"expected a point of dimension {model.kernel.dim}, got shape {x.shape}")
    return x[None, :]


def _exit_thresholds(model: GPModel, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-sample exit thresholds (``nan`` where the first inequality fails)."""
    k_xx = float(kernel_diag(model.kernel, x)[0])
    if len(model.data) == 0:
        return np.zeros(0), k_xx
    k_own = kernel_diag(model.kernel, model.data.inputs)
    k_cross = kernel_matrix(model.kernel, model.data.inputs, x)[:, 0]
    eligible = k_xx**2 <= k_own**2
    gap = k_own**2 - k_cross**2
    with np.errstate(divide="ignore"):
        thresholds = np.where(gap > 0, 1.0 / np.where(gap > 0, gap, 1.0), np.inf)
    return np.where(eligible, thresholds, np.nan), k_xx


def kernel_subset(model: GPModel, x, rho_prime: float) -> np.ndarray:
    """Indices of the training inputs in K_rho'(x)."""
    if not rho_prime > 0:
        raise InputError(f"rho' must be positive, got {rho_prime}")
    thresholds, _ = _exit_thresholds(model, _point(model, x))
    with np.errstate(invalid="ignore"):
        return np.flatnonzero(thresholds >= rho_prime)


def data_density(model: GPModel, x) -> DensityResult:
    x = _point(model, x)
    thresholds, k_xx = _exit_thresholds(model, x)
    if not k_xx > 0:
        raise NumericalDegeneracyError("data density is undefined where k(x, x) = 0")

    members = np.sort(thresholds[~np.isnan(thresholds)])[::-1]
    if members.size == 0:
        return DensityResult(0.0, np.zeros(0, dtype=int), BindingConstraint.CARDINALITY)

    # With m members guaranteed for rho' <= t_(m), the cardinality
    # constraint caps rho' at m / (sigma_on^2 k(x, x)).
    scale = model.data.noise_variance * k_xx
    counts = np.arange(1, members.size + 1)
    by_count = counts / scale
    candidates = np.minimum(members, by_count)
    best = int(np.argmax(candidates))
    rho = float(candidates[best])
    binding = (
        BindingConstraint.CARDINALITY if by_count[best] <= members[best]
        else BindingConstraint.THRESHOLD
    )
    with np.errstate(invalid="ignore"):
        subset = np.flatnonzero(thresholds >= rho)
    return DensityResult(rho, subset, binding)


def variance_bound_general(model: GPModel, x, subset=None) -> float:
    """Gershgorin-type posterior variance bound over ``subset`` of the data.

    ``(s2 k(x,x) + N dk) / (N max k(x',x') + s2)`` with
    ``dk = k(x,x) max k(x',x') - min k^2(x',x)``.
    """
    x = _point(model, x)
    k_xx = float(kernel_diag(model.kernel, x)[0])
    inputs = model.data.inputs if subset is None else model.data.inputs[np.asarray(subset, dtype=int)]
    n = inputs.shape[0]
    if n == 0:
        return k_xx
    noise = model.data.noise_variance
    k_max = float(np.max(kernel_diag(model.kernel, inputs)))
    k_cross_min = float(np.min(kernel_matrix(model.kernel, inputs, x)[:, 0] ** 2))
    delta_k = k_xx * k_max - k_cross_min
    return (noise * k_xx + n * delta_k) / (n * k_max + noise)


def variance_bound_stationary(model: GPModel, x) -> float:
    if not model.kernel.stationary:
        raise UnsupportedOperationError("the stationary variance bound needs a stationary kernel")
    x = _point(model, x)
    k0 = model.kernel.signal_variance
    n = len(model.data)
    if n == 0:
        return k0
    k_min_sq = float(np.min(kernel_matrix(model.kernel, model.data.inputs, x)[:, 0] ** 2))
    return k0 - k_min_sq / (k0 + model.data.noise_variance / n)


def density_variance_bound(model: GPModel, x, density: DensityResult | None = None) -> DensityBound:
    """Standard-deviation bound ``sqrt(2 / (rho(x) k(x, x)))``.

    Infinite and flagged ``degenerate`` where rho or k(x, x) vanishes.
    """
    x_row = _point(model, x)
    k_xx = float(kernel_diag(model.kernel, x_row)[0])
    stddev = float(model.stddev(x_row)[0])
    if not k_xx > 0:
        return DensityBound(float("inf"), stddev, 0.0, degenerate=True)
    density = density or data_density(model, x_row[0])
    if density.rho <= 0:
        return DensityBound(float("inf"), stddev, 0.0, degenerate=True)
    result = DensityBound(float(np.sqrt(2.0 / (density.rho * k_xx))), stddev, density.rho, False)
    if not result.holds:
        warning("-", "density", f"stddev {stddev:.6g} exceeds density bound {result.bound:.6g} at {x_row[0]}")
    return result


def geometric_ball_radius(spec: KernelSpec, rho_prime: float) -> float:
    if not rho_prime > 0:
        raise InputError(f"rho' must be positive, got {rho_prime}")
    return float(np.sqrt(1.0 / (2.0 * gradient_lipschitz(spec) * spec.signal_variance * rho_prime)))


def geometric_subset_ball(model: GPModel, x, rho_prime: float) -> np.ndarray:
    """Indices of training inputs inside the Euclidean ball contained in K_rho'(x)."""
    x = _point(model, x)
    radius = geometric_ball_radius(model.kernel, rho_prime)
    dist = np.linalg.norm(model.data.inputs - x, axis=1)
    return np.flatnonzero(dist <= radius)


def geometric_subset_linear(x, data, rho_prime: float, c: float, spec: KernelSpec | None = None) -> np.ndarray:
    """Alignment cone subset of K_rho'(x) for the linear kernel.

    With z = x / l, a point z' qualifies when ``||z|| <= ||z'||``,
    ``|z^T z'| >= c ||z|| ||z'||`` and
    ``sigma_f^4 ||z'||^2 (||z'||^2 - c^2 ||z||^2) <= 1/rho'``.
    """
    if not 0 < c < 1:
        raise InputError(f"alignment factor c must lie in (0, 1), got {c}")
    if not rho_prime > 0:
        raise InputError(f"rho' must be positive, got {rho_prime}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    data = as_points(data, x.size)
    if spec is None:
        scale, variance = np.ones(x.size), 1.0
    else:
        scale, variance = np.asarray(spec.lengthscales), spec.signal_variance
    z = x / scale
    zp = data / scale
    norm_z = float(np.linalg.norm(z))
    norm_zp = np.linalg.norm(zp, axis=1)
    outward = norm_z <= norm_zp
    aligned = np.abs(zp @ z) >= c * norm_z * norm_zp
    spread = variance**2 * norm_zp**2 * (norm_zp**2 - c**2 * norm_z**2) <= 1.0 / rho_prime
    return np.flatnonzero(outward & aligned & spread)
