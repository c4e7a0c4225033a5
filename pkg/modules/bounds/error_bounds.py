"""
Probabilistic uniform error bound for GP regression.

With probability at least 1 - delta, jointly over the box,

    |f(x) - mu(x)| <= sqrt(beta(tau)) * sigma(x) + gamma(tau)

where beta(tau) = 2 log(M(tau) / delta) and
gamma(tau) = (L_mu + L_f) tau + sqrt(beta(tau)) * omega_sigma(tau).
L_f is either supplied or derived from the prior through the Borell-TIS
supremum bound applied to every derivative process.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from config import TAU_BISECTION_STEPS, TAU_SEARCH_RANGE, AUTO_TAU_RATIO
from modules.analytics.logger import certificate, debug
from modules.errors import DomainError, InfeasibilityError, InputError
from modules.gp.domain import DomainBox
from modules.gp.kernels import (
    KernelFamily,
    KernelSpec,
    derivative_kernel_lipschitz,
    derivative_kernel_variance,
    kernel_lipschitz,
    stddev_lipschitz,
)
from modules.gp.model import GPModel

__all__ = [
    "DomainBox",
    "BoundParams",
    "ErrorBound",
    "covering_number_bound",
    "beta",
    "mean_lipschitz",
    "stddev_modulus",
    "gamma",
    "uniform_error_bound",
    "noise_norm_bound",
    "max_sqrt_kernel",
    "expected_sup_bound",
    "sample_sup_bound",
    "probabilistic_lipschitz",
    "largest_feasible_tau",
    "auto_tau",
]


@dataclass(frozen=True)
class BoundParams:
    tau: float
    delta: float
    lipschitz: float
    lipschitz_source: Literal["given", "probabilistic"] = "given"
    lipschitz_delta: float | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise InputError(f"tau must be positive, got {self.tau}")
        if not 0 < self.delta < 1:
            raise InputError(f"delta must lie in (0, 1), got {self.delta}")
        if self.lipschitz < 0:
            raise InputError(f"L_f must be nonnegative, got {self.lipschitz}")
        if self.lipschitz_source == "probabilistic":
            if self.lipschitz_delta is None or not 0 < self.lipschitz_delta < 1:
                raise InputError("a probabilistic L_f needs delta_L in (0, 1)")

    def with_tau(self, tau: float) -> "BoundParams":
        return BoundParams(tau, self.delta, self.lipschitz, self.lipschitz_source, self.lipschitz_delta)

    @property
    def confidence(self) -> float:
        """Joint confidence of the bound and, if used, the probabilistic L_f."""
        spent = self.delta
        if self.lipschitz_source == "probabilistic":
            spent += self.lipschitz_delta
        return 1.0 - spent


# ---------------------------------------------------------------------------
# Closed-form pieces
# ---------------------------------------------------------------------------

def _log_covering(tau: float, box: DomainBox) -> float:
    if tau <= 0:
        raise InputError(f"tau must be positive, got {tau}")
    d = box.dimension
    return max(0.0, d * np.log(box.edge * np.sqrt(d) / (2.0 * tau)))


def covering_number_bound(tau: float, box: DomainBox) -> float:
    """``max(1, (r sqrt(d) / (2 tau))^d)``."""
    return float(np.exp(_log_covering(tau, box)))


def beta(tau: float, delta: float, box: DomainBox) -> float:
    if not 0 < delta < 1:
        raise InputError(f"delta must lie in (0, 1), got {delta}")
    return 2.0 * (_log_covering(tau, box) - np.log(delta))


def mean_lipschitz(model: GPModel, L_k: float) -> float:
    n = model.size
    if n == 0:
        return 0.0
    return float(L_k * np.sqrt(n) * np.linalg.norm(model.alpha))


def stddev_modulus(spec: KernelSpec | None, tau: float, L_k: float, stationary_L_sigma: float | None = None) -> float:
    if tau <= 0:
        return 0.0
    modulus = float(np.sqrt(2.0 * L_k * tau))
    if stationary_L_sigma is not None and (spec is None or spec.stationary):
        modulus = min(modulus, stationary_L_sigma * tau)
    return modulus


def gamma(tau: float, L_mu: float, L_f: float, beta_value: float, omega_sigma: float) -> float:
    return (L_mu + L_f) * tau + float(np.sqrt(beta_value)) * omega_sigma


def noise_norm_bound(N: int, delta: float, noise_variance: float) -> float:
    """High-probability bound on the squared norm of ``N`` i.i.d. noise draws."""
    if N < 1:
        raise InputError(f"noise norm bound needs N >= 1, got {N}")
    if not 0 < delta < 1:
        raise InputError(f"delta must lie in (0, 1), got {delta}")
    log_term = np.log(2.0 / delta)
    return float((2.0 * np.sqrt(N * log_term) + 2.0 * log_term + N) * noise_variance)


def max_sqrt_kernel(spec: KernelSpec, box: DomainBox) -> float:
    """``max_x sqrt(k(x, x))`` over the box."""
    if spec.family is KernelFamily.LINEAR:
        return spec.sigma_f * box.max_norm(scale=spec.lengthscales)
    return spec.sigma_f


def _expected_sup(max_sqrt_k: float, L_k: float, box: DomainBox) -> float:
    d = box.dimension
    return 12.0 * np.sqrt(6.0 * d) * max(max_sqrt_k, np.sqrt(box.edge * L_k))


def _sample_sup(max_sqrt_k: float, L_k: float, box: DomainBox, delta_L: float) -> float:
    if not 0 < delta_L < 1:
        raise InputError(f"delta_L must lie in (0, 1), got {delta_L}")
    return float(np.sqrt(2.0 * np.log(1.0 / delta_L)) * max_sqrt_k + _expected_sup(max_sqrt_k, L_k, box))


def expected_sup_bound(spec: KernelSpec, box: DomainBox, L_k: float) -> float:
    return float(_expected_sup(max_sqrt_kernel(spec, box), L_k, box))


def sample_sup_bound(spec: KernelSpec, box: DomainBox, delta_L: float, L_k: float) -> float:
    return _sample_sup(max_sqrt_kernel(spec, box), L_k, box, delta_L)


def probabilistic_lipschitz(spec: KernelSpec, box: DomainBox, delta_L: float) -> float:
    """Lipschitz constant of a prior sample holding with probability ``1 - delta_L``.

    Each partial derivative is a GP with the derivative kernel; its
    supremum is bounded at confidence ``delta_L / (2 d)`` and the
    per-axis bounds are combined in the Euclidean norm.
    """
    if box.dimension != spec.dim:
        raise InputError(f"box is {box.dimension}-D but the kernel is {spec.dim}-D")
    per_axis = np.empty(spec.dim)
    share = delta_L / (2.0 * spec.dim)
    for i in range(spec.dim):
        variance = derivative_kernel_variance(spec, i)
        lipschitz = derivative_kernel_lipschitz(spec, i, box)
        per_axis[i] = _sample_sup(float(np.sqrt(variance)), lipschitz, box, share)
    value = float(np.linalg.norm(per_axis))
    debug("-", "lipschitz", f"per-axis sup bounds {per_axis.tolist()} -> L_f={value:.6g}")
    return value


# ---------------------------------------------------------------------------
# Assembled bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorBound:
    model: GPModel = field(repr=False)
    params: BoundParams
    box: DomainBox
    L_k: float
    L_sigma: float | None
    L_mu: float
    beta: float
    omega_sigma: float
    gamma: float

    @classmethod
    def build(cls, model: GPModel, params: BoundParams, box: DomainBox,
              L_k: float | None = None, L_sigma: float | None | Literal["auto"] = "auto") -> "ErrorBound":
        spec = model.kernel
        if box.dimension != spec.dim:
            raise InputError(f"box is {box.dimension}-D but the kernel is {spec.dim}-D")
        if L_k is None:
            L_k = kernel_lipschitz(spec, box)
        if L_sigma == "auto":
            L_sigma = stddev_lipschitz(spec, box) if spec.stationary else None
        L_mu = mean_lipschitz(model, L_k)
        beta_value = beta(params.tau, params.delta, box)
        omega = stddev_modulus(spec, params.tau, L_k, L_sigma)
        gamma_value = gamma(params.tau, L_mu, params.lipschitz, beta_value, omega)
        return cls(model, params, box, L_k, L_sigma, L_mu, beta_value, omega, gamma_value)

    @property
    def sqrt_beta(self) -> float:
        return float(np.sqrt(self.beta))

    def eta(self, X, check_domain: bool = True) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if check_domain and not np.all(self.box.contains(X)):
            raise DomainError("error bound queried outside the certified box")
        return self.sqrt_beta * self.model.stddev(X) + self.gamma

    def eta_from_stddev(self, stddev) -> np.ndarray:
        return self.sqrt_beta * np.asarray(stddev, dtype=float) + self.gamma

    def report(self) -> dict:
        return {
            "tau": self.params.tau,
            "delta": self.params.delta,
            "beta": self.beta,
            "gamma": self.gamma,
            "L_mu": self.L_mu,
            "L_f": self.params.lipschitz,
            "L_f_source": self.params.lipschitz_source,
            "delta_L": self.params.lipschitz_delta,
            "L_k": self.L_k,
            "L_sigma": self.L_sigma,
            "omega_sigma": self.omega_sigma,
            "coverage_number_bound": covering_number_bound(self.params.tau, self.box),
            "confidence": self.params.confidence,
        }


def uniform_error_bound(model: GPModel, x, params: BoundParams, box: DomainBox,
                        L_k: float | None = None, L_sigma: float | None | Literal["auto"] = "auto") -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    bound = ErrorBound.build(model, params, box, L_k=L_k, L_sigma=L_sigma)
    return float(bound.eta(x[None, :])[0])


# ---------------------------------------------------------------------------
# Choosing tau
# ---------------------------------------------------------------------------

def largest_feasible_tau(predicate: Callable[[float], bool], upper: float,
                         lower: float = TAU_SEARCH_RANGE[0]) -> float:
    """Largest tau in ``[lower, upper]`` with ``predicate(tau)``, by log-space bisection.

    ``predicate`` must hold on an interval reaching down to ``lower``.
    """
    if predicate(upper):
        return upper
    if not predicate(lower):
        raise InfeasibilityError(f"no feasible tau in [{lower:.3g}, {upper:.3g}]")
    lo, hi = np.log(lower), np.log(upper)
    for _ in range(TAU_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if predicate(float(np.exp(mid))):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return float(np.exp(lo))


def auto_tau(model: GPModel, params: BoundParams, box: DomainBox,
             L_k: float | None = None, L_sigma: float | None | Literal["auto"] = "auto") -> float:
    """Largest tau whose continuity term is negligible:
    ``gamma(tau) <= 0.01 * sqrt(beta(tau)) * max sqrt(k)``."""
    spec = model.kernel
    if L_k is None:
        L_k = kernel_lipschitz(spec, box)
    if L_sigma == "auto":
        L_sigma = stddev_lipschitz(spec, box) if spec.stationary else None
    scale = max_sqrt_kernel(spec, box)

    def negligible(tau: float) -> bool:
        bound = ErrorBound.build(model, params.with_tau(tau), box, L_k=L_k, L_sigma=L_sigma)
        return bound.gamma <= AUTO_TAU_RATIO * bound.sqrt_beta * scale

    tau = largest_feasible_tau(negligible, upper=box.edge)
    certificate("-", "auto_tau", f"tau={tau:.6g} keeps gamma below {AUTO_TAU_RATIO} sqrt(beta) sigma_f")
    return tau
