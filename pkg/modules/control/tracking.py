"""
Tracking-error certificates for ``x' = A x + b (f(x) + g(x) u)`` under the
compensating law ``u = (-theta^T (x - x_ref) + r_ref - mu(x)) / g(x)``.

The error obeys ``e' = A_theta e + b (f - mu)(x)`` with
``A_theta = A - b theta^T``. Diagonalizing ``A_theta = U diag(lambda) U^-1``
gives the comparison system

    upsilon' = (lambda_max + L_sigma zeta sqrt(beta)) upsilon + zeta eta(x_ref)

whose solution dominates ``||e(t)||``, where ``zeta = ||U|| ||U^-1 b||``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Literal, Sequence

import numpy as np

from config import (
    BOUND_DT,
    CONTROLLABILITY_TOL,
    EIGEN_SEPARATION,
    FIXED_POINT_ROUNDS,
    FIXED_POINT_TOL,
    SUP_SAFETY_FACTOR,
)
from modules.analytics.logger import debug, warning
from modules.bounds.error_bounds import ErrorBound, BoundParams, largest_feasible_tau
from modules.control.integrator import Trajectory, integrate, step_count
from modules.errors import InfeasibilityError, InputError, UnsupportedOperationError
from modules.gp.domain import DomainBox
from modules.gp.model import GPModel


@dataclass(frozen=True)
class LinearPlant:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).reshape(-1)
        if A.shape[0] != A.shape[1]:
            raise InputError(f"A must be square, got shape {A.shape}")
        if b.shape[0] != A.shape[0]:
            raise InputError(f"b has {b.shape[0]} entries, A is {A.shape[0]}x{A.shape[0]}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def controllability_matrix(self) -> np.ndarray:
        cols = [self.b]
        for _ in range(self.dim - 1):
            cols.append(self.A @ cols[-1])
        return np.column_stack(cols)

    @property
    def controllable(self) -> bool:
        sv = np.linalg.svd(self.controllability_matrix(), compute_uv=False)
        return bool(sv[-1] > CONTROLLABILITY_TOL * max(sv[0], 1.0))


@dataclass(frozen=True)
class ClosedLoop:
    plant: LinearPlant
    gains: np.ndarray
    A_theta: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    U: np.ndarray = field(repr=False)
    lambda_max: float
    zeta: float

    @property
    def stable(self) -> bool:
        return self.lambda_max <= 0

    def initial_bound(self, e0) -> float:
        """``||U|| ||U^-1 e(0)||``, the starting value of the comparison system."""
        e0 = np.asarray(e0, dtype=float).reshape(-1)
        return float(np.linalg.norm(self.U, 2) * np.linalg.norm(np.linalg.solve(self.U, e0)))

    def summary(self) -> dict:
        return {
            "theta": self.gains.tolist(),
            "lambda_max": self.lambda_max,
            "zeta": self.zeta,
            "eigenvalues_real": self.eigenvalues.real.tolist(),
            "eigenvalues_imag": self.eigenvalues.imag.tolist(),
        }


def closed_loop(plant: LinearPlant, theta) -> ClosedLoop:
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).reshape(-1)
    if theta.shape != (plant.dim,):
        raise InputError(f"expected {plant.dim} gains, got {theta.shape[0]}")
    A_theta = plant.A - np.outer(plant.b, theta)
    eigenvalues, U = np.linalg.eig(A_theta)
    radius = float(np.max(np.abs(eigenvalues)))
    for li, lj in combinations(eigenvalues, 2):
        if abs(li - lj) <= EIGEN_SEPARATION * radius or radius == 0.0:
            raise UnsupportedOperationError(
                f"closed loop has repeated eigenvalue {li:.6g}; Jordan forms are not handled"
            )
    zeta = float(np.linalg.norm(U, 2) * np.linalg.norm(np.linalg.solve(U, plant.b)))
    lambda_max = float(np.max(eigenvalues.real))
    if lambda_max > 0:
        warning("-", "closed_loop", f"closed loop is unstable (lambda_max={lambda_max:.6g}); bounds are meaningless")
    theta.setflags(write=False)
    return ClosedLoop(plant, theta, A_theta, eigenvalues, U, lambda_max, zeta)


# ---------------------------------------------------------------------------
# Gain design
# ---------------------------------------------------------------------------

def default_pole_pattern(dim: int) -> np.ndarray:
    """Unit pole shape whose largest real part is -1."""
    if dim == 2:
        return np.array([-1.0 + np.sqrt(3.0) * 1j, -1.0 - np.sqrt(3.0) * 1j])
    return -(1.0 + 0.5 * np.arange(dim)).astype(complex)


def place_poles(plant: LinearPlant, poles: Sequence[complex]) -> np.ndarray:
    """Ackermann's formula: gains giving ``A - b theta^T`` the requested spectrum."""
    poles = np.asarray(poles, dtype=complex)
    if poles.shape != (plant.dim,):
        raise InputError(f"need {plant.dim} poles, got {poles.shape[0]}")
    if not plant.controllable:
        raise InputError("plant (A, b) is not controllable; poles cannot be placed")
    coeffs = np.real_if_close(np.poly(poles), tol=1e6)
    if np.iscomplexobj(coeffs):
        raise InputError("requested poles must come in conjugate pairs")
    char_poly = np.zeros_like(plant.A)
    for c in coeffs:
        char_poly = char_poly @ plant.A + c * np.eye(plant.dim)
    last_row = np.linalg.solve(plant.controllability_matrix().T, np.eye(plant.dim)[-1])
    return char_poly.T @ last_row


def benchmark_gains(theta1: float, theta2: float) -> np.ndarray:
    """Gains of ``u_lin = -theta1 theta2 x_1 - theta2 x_2``."""
    return np.array([theta1 * theta2, theta2])


def gains_for_decay_rate(plant: LinearPlant, coefficient: float, margin: float = 1.0,
                         pattern: Sequence[complex] | None = None,
                         zeta0: float | None = None) -> ClosedLoop:
    """Place poles so that ``-lambda_max = margin * coefficient * zeta``.

    ``zeta`` depends on the placed poles, so the rate and ``zeta`` are
    iterated to a fixed point starting from ``zeta0`` (``||b||`` by default).
    """
    if coefficient < 0:
        raise InputError(f"decay coefficient must be nonnegative, got {coefficient}")
    pattern = default_pole_pattern(plant.dim) if pattern is None else np.asarray(pattern, dtype=complex)
    pattern = pattern / -np.max(pattern.real)
    zeta = float(np.linalg.norm(plant.b)) if zeta0 is None else float(zeta0)
    history = []
    for round_ in range(1, FIXED_POINT_ROUNDS + 1):
        rate = margin * coefficient * zeta
        loop = closed_loop(plant, place_poles(plant, rate * pattern))
        history.append(loop.zeta)
        if abs(loop.zeta - zeta) <= FIXED_POINT_TOL * max(zeta, 1.0):
            debug("-", "gains", f"zeta fixed point {loop.zeta:.12g} after {round_} rounds")
            return loop
        zeta = loop.zeta
    raise InfeasibilityError(
        f"gain/zeta fixed point did not converge in {FIXED_POINT_ROUNDS} rounds; zeta history {history}"
    )


def required_decay_for_kappa(kappa_target: float, L_sigma: float, zeta: float, beta_value: float) -> float:
    """``-lambda_max`` that makes ``kappa`` equal ``kappa_target``."""
    if not kappa_target > 0:
        raise InputError(f"kappa target must be positive, got {kappa_target}")
    root = np.sqrt(beta_value)
    return float(2.0 * zeta * root / kappa_target + L_sigma * zeta * root)


def gains_for_kappa(plant: LinearPlant, kappa_target: float, L_sigma: float, beta_value: float,
                    pattern: Sequence[complex] | None = None) -> ClosedLoop:
    root = np.sqrt(beta_value)
    return gains_for_decay_rate(plant, 2.0 * root / kappa_target + L_sigma * root, pattern=pattern)


def baseline_gain(zeta: float, f_bar: float, e_bar: float) -> float:
    """``-lambda_max`` a controller without compensation needs for ``||e|| <= e_bar``."""
    if not e_bar > 0:
        raise InputError(f"target error must be positive, got {e_bar}")
    return zeta * f_bar / e_bar


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

def _decay(loop: ClosedLoop, L_sigma: float, beta_value: float) -> float:
    return loop.lambda_max + L_sigma * loop.zeta * np.sqrt(beta_value)


def gain_condition(loop: ClosedLoop, L_sigma: float, beta_value: float) -> bool:
    return bool(_decay(loop, L_sigma, beta_value) < 0)


def max_tracking_bound(loop: ClosedLoop, sup_eta_ref: float, L_sigma: float, beta_value: float) -> float:
    denominator = _decay(loop, L_sigma, beta_value)
    if not denominator < 0:
        raise InfeasibilityError(
            f"gain condition violated: lambda_max + L_sigma zeta sqrt(beta) = {denominator:.6g} >= 0"
        )
    return float(-loop.zeta * sup_eta_ref / denominator)


def kappa(loop: ClosedLoop, L_sigma: float, beta_value: float) -> float:
    denominator = _decay(loop, L_sigma, beta_value)
    if not denominator < 0:
        raise InfeasibilityError(f"kappa undefined: denominator {denominator:.6g} >= 0")
    return float(-2.0 * loop.zeta * np.sqrt(beta_value) / denominator)


def tracking_bound_ode(loop: ClosedLoop, eta_ref: Callable[[np.ndarray], np.ndarray], L_sigma: float,
                       beta_value: float, upsilon0: float, horizon: float, dt: float) -> Trajectory:
    """Integrate the comparison system with the simulator's RK4 at pitch ``dt``.

    ``eta_ref`` maps an array of times to the error bound along the reference.
    """
    if upsilon0 < 0:
        raise InputError(f"initial bound must be nonnegative, got {upsilon0}")
    steps = step_count(horizon, dt)
    # RK4 stages land on the half-step grid.
    stage_times = 0.5 * dt * np.arange(2 * steps + 1)
    stage_eta = np.asarray(eta_ref(stage_times), dtype=float).reshape(-1)
    if stage_eta.shape != stage_times.shape:
        raise InputError("eta_ref must return one value per requested time")
    rate = _decay(loop, L_sigma, beta_value)
    zeta = loop.zeta

    def comparison(t: float, upsilon: np.ndarray) -> np.ndarray:
        return rate * upsilon + zeta * np.interp(t, stage_times, stage_eta)

    return integrate(comparison, [upsilon0], steps * dt, dt)


def reference_sup(values: Callable[[np.ndarray], np.ndarray], reference, dt: float = BOUND_DT,
                  safety: float = SUP_SAFETY_FACTOR) -> float:
    """Supremum of ``values(x_ref)`` over one reference period, inflated by ``safety``."""
    times = np.arange(0.0, reference.period + 0.5 * dt, dt)
    states, _ = reference.evaluate(times)
    return float(np.max(values(states)) * safety)


# ---------------------------------------------------------------------------
# Choosing tau
# ---------------------------------------------------------------------------

def tau_for_density(model: GPModel, rho_min: float, box: DomainBox, delta: float, L_f: float,
                    L_k: float, L_sigma: float | None | Literal["auto"] = "auto") -> float:
    """Largest tau with ``beta(tau) >= gamma(tau)^2 rho_min k(0) / 2``."""
    if rho_min < 0:
        raise InputError(f"density must be nonnegative, got {rho_min}")
    k0 = model.kernel.signal_variance
    params = BoundParams(tau=box.edge, delta=delta, lipschitz=L_f)

    def feasible(tau: float) -> bool:
        bound = ErrorBound.build(model, params.with_tau(tau), box, L_k=L_k, L_sigma=L_sigma)
        return bound.beta >= bound.gamma**2 * rho_min * k0 / 2.0

    return largest_feasible_tau(feasible, upper=box.edge)


def tau_for_stddev(model: GPModel, sup_sigma: float, box: DomainBox, delta: float, L_f: float,
                   L_k: float, L_sigma: float | None | Literal["auto"] = "auto") -> float:
    """Largest tau with ``gamma(tau) <= sqrt(beta(tau)) * sup_sigma``, so that
    ``sup eta <= 2 sqrt(beta) sup sigma`` along the reference."""
    if sup_sigma < 0:
        raise InputError(f"stddev must be nonnegative, got {sup_sigma}")
    params = BoundParams(tau=box.edge, delta=delta, lipschitz=L_f)

    def feasible(tau: float) -> bool:
        bound = ErrorBound.build(model, params.with_tau(tau), box, L_k=L_k, L_sigma=L_sigma)
        return bound.gamma <= bound.sqrt_beta * sup_sigma

    return largest_feasible_tau(feasible, upper=box.edge)
