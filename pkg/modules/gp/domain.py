from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from modules.errors import InputError


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned hypercube with edge length ``edge`` centred at ``center``."""

    dimension: int
    edge: float
    center: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.dimension < 1:
            raise InputError(f"box dimension must be >= 1, got {self.dimension}")
        if not self.edge > 0:
            raise InputError(f"box edge must be positive, got {self.edge}")
        center = tuple(float(c) for c in self.center) or (0.0,) * self.dimension
        if len(center) != self.dimension:
            raise InputError(
                f"box center has {len(center)} coordinates, dimension is {self.dimension}"
            )
        object.__setattr__(self, "center", center)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.edge / 2

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.edge / 2

    def contains(self, X, tol: float = 1e-12) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)

    def max_norm(self, scale=None) -> float:
        """Largest ``||x / scale||`` over the box (attained at a corner)."""
        corner = np.abs(np.asarray(self.center)) + self.edge / 2
        if scale is not None:
            corner = corner / np.asarray(scale, dtype=float)
        return float(np.linalg.norm(corner))

    def max_scaled_lag(self, lengthscales) -> float:
        """Largest ``||(x - x') / l||`` for two points of the box."""
        inv = 1.0 / np.asarray(lengthscales, dtype=float)
        return float(self.edge * np.linalg.norm(inv))

    def grid(self, points_per_axis: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
