"""Exact GP posterior over an immutable training set."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf

from config import PREDICT_CHUNK
from modules.errors import IllConditionedDataError, InputError
from modules.gp.kernels import KernelSpec, as_points, kernel_diag, kernel_matrix


@dataclass(frozen=True)
class TrainingSet:
    inputs: np.ndarray
    targets: np.ndarray
    noise_variance: float

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if inputs.ndim != 2:
            raise InputError(f"training inputs must be a matrix, got shape {inputs.shape}")
        if inputs.shape[0] != targets.shape[0]:
            raise InputError(
                f"{inputs.shape[0]} training inputs but {targets.shape[0]} targets"
            )
        if not self.noise_variance > 0:
            raise InputError(f"noise variance must be positive, got {self.noise_variance}")
        inputs.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @classmethod
    def empty(cls, dim: int, noise_variance: float) -> "TrainingSet":
        return cls(np.zeros((0, dim)), np.zeros(0), noise_variance)

    def __len__(self) -> int:
        return self.targets.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, index) -> "TrainingSet":
        return TrainingSet(self.inputs[index], self.targets[index], self.noise_variance)

    def concat(self, other: "TrainingSet") -> "TrainingSet":
        if other.dim != self.dim:
            raise InputError(f"cannot append {other.dim}-D samples to {self.dim}-D data")
        if other.noise_variance != self.noise_variance:
            raise InputError(
                f"noise variance mismatch: {other.noise_variance} vs {self.noise_variance}"
            )
        return TrainingSet(
            np.vstack([self.inputs, other.inputs]),
            np.concatenate([self.targets, other.targets]),
            self.noise_variance,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.inputs, columns=[f"x_{j + 1}" for j in range(self.dim)])
        frame["y"] = self.targets
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, noise_variance: float) -> "TrainingSet":
        x_cols = [c for c in frame.columns if c.startswith("x_")]
        if "y" not in frame.columns or not x_cols:
            raise InputError("training CSV needs columns x_1..x_d and y")
        x_cols.sort(key=lambda c: int(c.split("_", 1)[1]))
        return cls(frame[x_cols].to_numpy(float), frame["y"].to_numpy(float), noise_variance)


@dataclass(frozen=True)
class GPModel:
    kernel: KernelSpec
    data: TrainingSet
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.data)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at every row of ``X``."""
        X = as_points(X, self.kernel.dim)
        mean = np.empty(X.shape[0])
        var = np.empty(X.shape[0])
        for start in range(0, X.shape[0], PREDICT_CHUNK):
            rows = slice(start, start + PREDICT_CHUNK)
            mean[rows], var[rows] = self._predict_chunk(X[rows])
        return mean, var

    def _mean_chunk(self, X: np.ndarray, k_star: np.ndarray | None = None) -> np.ndarray:
        if self.size == 0:
            return np.zeros(X.shape[0])
        if k_star is None:
            k_star = kernel_matrix(self.kernel, self.data.inputs, X)
        return k_star.T @ self.alpha

    def _predict_chunk(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        prior = kernel_diag(self.kernel, X)
        if self.size == 0:
            return np.zeros(X.shape[0]), prior
        k_star = kernel_matrix(self.kernel, self.data.inputs, X)
        mean = self._mean_chunk(X, k_star)
        v = solve_triangular(self.chol, k_star, lower=True, check_finite=False)
        var = np.maximum(prior - np.sum(v**2, axis=0), 0.0)
        return mean, var

    def mean(self, X) -> np.ndarray:
        """Posterior mean without the variance solve."""
        X = as_points(X, self.kernel.dim)
        mean = np.empty(X.shape[0])
        for start in range(0, X.shape[0], PREDICT_CHUNK):
            rows = slice(start, start + PREDICT_CHUNK)
            mean[rows] = self._mean_chunk(X[rows])
        return mean

    def variance(self, X) -> np.ndarray:
        return self.predict(X)[1]

    def stddev(self, X) -> np.ndarray:
        return np.sqrt(self.predict(X)[1])


def fit(kernel: KernelSpec, data: TrainingSet) -> GPModel:
    if len(data) and data.dim != kernel.dim:
        raise InputError(f"kernel is {kernel.dim}-D but training inputs are {data.dim}-D")
    n = len(data)
    if n == 0:
        return GPModel(kernel, data, np.zeros((0, 0)), np.zeros(0))

    gram = kernel_matrix(kernel, data.inputs)
    gram[np.diag_indices_from(gram)] += data.noise_variance
    chol, info = dpotrf(gram, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise IllConditionedDataError(pivot=int(info), size=n)
    if info < 0:
        raise InputError(f"invalid argument {-info} passed to the Cholesky routine")
    alpha = cho_solve((chol, True), data.targets, check_finite=False)
    chol.setflags(write=False)
    alpha.setflags(write=False)
    return GPModel(kernel, data, chol, alpha)


def _single(model: GPModel, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.kernel.dim,):
        raise InputError(f"expected a point of dimension {model.kernel.dim}, got shape {x.shape}")
    return x[None, :]


def predict_mean(model: GPModel, x) -> float:
    return float(model.mean(_single(model, x))[0])


def predict_var(model: GPModel, x) -> float:
    return float(model.variance(_single(model, x))[0])


def predict_stddev(model: GPModel, x) -> float:
    return float(np.sqrt(predict_var(model, x)))


def add_samples(model: GPModel, new: TrainingSet) -> GPModel:
    if len(new) == 0:
        return model
    return fit(model.kernel, model.data.concat(new))


def downsample(raw: TrainingSet, fine_dt: float, target_Ts: float) -> TrainingSet:
    """Keep every ``floor(target_Ts / fine_dt)``-th sample, starting at index 0."""
    if not fine_dt > 0:
        raise InputError(f"fine_dt must be positive, got {fine_dt}")
    if target_Ts < fine_dt * (1.0 - 1e-12):
        raise InputError(f"target sampling time {target_Ts} is below fine_dt {fine_dt}")
    stride = max(int(np.floor(target_Ts / fine_dt + 1e-9)), 1)
    if stride == 1:
        return raw
    return raw.subset(slice(0, None, stride))
