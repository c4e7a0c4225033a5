import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from modules.errors import InputError, UnsupportedOperationError
from modules.gp.domain import DomainBox
from modules.gp.kernels import (
    KernelFamily,
    KernelSpec,
    derivative_kernel_eval,
    derivative_kernel_lipschitz,
    derivative_kernel_matrix,
    derivative_kernel_variance,
    gradient_lipschitz,
    kernel_eval,
    kernel_gradient,
    kernel_lipschitz,
    kernel_matrix,
    kernel_metric,
    parse_family,
    stddev_lipschitz,
)

SE = KernelSpec("squared_exponential", 1.0, (1.0, 1.0))
M32 = KernelSpec("matern32", 1.0, (1.0, 1.0))
M52 = KernelSpec("matern52", 1.0, (1.0, 1.0))
LIN = KernelSpec("linear", 1.0, (1.0, 1.0))
STATIONARY = [SE, M32, M52]

coords = st.floats(min_value=-4.0, max_value=4.0, allow_nan=False, allow_infinity=False)
points = st.tuples(coords, coords)


class TestEvaluation:
    def test_se_at_unit_lag(self):
        assert kernel_eval(SE, [0, 0], [1, 0]) == pytest.approx(np.exp(-0.5), rel=1e-12)

    def test_prior_variance_on_diagonal(self):
        for spec in STATIONARY:
            assert kernel_eval(spec, [0.3, -1.2], [0.3, -1.2]) == pytest.approx(1.0)

    def test_linear_is_scaled_dot_product(self):
        assert kernel_eval(LIN, [1, 2], [3, 4]) == pytest.approx(11.0)

    def test_metric_zero_for_coincident_points(self):
        for spec in STATIONARY:
            assert kernel_metric(spec, [0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_se_metric_at_unit_lag(self):
        expected = np.sqrt(2.0 - 2.0 * np.exp(-0.5))
        assert kernel_metric(SE, [0, 0], [1, 0]) == pytest.approx(expected, rel=1e-12)
        assert kernel_metric(SE, [0, 0], [1, 0]) == pytest.approx(0.8871, abs=1e-4)

    def test_linear_metric_is_euclidean(self):
        assert kernel_metric(LIN, [0, 0], [1, 1]) == pytest.approx(np.sqrt(2.0))

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            kernel_eval(SE, [0, 0, 0], [0, 0])

    def test_rejects_bad_hyperparameters(self):
        with pytest.raises(InputError):
            KernelSpec("squared_exponential", 0.0, (1.0,))
        with pytest.raises(InputError):
            KernelSpec("squared_exponential", 1.0, (1.0, -2.0))
        with pytest.raises(InputError):
            parse_family("periodic")

    def test_family_aliases(self):
        assert parse_family("SE") is KernelFamily.SQUARED_EXPONENTIAL
        assert parse_family("Matern-5/2") is KernelFamily.MATERN52

    @given(points, points)
    @settings(max_examples=200, deadline=None)
    def test_symmetric(self, x, y):
        for spec in STATIONARY + [LIN]:
            assert kernel_eval(spec, x, y) == pytest.approx(kernel_eval(spec, y, x), rel=1e-12, abs=1e-15)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_gram_is_positive_semidefinite(self, seed):
        X = np.random.default_rng(seed).uniform(-3, 3, size=(12, 2))
        for spec in STATIONARY + [LIN]:
            eigenvalues = np.linalg.eigvalsh(kernel_matrix(spec, X))
            assert eigenvalues.min() >= -1e-9 * max(1.0, eigenvalues.max())

    @given(points, points)
    @settings(max_examples=100, deadline=None)
    def test_gradient_matches_finite_differences(self, x, y):
        h = 1e-6
        for spec in STATIONARY + [LIN]:
            numeric = [
                (kernel_eval(spec, np.add(x, h * e), y) - kernel_eval(spec, np.subtract(x, h * e), y)) / (2 * h)
                for e in np.eye(2)
            ]
            assert_allclose(kernel_gradient(spec, x, y), numeric, atol=1e-6)


class TestContinuityConstants:
    def test_se_kernel_lipschitz(self):
        assert kernel_lipschitz(SE) == pytest.approx(np.exp(-0.5), rel=1e-9)

    def test_se_kernel_lipschitz_scales_with_hyperparameters(self):
        spec = KernelSpec("squared_exponential", 4.0, (2.0, 2.0))
        assert kernel_lipschitz(spec) == pytest.approx(1.213061, rel=1e-6)

    def test_linear_kernel_lipschitz_on_box(self):
        box = DomainBox(2, 10.0)
        assert kernel_lipschitz(LIN, box) == pytest.approx(7.071068, rel=1e-6)

    def test_linear_kernel_lipschitz_needs_box(self):
        with pytest.raises(InputError):
            kernel_lipschitz(LIN)

    def test_se_stddev_lipschitz(self):
        assert stddev_lipschitz(SE) == pytest.approx(1.0, rel=1e-9)
        assert stddev_lipschitz(KernelSpec("se", 4.0, (2.0, 2.0))) == pytest.approx(1.0, rel=1e-9)
        assert stddev_lipschitz(KernelSpec("se", 1.0, (0.5, 0.5))) == pytest.approx(2.0, rel=1e-9)

    def test_stddev_lipschitz_unsupported_for_linear(self):
        with pytest.raises(UnsupportedOperationError):
            stddev_lipschitz(LIN)

    @given(points, points)
    @settings(max_examples=200, deadline=None)
    def test_metric_is_lipschitz(self, x, y):
        for spec in STATIONARY:
            L = stddev_lipschitz(spec)
            distance = float(np.linalg.norm(np.subtract(x, y)))
            assert kernel_metric(spec, x, y) <= L * distance + 1e-9

    @given(points, points)
    @settings(max_examples=200, deadline=None)
    def test_metric_modulus_from_kernel_lipschitz(self, x, y):
        box = DomainBox(2, 10.0)
        distance = float(np.linalg.norm(np.subtract(x, y)))
        for spec in STATIONARY + [LIN, KernelSpec("matern52", 2.0, (0.5, 1.5))]:
            L_k = kernel_lipschitz(spec, box)
            assert kernel_metric(spec, x, y) <= np.sqrt(2 * L_k * distance) + 1e-9

    def test_se_gradient_lipschitz(self):
        assert gradient_lipschitz(SE) == pytest.approx(1.0, rel=1e-9)
        assert gradient_lipschitz(KernelSpec("se", 1.0, (2.0, 2.0))) == pytest.approx(0.25, rel=1e-9)
        assert gradient_lipschitz(KernelSpec("se", 9.0, (3.0, 3.0))) == pytest.approx(1.0, rel=1e-9)


class TestDerivativeKernels:
    def test_se_derivative_kernel_values(self):
        assert derivative_kernel_eval(SE, 0, [0, 0], [0, 0]) == pytest.approx(1.0)
        assert derivative_kernel_eval(SE, 0, [0, 0], [1, 0]) == pytest.approx(0.0, abs=1e-12)

    def test_derivative_kernel_variance(self):
        assert derivative_kernel_variance(SE, 0) == pytest.approx(1.0)
        assert derivative_kernel_variance(KernelSpec("se", 1.0, (2.0, 1.0)), 0) == pytest.approx(0.25)

    def test_matches_mixed_finite_differences(self):
        x, y, h = np.array([0.2, -0.4]), np.array([-0.5, 0.3]), 1e-4
        for spec in (SE, M52):
            e = np.array([h, 0.0])
            numeric = (
                kernel_eval(spec, x + e, y + e) - kernel_eval(spec, x + e, y - e)
                - kernel_eval(spec, x - e, y + e) + kernel_eval(spec, x - e, y - e)
            ) / (4 * h * h)
            assert derivative_kernel_eval(spec, 0, x, y) == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    def test_derivative_gram_is_positive_semidefinite(self):
        X = np.random.default_rng(3).uniform(-2, 2, size=(15, 2))
        for spec in (SE, M52):
            assert np.linalg.eigvalsh(derivative_kernel_matrix(spec, 1, X)).min() >= -1e-9

    def test_matern32_is_not_smooth_enough(self):
        with pytest.raises(UnsupportedOperationError):
            derivative_kernel_eval(M32, 0, [0, 0], [0, 0])
        with pytest.raises(UnsupportedOperationError):
            derivative_kernel_lipschitz(M32, 0)

    def test_axis_out_of_range(self):
        with pytest.raises(InputError):
            derivative_kernel_lipschitz(SE, 2)

    def test_derivative_lipschitz_bounds_finite_differences(self):
        L = derivative_kernel_lipschitz(SE, 0, DomainBox(2, 10.0))
        rng = np.random.default_rng(11)
        y = np.zeros(2)
        for _ in range(200):
            a, b = rng.uniform(-5, 5, size=(2, 2))
            change = abs(derivative_kernel_eval(SE, 0, a, y) - derivative_kernel_eval(SE, 0, b, y))
            assert change <= L * np.linalg.norm(a - b) + 1e-9

    def test_linear_derivative_kernel_is_constant(self):
        assert derivative_kernel_eval(LIN, 1, [3, 4], [-1, 2]) == pytest.approx(1.0)
        assert derivative_kernel_lipschitz(LIN, 0) == 0.0
