import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modules.errors import InputError, NumericalDegeneracyError, UnsupportedOperationError
from modules.gp.density import (
    BindingConstraint,
    data_density,
    density_variance_bound,
    geometric_ball_radius,
    geometric_subset_ball,
    geometric_subset_linear,
    kernel_subset,
    variance_bound_general,
    variance_bound_stationary,
)
from modules.gp.kernels import KernelSpec, kernel_matrix
from modules.gp.model import TrainingSet, fit, predict_var

SE = KernelSpec("squared_exponential", 1.0, (1.0, 1.0))
LIN = KernelSpec("linear", 1.0, (1.0, 1.0))
M32 = KernelSpec("matern32", 1.0, (1.0, 1.0))
M52 = KernelSpec("matern52", 2.0, (0.7, 1.3))
FAMILIES = [SE, M32, M52, LIN]
NOISE = 0.01
ORIGIN = np.zeros(2)


def model_at(X, spec=SE, noise=NOISE):
    X = np.asarray(X, dtype=float)
    return fit(spec, TrainingSet(X, np.zeros(X.shape[0]), noise))


def random_model(seed, n_max=20, spec=SE):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, n_max + 1))
    return model_at(rng.uniform(-2, 2, size=(n, 2)), spec=spec), rng.uniform(-2, 2, size=2)


def brute_force_density(model, x, grid):
    """Largest grid value rho' whose neighbourhood is large enough."""
    k_cross = kernel_matrix(model.kernel, model.data.inputs, x[None, :])[:, 0]
    gap = np.sort(1.0 - k_cross**2)
    counts = np.searchsorted(gap, 1.0 / grid, side="right")
    feasible = grid[counts >= grid * model.data.noise_variance]
    return float(feasible.max()) if feasible.size else 0.0


class TestKernelSubset:
    def test_all_coincident_points_are_members(self):
        model = model_at(np.zeros((5, 2)))
        for rho in (0.1, 10.0, 1e6):
            assert kernel_subset(model, ORIGIN, rho).tolist() == [0, 1, 2, 3, 4]

    def test_half_correlated_point_leaves_at_two(self):
        lag = np.sqrt(2 * np.log(2))
        model = model_at([[lag, 0.0]])
        assert kernel_subset(model, ORIGIN, 2.0).size == 0
        assert kernel_subset(model, ORIGIN, 1.0).tolist() == [0]

    def test_linear_inner_points_excluded(self):
        model = model_at([[0.5, 0.0], [0.0, 0.9]], spec=LIN)
        for rho in (1e-6, 1.0, 1e6):
            assert kernel_subset(model, [1.0, 0.0], rho).size == 0

    def test_rejects_nonpositive_rho(self):
        with pytest.raises(InputError):
            kernel_subset(model_at([[0.0, 0.0]]), ORIGIN, 0.0)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_shrinks_as_rho_grows(self, seed):
        model, x = random_model(seed)
        small = set(kernel_subset(model, x, 0.5).tolist())
        large = set(kernel_subset(model, x, 5.0).tolist())
        assert large <= small


class TestDataDensity:
    def test_coincident_points(self):
        result = data_density(model_at(np.zeros((25, 2))), ORIGIN)
        assert result.rho == pytest.approx(2500.0)
        assert result.size == 25
        assert result.binding_constraint is BindingConstraint.CARDINALITY

    def test_empty_model(self):
        model = fit(SE, TrainingSet.empty(2, NOISE))
        assert data_density(model, ORIGIN).rho == 0.0

    def test_zero_prior_variance(self):
        with pytest.raises(NumericalDegeneracyError):
            data_density(model_at([[1.0, 1.0]], spec=LIN), ORIGIN)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_feasible_and_maximal(self, seed):
        model, x = random_model(seed)
        result = data_density(model, x)
        assert result.size >= result.rho * NOISE - 1e-9
        bumped = result.rho * (1 + 1e-6)
        assert kernel_subset(model, x, bumped).size < bumped * NOISE

    @pytest.mark.slow
    def test_matches_grid_search(self):
        grid = np.geomspace(1e-2, 1e5, 100_000)
        step = grid[1] / grid[0]
        for seed in range(20):
            model, x = random_model(seed)
            rho = data_density(model, x).rho
            best = brute_force_density(model, x, grid)
            assert best <= rho * (1 + 1e-12)
            assert rho <= best * step * (1 + 1e-12)


class TestVarianceBounds:
    def test_general_bound_on_coincident_point(self):
        model = model_at([[0.0, 0.0]])
        assert variance_bound_general(model, ORIGIN) == pytest.approx(0.01 / 1.01)

    def test_general_bound_is_tight_for_one_point(self):
        model = model_at([[1.0, 0.0]])
        expected = 1 - np.exp(-1) / 1.01
        assert variance_bound_general(model, ORIGIN) == pytest.approx(expected, rel=1e-9)
        assert predict_var(model, ORIGIN) == pytest.approx(expected, rel=1e-9)

    def test_general_bound_empty_subset(self):
        model = model_at([[0.0, 0.0]])
        assert variance_bound_general(model, ORIGIN, subset=[]) == 1.0

    def test_stationary_bound(self):
        assert variance_bound_stationary(model_at([[0.0, 0.0]]), ORIGIN) == pytest.approx(1 - 1 / 1.01)

    def test_stationary_bound_degrades_with_far_point(self):
        model = model_at([[0.0, 0.0], [9.0, 9.0]])
        assert variance_bound_stationary(model, ORIGIN) == pytest.approx(1.0, abs=1e-12)

    def test_stationary_bound_shrinks_with_more_data(self):
        bounds = [variance_bound_stationary(model_at(np.zeros((n, 2))), ORIGIN) for n in (1, 10, 100)]
        assert bounds[0] > bounds[1] > bounds[2]
        assert bounds[2] < 1e-3

    def test_stationary_bound_needs_stationary_kernel(self):
        with pytest.raises(UnsupportedOperationError):
            variance_bound_stationary(model_at([[1.0, 1.0]], spec=LIN), [1.0, 0.0])

    def test_density_bound_on_coincident_points(self):
        result = density_variance_bound(model_at(np.zeros((25, 2))), ORIGIN)
        assert result.bound == pytest.approx(np.sqrt(2 / 2500))
        assert result.stddev == pytest.approx(np.sqrt(0.01 / 25.01))
        assert result.holds

    def test_density_bound_at_zero_prior_variance(self):
        result = density_variance_bound(model_at([[1.0, 1.0]], spec=LIN), ORIGIN)
        assert result.degenerate
        assert result.bound == float("inf")
        assert result.stddev == 0.0
        assert result.holds

    def test_density_bound_without_data(self):
        result = density_variance_bound(fit(SE, TrainingSet.empty(2, NOISE)), ORIGIN)
        assert result.degenerate
        assert result.bound == float("inf")

    @pytest.mark.parametrize("spec", FAMILIES, ids=lambda s: s.family.value)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_bound_chain(self, spec, seed):
        model, x = random_model(seed, spec=spec)
        density = data_density(model, x)
        var = predict_var(model, x)
        assert var <= variance_bound_general(model, x, density.subset_indices) + 1e-10
        assert var <= variance_bound_general(model, x) + 1e-10
        if spec.stationary:
            assert var <= variance_bound_stationary(model, x) + 1e-10
            assert density_variance_bound(model, x, density).holds


class TestGeometricSubsets:
    def test_ball_radius(self):
        assert geometric_ball_radius(SE, 2.0) == pytest.approx(0.5)

    def test_ball_radius_shrinks(self):
        assert geometric_ball_radius(SE, 1e8) < 1e-3

    @given(st.integers(min_value=0, max_value=2**32 - 1), st.floats(min_value=0.1, max_value=100.0))
    @settings(max_examples=200, deadline=None)
    def test_ball_inside_kernel_subset(self, seed, rho):
        model, x = random_model(seed)
        ball = set(geometric_subset_ball(model, x, rho).tolist())
        assert ball <= set(kernel_subset(model, x, rho).tolist())

    def test_linear_self_point(self):
        x = np.array([1.0, 0.0])
        assert geometric_subset_linear(x, [x], 0.1, 0.5).tolist() == [0]
        assert geometric_subset_linear(x, [x], 10.0, 0.5).size == 0

    def test_linear_orthogonal_point(self):
        assert geometric_subset_linear([1.0, 0.0], [[0.0, 2.0]], 1e-6, 0.1).size == 0

    def test_linear_rejects_bad_alignment(self):
        with pytest.raises(InputError):
            geometric_subset_linear([1.0, 0.0], [[1.0, 0.0]], 1.0, 1.0)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_linear_inside_kernel_subset(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-2, 2, size=(15, 2))
        x = rng.uniform(-1, 1, size=2)
        rho = float(rng.uniform(0.05, 5.0))
        c = float(rng.uniform(0.5, 0.99))
        cone = set(geometric_subset_linear(x, X, rho, c).tolist())
        assert cone <= set(kernel_subset(model_at(X, spec=LIN), x, rho).tolist())
