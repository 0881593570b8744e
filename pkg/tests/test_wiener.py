"""Tests for Wiener integrals, the H inner product and the Hermite transfer kernel."""

import numpy as np
import pytest

from fracspde.covariance import bifbm, cov, fbm, rectangle_measure
from fracspde.errors import ConfigurationError, GridMismatchError, NotInHError, StatisticsError
from fracspde.noise1d import TimeGrid, sample_hermite, sample_path, sample_paths
from fracspde.stats import mc_mean
from fracspde.wiener import (
    Integrand,
    StepFunction,
    abs_h_norm,
    h_inner,
    h_norm,
    hypercontractivity_check,
    riemann_stieltjes,
    step_weights,
    transfer_operator,
    transfer_integral,
    wiener_integral_fn,
    wiener_integral_step,
)


class TestStepFunction:
    def test_evaluation_is_right_open(self):
        f = StepFunction((0.0, 0.5, 1.0), (2.0, -1.0))
        assert f(0.0) == 2.0
        assert f(0.5) == -1.0
        assert f(1.0) == 0.0

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            StepFunction((0.0, 0.5, 0.5), (1.0, 2.0))
        with pytest.raises(ConfigurationError):
            StepFunction((0.0, 1.0), (1.0, 2.0))

    def test_indicator(self):
        f = StepFunction.indicator(0.25, 0.75, scale=3.0)
        np.testing.assert_allclose(f(np.array([0.1, 0.3, 0.8])), [0.0, 3.0, 0.0])

    def test_combine(self):
        f = StepFunction.indicator(0.0, 0.5)
        h = StepFunction.indicator(0.25, 1.0)
        g = f.combine(h, 2.0, -1.0)
        np.testing.assert_allclose(g(np.array([0.1, 0.3, 0.6])), [2.0, 1.0, -1.0])


class TestInnerProduct:
    @pytest.mark.parametrize("t", [0.3, 0.7, 1.0])
    def test_indicator_norm_is_variance(self, gaussian_kernel, t):
        f = StepFunction.indicator(0.0, t)
        assert h_inner(f, f, gaussian_kernel) == pytest.approx(cov(gaussian_kernel, t, t), rel=1e-3)

    def test_rectangle_measure(self):
        kernel = fbm(0.7)
        f = StepFunction.indicator(0.1, 0.4)
        h = StepFunction.indicator(0.6, 0.9)
        assert h_inner(f, h, kernel) == pytest.approx(rectangle_measure(kernel, 0.1, 0.4, 0.6, 0.9))

    def test_bilinear_and_symmetric(self):
        kernel = bifbm(0.8, 0.75)
        f = StepFunction((0.0, 0.3, 1.0), (1.0, -2.0))
        h = StepFunction((0.0, 0.6, 1.0), (0.5, 1.5))
        assert h_inner(f, h, kernel) == pytest.approx(h_inner(h, f, kernel), rel=1e-10)
        doubled = StepFunction((0.0, 0.3, 1.0), (2.0, -4.0))
        assert h_inner(doubled, h, kernel) == pytest.approx(2 * h_inner(f, h, kernel), rel=1e-10)

    def test_callable_constant(self):
        f = Integrand.from_callable(lambda u: np.ones_like(u), T=1.0, bound=1.0)
        assert h_norm(f, fbm(0.75)) == pytest.approx(1.0, rel=1e-3)

    def test_abs_norm_dominates(self):
        f = StepFunction((0.0, 0.5, 1.0), (1.0, -1.0))
        kernel = fbm(0.7)
        assert abs_h_norm(f, kernel) >= h_norm(f, kernel)

    def test_declared_bound_checked(self):
        with pytest.raises(ConfigurationError):
            Integrand.from_callable(lambda u: 2.0 * u, T=1.0, bound=1.0)

    def test_non_integrable(self):
        f = Integrand.from_callable(lambda u: u**-0.99, T=1.0)
        with pytest.raises(NotInHError):
            h_inner(f, f, fbm(0.75), cells=32)


class TestPathwiseIntegral:
    def test_step_weights(self):
        grid = TimeGrid(1.0, 4)
        w = step_weights(StepFunction((0.0, 0.5, 1.0), (1.0, 3.0)), grid)
        np.testing.assert_array_equal(w, [1.0, 1.0, 3.0, 3.0])

    def test_collapse_rejected(self):
        grid = TimeGrid(1.0, 4)
        with pytest.raises(GridMismatchError):
            step_weights(StepFunction((0.0, 0.01, 1.0), (1.0, 2.0)), grid)

    def test_indicator_integral_is_increment(self, grid):
        path = sample_path(fbm(0.7), grid, 3)
        value = wiener_integral_step(StepFunction.indicator(0.25, 0.75), path)
        assert value == pytest.approx(path.values[grid.snap(0.75)] - path.values[grid.snap(0.25)])

    def test_callable_matches_step(self, grid):
        path = sample_path(fbm(0.7), grid, 3)
        f = Integrand.from_callable(lambda u: np.ones_like(u), T=1.0)
        assert wiener_integral_fn(f, path) == pytest.approx(path.values[-1])

    def test_isometry(self, gaussian_kernel, grid):
        values = sample_paths(gaussian_kernel, grid, 17, 4000)
        f = StepFunction((0.0, 0.25, 0.5, 1.0), (1.0, -0.5, 2.0))
        est = mc_mean(np.asarray(riemann_stieltjes(step_weights(f, grid), values)) ** 2)
        assert est.within(h_inner(f, f, gaussian_kernel), n_se=4)


class TestTransfer:
    def test_constant_integrand_reproduces_path(self):
        grid = TimeGrid(1.0, 16)
        path = sample_hermite(0.7, 2, grid, 256, seed=5)
        kernel = transfer_operator(StepFunction.indicator(0.0, 1.0), 0.7, 2, 256, grid=grid)
        assert transfer_integral(kernel, path) == pytest.approx(path.values[-1], rel=1e-9, abs=1e-12)

    def test_order_restricted(self):
        with pytest.raises(ConfigurationError):
            transfer_operator(StepFunction.indicator(0.0, 1.0), 0.7, 3, 256)

    def test_tabulated_kernel_is_symmetric(self):
        kernel = transfer_operator(StepFunction.indicator(0.0, 1.0), 0.7, 2, 64)
        table = kernel.tabulate()
        np.testing.assert_allclose(table, table.T)

    def test_resolution_mismatch(self):
        path = sample_hermite(0.7, 2, TimeGrid(1.0, 16), 256, seed=5)
        kernel = transfer_operator(StepFunction.indicator(0.0, 1.0), 0.7, 2, 128)
        with pytest.raises(GridMismatchError):
            transfer_integral(kernel, path)


class TestHypercontractivity:
    def test_gaussian_fourth_moment(self, rng):
        report = hypercontractivity_check(rng.standard_normal(20_000), 1)
        assert report.ratio == pytest.approx(3.0, rel=0.1)
        assert report.bound == 3.0
        assert report.within_bound

    def test_scale_invariant(self, rng):
        x = rng.standard_normal(20_000)
        a = hypercontractivity_check(x, 1)
        b = hypercontractivity_check(7.0 * x, 1)
        assert b.ratio == pytest.approx(a.ratio)

    def test_second_chaos(self, rng):
        # (Z1^2 + Z2^2 - 2) has E X^4 / (E X^2)^2 = 3 + 12 / 2 = 9
        z = rng.standard_normal((50_000, 2))
        report = hypercontractivity_check(np.sum(z * z, axis=1) - 2.0, 2)
        assert report.ratio == pytest.approx(9.0, rel=0.25)
        assert report.bound == 15.0
        assert report.within_bound

    def test_heavy_tails_exceed_gaussian_bound(self, rng):
        # Laplace: E X^4 / (E X^2)^2 = 6
        report = hypercontractivity_check(rng.laplace(size=50_000), 1)
        assert not report.within_bound

    def test_sample_size(self, rng):
        with pytest.raises(StatisticsError):
            hypercontractivity_check(rng.standard_normal(100), 1)

    def test_order(self, rng):
        with pytest.raises(ConfigurationError):
            hypercontractivity_check(rng.standard_normal(20_000), 3)
