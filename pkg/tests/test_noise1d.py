"""Tests for time grids and scalar path samplers."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fracspde.covariance import cov, fbm, hermite
from fracspde.errors import (
    ConfigurationError,
    DomainError,
    GridMismatchError,
    ResolutionError,
    UnsupportedError,
)
from fracspde.noise1d import (
    FbmKernelSpec,
    TimeGrid,
    cell_kernel,
    default_m_inner,
    estimate_hurst,
    fbm_kernel,
    hermite_table,
    hermite_variance_closed_form,
    kernel_derivative,
    normalization_constant,
    path_seed,
    sample_hermite,
    sample_path,
    sample_paths,
)
from fracspde.stats import mc_covariance, mc_mean, normality_report


class TestTimeGrid:
    def test_points(self):
        grid = TimeGrid(2.0, 4)
        np.testing.assert_allclose(grid.points, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert grid.dt == pytest.approx(0.5)

    def test_snap(self):
        grid = TimeGrid(1.0, 10)
        assert grid.snap(0.31) == 3
        assert grid.snap(1.0) == 10

    def test_snap_outside(self):
        with pytest.raises(GridMismatchError):
            TimeGrid(1.0, 10).snap(1.5)

    def test_invalid_horizon(self):
        with pytest.raises(ConfigurationError):
            TimeGrid(0.0, 10)

    def test_matches(self):
        assert TimeGrid(1.0, 8).matches(TimeGrid(1.0, 8))
        assert not TimeGrid(1.0, 8).matches(TimeGrid(1.0, 16))


class TestSeeds:
    def test_path_seed_deterministic(self):
        assert path_seed(7, 3) == path_seed(7, 3)

    def test_path_seed_distinct(self):
        seeds = {path_seed(7, i) for i in range(100)}
        assert len(seeds) == 100

    def test_batch_is_reproducible(self, grid):
        a = sample_paths(fbm(0.7), grid, 11, 5)
        b = sample_paths(fbm(0.7), grid, 11, 5)
        np.testing.assert_array_equal(a, b)

    def test_batch_offset_matches_stream(self, grid):
        full = sample_paths(fbm(0.7), grid, 11, 6)
        tail = sample_paths(fbm(0.7), grid, 11, 3, start=3)
        np.testing.assert_allclose(full[3:], tail)


class TestGaussianSampler:
    def test_starts_at_zero(self, gaussian_kernel, grid):
        values = sample_paths(gaussian_kernel, grid, 1, 4)
        assert values.shape == (4, grid.n + 1)
        np.testing.assert_array_equal(values[:, 0], 0.0)

    def test_covariance(self, gaussian_kernel):
        grid = TimeGrid(1.0, 32)
        values = sample_paths(gaussian_kernel, grid, 3, 4000)
        for s, t in [(0.25, 0.5), (0.5, 1.0), (1.0, 1.0)]:
            est = mc_covariance(values[:, grid.snap(s)], values[:, grid.snap(t)])
            assert est.within(float(cov(gaussian_kernel, s, t)), n_se=4)

    def test_single_path(self, grid):
        path = sample_path(fbm(0.7), grid, 5)
        assert path.values.shape == (grid.n + 1,)
        assert path.family == "fbm"

    def test_hurst_estimate(self):
        grid = TimeGrid(1.0, 256)
        values = sample_paths(fbm(0.8), grid, 9, 200)
        assert estimate_hurst(values, grid, [1, 2, 4, 8, 16]) == pytest.approx(0.8, abs=0.05)


class TestFbmKernel:
    def test_kernel_constant_range(self):
        with pytest.raises(ConfigurationError):
            FbmKernelSpec.for_hurst(0.5)

    def test_kernel_square_integral_is_variance(self):
        # int_0^t K(t, y)^2 dy = t^{2H}
        spec = FbmKernelSpec.for_hurst(0.75)
        value, _ = quad(lambda y: fbm_kernel(spec, 1.0, y) ** 2, 0.0, 1.0, limit=200)
        assert value == pytest.approx(1.0, rel=1e-3)

    def test_cell_kernel_additive(self):
        spec = FbmKernelSpec.for_hurst(0.7)
        whole = cell_kernel(spec, np.array(1.0), np.array(0.1), np.array(0.5))
        parts = cell_kernel(spec, np.array(1.0), np.array(0.1), np.array(0.3)) + cell_kernel(
            spec, np.array(1.0), np.array(0.3), np.array(0.5)
        )
        assert float(whole) == pytest.approx(float(parts))

    def test_derivative_matches_kernel_difference(self):
        spec = FbmKernelSpec.for_hurst(0.75)
        h = 1e-3
        fd = (fbm_kernel(spec, 0.8 + h, 0.3) - fbm_kernel(spec, 0.8 - h, 0.3)) / (2 * h)
        assert kernel_derivative(spec, 0.8, 0.3) == pytest.approx(fd, rel=1e-4)

    def test_derivative_vectorized(self):
        spec = FbmKernelSpec.for_hermite(0.7, 2)
        y = np.array([0.1, 0.2, 0.4])
        values = kernel_derivative(spec, 0.5, y)
        assert values.shape == (3,)
        assert values[0] == pytest.approx(kernel_derivative(spec, 0.5, 0.1))

    def test_cell_kernel_integrates_derivative(self):
        spec = FbmKernelSpec.for_hurst(0.7)
        expected, _ = quad(lambda y: kernel_derivative(spec, 1.0, y), 0.2, 0.6)
        assert float(cell_kernel(spec, np.array(1.0), np.array(0.2), np.array(0.6))) == pytest.approx(
            expected, rel=1e-6
        )

    @pytest.mark.parametrize("y", [0.0, 0.5, 0.7])
    def test_derivative_outside_domain(self, y):
        spec = FbmKernelSpec.for_hurst(0.75)
        with pytest.raises(DomainError):
            kernel_derivative(spec, 0.5, y)


class TestHermite:
    def test_normalization_close_to_continuum(self):
        d = normalization_constant(0.7, 2, 512)
        assert d == pytest.approx(hermite_variance_closed_form(0.7, 2), rel=0.1)

    def test_unsupported_order(self):
        with pytest.raises(UnsupportedError):
            hermite_table(0.7, 5, 256)

    def test_exclude_mode_limited(self):
        with pytest.raises(UnsupportedError):
            hermite_table(0.7, 3, 256, diagonal="exclude")

    def test_resolution_checked(self):
        grid = TimeGrid(1.0, 64)
        with pytest.raises(ResolutionError):
            sample_hermite(0.7, 2, grid, m_inner=64, seed=0)
        with pytest.raises(ResolutionError):
            sample_hermite(0.7, 2, grid, m_inner=200, seed=0)

    def test_default_m_inner(self):
        assert default_m_inner(64) == 256
        assert default_m_inner(200) == 400

    def test_wick_is_default_diagonal(self):
        grid = TimeGrid(1.0, 16)
        default = sample_hermite(0.7, 2, grid, 256, seed=4)
        wick = sample_hermite(0.7, 2, grid, 256, seed=4, diagonal="wick")
        exclude = sample_hermite(0.7, 2, grid, 256, seed=4, diagonal="exclude")
        np.testing.assert_array_equal(default.values, wick.values)
        assert not np.allclose(exclude.values[1:], wick.values[1:])

    def test_path_keeps_inner_increments(self):
        path = sample_hermite(0.7, 2, TimeGrid(1.0, 16), 256, seed=4)
        assert path.inner_increments.shape == (256,)
        assert path.values[0] == 0.0

    def test_terminal_variance(self, rosenblatt):
        grid = TimeGrid(2.0, 16)
        values = sample_paths(rosenblatt, grid, 21, 2000, m_inner=256)
        est = mc_mean(values[:, -1] ** 2)
        target = 2.0 ** (2 * rosenblatt.H)
        assert abs(est.estimate - target) <= 0.05 * target + 4 * est.stderr

    def test_rosenblatt_is_skewed(self, rosenblatt):
        values = sample_paths(rosenblatt, TimeGrid(1.0, 8), 8, 2000, m_inner=256)
        report = normality_report(values[:, -1])
        assert report.rejects_gaussian
        assert report.skewness > 0

    def test_first_order_is_gaussian_fbm(self):
        grid = TimeGrid(1.0, 8)
        values = sample_paths(hermite(0.7, 1), grid, 8, 2000, m_inner=256)
        est = mc_mean(values[:, -1] ** 2)
        assert abs(est.estimate - 1.0) <= 0.05 + 4 * est.stderr
        assert math.isfinite(normality_report(values[:, -1]).skewness)
