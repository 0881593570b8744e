"""Tests for Q-noise: eigenvalues, bases and sampling."""

import numpy as np
import pytest

from fracspde.covariance import cov, fbm
from fracspde.errors import ConfigurationError
from fracspde.noise1d import TimeGrid
from fracspde.qnoise import (
    EdgeBlock,
    QSpec,
    basis_matrix,
    embed_scalar,
    sample_qnoise,
    sample_qnoise_batch,
    sine_modes,
    tail_sum,
    trace,
    zero_noise,
)
from fracspde.stats import mc_mean


class TestQSpec:
    def test_power_law(self):
        np.testing.assert_allclose(QSpec(r=2.0, J=3).lambdas(), [1.0, 0.25, 1.0 / 9.0])

    def test_nuclear_required(self):
        with pytest.raises(ConfigurationError, match="nuclear"):
            QSpec(r=1.0, J=4)

    def test_explicit_eigenvalues(self):
        q = QSpec(eigenvalues=(2.0, 1.0, 0.5))
        assert q.J == 3
        assert trace(q).tail == 0.0
        with pytest.raises(ConfigurationError):
            QSpec(eigenvalues=(1.0, 2.0))

    def test_unknown_basis(self):
        with pytest.raises(ConfigurationError):
            QSpec(basis="wavelet")

    def test_trace_and_tail(self):
        q = QSpec(r=2.0, J=16)
        report = trace(q)
        assert report.partial == pytest.approx(sum(j**-2.0 for j in range(1, 17)))
        # the midpoint tail estimate brackets the true remainder of zeta(2)
        assert report.total == pytest.approx(np.pi**2 / 6, rel=1e-3)
        assert tail_sum(QSpec(r=2.0, J=64), 16) <= report.tail


class TestBasis:
    def _gram(self, E, mass):
        return (E * mass[None, :]) @ E.T

    def test_canonical_weighted(self):
        mass = np.linspace(0.5, 2.0, 10)
        E = basis_matrix(QSpec(J=4), 10, mass)
        np.testing.assert_allclose(self._gram(E, mass), np.eye(4), atol=1e-12)

    def test_sine_orthonormal(self):
        x = np.linspace(0.0, 1.0, 33)
        mass = np.full(33, 1.0 / 32)
        mass[[0, -1]] /= 2
        modes = sine_modes(x, mass, 8)
        np.testing.assert_allclose((modes * mass) @ modes.T, np.eye(8), atol=1e-10)

    def test_sine_edges_and_points(self):
        dim = 17
        mass = np.ones(dim) / 8
        edges = [
            EdgeBlock(indices=np.arange(8), x=np.arange(8) / 8.0),
            EdgeBlock(indices=np.arange(8, 16), x=(np.arange(8) + 1) / 8.0),
        ]
        E = basis_matrix(QSpec(J=10, basis="sine"), dim, mass, edges, points=[16])
        np.testing.assert_allclose(self._gram(E, mass), np.eye(10), atol=1e-10)
        # point vector follows the first round of edge modes
        assert E[2, 16] != 0.0

    def test_too_many_modes(self):
        with pytest.raises(ConfigurationError):
            basis_matrix(QSpec(J=12), 10)
        with pytest.raises(ConfigurationError):
            basis_matrix(QSpec(J=11, basis="sine"), 10)

    def test_interior_count(self):
        block = EdgeBlock(indices=np.arange(5), x=np.linspace(0.0, 1.0, 5))
        assert block.interior == 3


class TestSampling:
    def test_single_matches_batch(self):
        grid = TimeGrid(1.0, 16)
        qspec = QSpec(r=2.0, J=4)
        basis = basis_matrix(qspec, 6)
        batch = sample_qnoise_batch(fbm(0.7), qspec, grid, basis, 5, 3)
        single = sample_qnoise(fbm(0.7), qspec, grid, 6, 5, path_index=2, basis=basis)
        np.testing.assert_allclose(single.values, batch[2], atol=1e-12)
        assert single.modes.shape == (4, grid.n + 1)

    def test_mean_square_norm_is_trace(self):
        grid = TimeGrid(1.0, 16)
        qspec = QSpec(r=2.0, J=8)
        kernel = fbm(0.75)
        values = sample_qnoise_batch(kernel, qspec, grid, basis_matrix(qspec, 8), 9, 3000)
        x = values[:, -1]
        est = mc_mean(np.sum(x * x, axis=1))
        assert est.within(trace(qspec).partial * float(cov(kernel, 1.0, 1.0)), n_se=4)

    def test_basis_shape_checked(self):
        with pytest.raises(ConfigurationError):
            sample_qnoise_batch(fbm(0.7), QSpec(J=4), TimeGrid(1.0, 8), np.eye(3), 0, 1)

    def test_truncated_freezes_increments(self):
        grid = TimeGrid(1.0, 8)
        noise = sample_qnoise(fbm(0.7), QSpec(J=2), grid, 3, 1)
        cut = noise.truncated(4)
        np.testing.assert_array_equal(cut.increments[4:], 0.0)
        np.testing.assert_array_equal(cut.values[:5], noise.values[:5])

    def test_zero_and_scalar(self):
        grid = TimeGrid(1.0, 8)
        assert zero_noise(grid, 3).values.shape == (9, 3)
        noise = embed_scalar(np.arange(9.0), grid)
        assert noise.dim == 1
        assert noise.qspec.J == 1
