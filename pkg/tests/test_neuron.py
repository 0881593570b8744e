"""Tests for the neuron model and its experiment driver."""

import numpy as np
import pytest

from fracspde.covariance import fbm, hermite
from fracspde.errors import ConfigurationError
from fracspde.neuron import (
    NeuronParams,
    build_neuron,
    experiment_table,
    run_experiment,
    soma_flux_residual,
    trace_autocorrelation,
)
from fracspde.noise1d import TimeGrid
from fracspde.qnoise import QSpec, zero_noise
from fracspde.solver import SolverConfig


class TestParams:
    def test_shift(self):
        assert NeuronParams(xi=0.5).lam == pytest.approx(0.25)

    def test_threshold_range(self):
        with pytest.raises(ConfigurationError):
            NeuronParams(xi=0.0)

    def test_channels(self):
        assert NeuronParams(noise_v=False).channels() == ["u", "u_d"]
        assert NeuronParams().to_dict()["noise_channels"] == ["u", "u_d", "v"]


class TestModel:
    def test_sizes(self, small_neuron):
        assert small_neuron.operator.size == 50
        assert small_neuron.noise.dim == 50
        assert [c.name for c in small_neuron.noise.channels] == ["u", "u_d", "v"]

    def test_nonlinearity_on_axon_only(self, small_neuron):
        lay = small_neuron.layout
        z = np.full(small_neuron.operator.size, 2.0)
        out = small_neuron.nemitsky(z)
        assert np.all(out[lay.u] != 0.0)
        np.testing.assert_array_equal(out[lay.u_d], 0.0)
        share = 0.5 * lay.h / small_neuron.operator.mass[lay.d]
        assert out[lay.d] == pytest.approx(share * float(small_neuron.nonlinearity.h(2.0)))
        assert out[lay.d] == pytest.approx(0.5 * lay.h / (1.0 + lay.h) * out[lay.u.start])

    def test_soma_receives_no_noise(self, small_neuron):
        noise = small_neuron.noise.sample(TimeGrid(1.0, 32), seed=1)
        np.testing.assert_array_equal(noise.values[:, small_neuron.layout.d], 0.0)
        assert np.any(noise.values[:, small_neuron.layout.v] != 0.0)

    def test_channels_are_independent_streams(self):
        grid = TimeGrid(1.0, 32)
        full = build_neuron(NeuronParams(), n_x=8, kernels=fbm(0.7))
        partial = build_neuron(NeuronParams(noise_v=False), n_x=8, kernels=fbm(0.7))
        a = full.noise.sample(grid, seed=5)
        b = partial.noise.sample(grid, seed=5)
        lay = full.layout
        np.testing.assert_allclose(a.values[:, lay.u], b.values[:, lay.u])
        np.testing.assert_array_equal(b.values[:, lay.v], 0.0)

    def test_per_channel_kernels(self):
        model = build_neuron(NeuronParams(), n_x=8, kernels={"u": hermite(0.7, 2)})
        kinds = {c.name: c.kernel.family for c in model.noise.channels}
        assert kinds == {"u": "hermite", "u_d": "fbm", "v": "fbm"}

    def test_too_many_modes(self):
        with pytest.raises(ConfigurationError):
            build_neuron(NeuronParams(), n_x=8, qspecs=QSpec(r=2.0, J=12, basis="sine"))

    def test_noise_trace(self, small_neuron):
        expected = 3 * float(np.sum(QSpec(r=2.0, J=15).lambdas()))
        assert small_neuron.noise.trace() == pytest.approx(expected)

    def test_rest_is_equilibrium(self, small_neuron):
        grid = TimeGrid(1.0, 32)
        bundle = small_neuron.solve(zero_noise(grid, small_neuron.operator.size))
        np.testing.assert_allclose(bundle.u, 0.0)

    def test_unit_offset(self, small_neuron):
        offset = small_neuron.unit_offset()
        assert float(small_neuron.operator.norm(offset)) == pytest.approx(1.0)

    def test_soma_flux_residual(self, small_neuron):
        grid = TimeGrid(0.5, 64)
        model = small_neuron
        u0 = model.rest_state().to_reduced() + model.unit_offset()
        bundle = model.solve(zero_noise(grid, model.operator.size), u0)
        residual = soma_flux_residual(model, bundle)
        assert residual.shape == (grid.n,)
        assert np.all(np.isfinite(residual))
        soma = model.soma(bundle)
        assert soma.shape == (grid.n + 1,)
        # the soma relaxes from the unit offset
        assert abs(soma[-1]) < abs(soma[0])

    def test_soma_flux_residual_second_order(self):
        grid = TimeGrid(0.5, 1024)
        late = grid.n // 2
        errors = []
        for n_x in (16, 32, 64):
            model = build_neuron(NeuronParams(), n_x=n_x, kernels=fbm(0.7))
            u0 = model.rest_state().to_reduced() + model.unit_offset()
            bundle = model.solve(zero_noise(grid, model.operator.size), u0)
            errors.append(float(np.max(np.abs(soma_flux_residual(model, bundle)[late:]))))
        # about 4x per halving of h
        assert errors[0] / errors[1] > 3.0
        assert errors[1] / errors[2] > 3.0


class TestAutocorrelation:
    def test_constant_rows(self):
        np.testing.assert_array_equal(trace_autocorrelation(np.ones((3, 10)), 2), 0.0)

    def test_smooth_trace_is_correlated(self):
        t = np.linspace(0, 1, 101)
        assert trace_autocorrelation(t[None, :], 5)[0] > 0.8


class TestExperiment:
    @pytest.fixture(scope="class")
    def report(self):
        return run_experiment(
            params=NeuronParams(),
            config=SolverConfig(),
            kernel=fbm(0.7),
            ensemble=4,
            seed=3,
            n_x=8,
            grid=TimeGrid(1.0, 32),
            qspec=QSpec(r=2.0, J=4, basis="sine"),
            keep_traces=True,
        )

    def test_quantiles_ordered(self, report):
        q = report.soma_quantiles
        assert q.shape == (3, 33)
        assert np.all(q[0] <= q[1]) and np.all(q[1] <= q[2])

    def test_contraction_on_first_path(self, report):
        assert report.contraction is not None
        assert report.contraction.passes

    def test_wiener_comparison(self, report):
        assert report.wiener_autocorrelation is not None
        assert report.long_memory_z is not None
        assert isinstance(report.long_memory_witnessed, bool)

    def test_traces_kept(self, report):
        assert report.soma_traces.shape == (4, 33)

    def test_serialization(self, report):
        doc = report.to_dict()
        assert doc["ensemble"] == 4
        assert doc["diagnostics"]["energy_violations"] == 0
        header, rows = experiment_table(report)
        assert header == ["t", "soma_q05", "soma_q50", "soma_q95"]
        assert rows.shape == (33, 4)

    def test_ensemble_size(self):
        with pytest.raises(ConfigurationError):
            run_experiment(ensemble=1)

    def test_brownian_driver_skips_comparison(self):
        report = run_experiment(
            kernel=fbm(0.5),
            ensemble=2,
            n_x=8,
            grid=TimeGrid(1.0, 16),
            qspec=QSpec(r=2.0, J=2, basis="sine"),
            contraction=False,
        )
        assert report.wiener_autocorrelation is None
        assert report.long_memory_witnessed is None
