"""Tests for nonlinearities, the Yosida resolvent and the time schemes."""

import numpy as np
import pytest

from fracspde.covariance import fbm
from fracspde.errors import (
    ConfigurationError,
    ContractError,
    DivergenceError,
    GridMismatchError,
    PreconditionError,
)
from fracspde.netop import scalar_operator
from fracspde.noise1d import TimeGrid, sample_paths
from fracspde.qnoise import embed_scalar, zero_noise
from fracspde.solver import (
    CauchyReport,
    NemitskyOperator,
    NonlinearitySpec,
    SolverConfig,
    contraction_check,
    cubic_nonlinearity,
    fitzhugh_nagumo,
    linear_nonlinearity,
    reference_solution,
    solve,
    yosida_approximation,
    yosida_cauchy_check,
    yosida_energy_band,
    yosida_halving_study,
    yosida_resolvent,
    zero_nonlinearity,
)


@pytest.fixture(scope="module")
def scalar_noise():
    grid = TimeGrid(1.0, 128)
    return embed_scalar(sample_paths(fbm(0.7), grid, 21, 1)[0], grid, fbm(0.7), 21)


class TestNonlinearity:
    def test_fitzhugh_shift(self):
        nl = fitzhugh_nagumo(0.5)
        assert nl.lam == pytest.approx(0.25)
        assert nl.rho == 1.0

    @pytest.mark.parametrize("xi", [0.1, 0.5, 0.9])
    def test_fitzhugh_dissipative_with_growth_bound(self, xi):
        nl = fitzhugh_nagumo(xi)
        assert nl.dissipativity_violations() == 0
        assert nl.growth_violations() == 0

    def test_fitzhugh_threshold_range(self):
        with pytest.raises(ConfigurationError):
            fitzhugh_nagumo(1.0)

    def test_derivative(self):
        nl = fitzhugh_nagumo(0.3)
        u = np.linspace(-2, 2, 9)
        numeric = (nl(u + 1e-6) - nl(u - 1e-6)) / 2e-6
        np.testing.assert_allclose(nl.dh(u), numeric, atol=1e-6)

    def test_increasing_map_detected(self):
        nl = NonlinearitySpec(h=lambda u: np.asarray(u) ** 3, rho=1.0)
        assert nl.dissipativity_violations() > 0

    def test_linear_rate_sign(self):
        with pytest.raises(ConfigurationError):
            linear_nonlinearity(-1.0)


class TestYosida:
    def test_linear_resolvent(self):
        w = np.array([-1.0, 0.5, 3.0])
        np.testing.assert_allclose(yosida_resolvent(linear_nonlinearity(2.0), 0.1, w), w / 1.2)

    def test_resolvent_equation(self):
        nl = fitzhugh_nagumo(0.5)
        w = np.linspace(-3, 3, 13)
        y = yosida_resolvent(nl, 0.2, w)
        np.testing.assert_allclose(y - 0.2 * nl(y), w, atol=1e-10)

    def test_resolvent_without_derivative(self):
        cubic = cubic_nonlinearity()
        nl = NonlinearitySpec(h=cubic.h, rho=1.0)
        y = yosida_resolvent(nl, 0.5, 2.0)
        assert isinstance(y, float)
        assert y + 0.5 * y**3 == pytest.approx(2.0)

    def test_positive_parameter(self):
        with pytest.raises(PreconditionError):
            yosida_resolvent(cubic_nonlinearity(), 0.0, 1.0)

    def test_non_dissipative_rejected(self):
        nl = NonlinearitySpec(h=lambda u: np.asarray(u, dtype=float) ** 3, rho=1.0)
        with pytest.raises(ContractError):
            yosida_resolvent(nl, 0.1, np.array([1.0]))

    def test_approximation_converges(self):
        nl = fitzhugh_nagumo(0.5)
        w = np.linspace(-2, 2, 9)
        errors = [np.max(np.abs(yosida_approximation(nl, a, w) - nl(w))) for a in (1e-2, 1e-3)]
        assert errors[1] < errors[0] / 5

    def test_nemitsky_weights(self):
        lift = NemitskyOperator(cubic_nonlinearity(), np.array([1.0, 0.0, 1.0]))
        np.testing.assert_allclose(lift(np.array([2.0, 2.0, -1.0])), [-8.0, 0.0, 1.0])
        np.testing.assert_allclose(lift.yosida(np.array([0.0, 5.0, 0.0]), 0.1), 0.0)


class TestSolverConfig:
    def test_unknown_scheme(self):
        with pytest.raises(ConfigurationError):
            SolverConfig(scheme="rk4")

    def test_yosida_needs_alpha(self):
        with pytest.raises(ConfigurationError):
            SolverConfig(scheme="yosida")

    def test_with_alpha(self):
        cfg = SolverConfig(scheme="yosida", alpha=0.1).with_alpha(0.05)
        assert cfg.alpha == 0.05
        assert cfg.to_dict()["scheme"] == "yosida"


class TestDeterministic:
    def test_cubic_closed_form(self):
        grid = TimeGrid(1.0, 1024)
        bundle = solve(
            scalar_operator(1.0),
            cubic_nonlinearity(),
            zero_noise(grid, 1),
            np.array([1.0]),
            SolverConfig(scheme="exponential"),
        )
        exact = 1.0 / np.sqrt(2.0 * np.exp(2.0 * grid.points) - 1.0)
        assert np.max(np.abs(bundle.u[:, 0] - exact)) <= 1e-4

    def test_semi_implicit_first_order(self):
        errors = []
        for n in (128, 256):
            grid = TimeGrid(1.0, n)
            bundle = solve(scalar_operator(1.0), cubic_nonlinearity(), zero_noise(grid, 1), np.array([1.0]))
            exact = 1.0 / np.sqrt(2.0 * np.exp(2.0 * grid.points) - 1.0)
            errors.append(np.max(np.abs(bundle.u[:, 0] - exact)))
        assert errors[0] / errors[1] == pytest.approx(2.0, abs=0.3)

    def test_fitzhugh_against_reference(self):
        grid = TimeGrid(1.0, 1024)
        spec, nl = scalar_operator(1.0), fitzhugh_nagumo(0.5)
        u0 = np.array([0.8])
        run = solve(spec, nl, zero_noise(grid, 1), u0, SolverConfig(scheme="exponential"))
        assert np.max(np.abs(run.u - reference_solution(spec, nl, u0, grid))) <= 1e-4

    def test_blowup_guard(self):
        grid = TimeGrid(1.0, 16)
        explosive = NonlinearitySpec(h=lambda u: np.asarray(u, dtype=float) ** 3, rho=1.0)
        with pytest.raises(DivergenceError) as info:
            solve(scalar_operator(1.0), explosive, zero_noise(grid, 1), np.array([10.0]))
        assert info.value.step is not None


class TestStochastic:
    def test_linear_part_is_convolution(self, scalar_noise):
        bundle = solve(scalar_operator(1.0), zero_nonlinearity(), scalar_noise, np.zeros(1))
        np.testing.assert_allclose(bundle.y, 0.0)
        np.testing.assert_allclose(bundle.u, bundle.convolution.values)

    @pytest.mark.parametrize("scheme", ["semi-implicit", "exponential"])
    def test_schemes_agree(self, scalar_noise, scheme):
        spec, nl = scalar_operator(1.0), fitzhugh_nagumo(0.5)
        a = solve(spec, nl, scalar_noise, np.array([0.5]), SolverConfig(scheme=scheme))
        b = solve(spec, nl, scalar_noise, np.array([0.5]), SolverConfig(scheme="exponential"))
        assert np.max(np.abs(a.u - b.u)) <= 5e-2

    def test_energy_inequality(self, scalar_noise):
        bundle = solve(scalar_operator(1.0), fitzhugh_nagumo(0.5), scalar_noise, np.array([1.0]))
        assert bundle.energy_violations == 0
        assert bundle.summary()["steps"] == 128

    def test_step_mismatch(self, scalar_noise):
        with pytest.raises(GridMismatchError):
            solve(scalar_operator(1.0), cubic_nonlinearity(), scalar_noise, np.zeros(1), SolverConfig(dt=0.1))

    def test_initial_state_shape(self, scalar_noise):
        with pytest.raises(GridMismatchError):
            solve(scalar_operator(1.0), cubic_nonlinearity(), scalar_noise, np.zeros(2))

    def test_contraction(self, scalar_noise):
        report = contraction_check(
            scalar_operator(1.0), fitzhugh_nagumo(0.5), scalar_noise, np.array([0.0]), np.array([1.0])
        )
        assert report.omega_hat == pytest.approx(1.0)
        assert report.passes
        assert report.monotone


class TestYosidaStudies:
    def test_cauchy(self, scalar_noise):
        spec, nl = scalar_operator(1.0), fitzhugh_nagumo(0.5)
        assert yosida_cauchy_check(spec, nl, scalar_noise, np.array([1.0]), 0.1, 0.1).sup_sq_diff == 0.0
        report = yosida_cauchy_check(spec, nl, scalar_noise, np.array([1.0]), 0.1, 0.05)
        assert report.sup_sq_diff > 0
        assert report.bound > 0
        assert report.passes
        assert report.to_dict()["passes"] is True
        with pytest.raises(PreconditionError):
            yosida_cauchy_check(spec, nl, scalar_noise, np.array([1.0]), 0.0, 0.05)

    def test_cauchy_flags_excess(self):
        report = CauchyReport(alpha=0.1, beta=0.05, sup_sq_diff=0.2, bound=0.1)
        assert not report.passes
        assert report.ratio == pytest.approx(0.2 / 0.15)

    def test_halving(self, scalar_noise):
        study = yosida_halving_study(
            scalar_operator(1.0), fitzhugh_nagumo(0.5), scalar_noise, np.array([1.5]), 0.05, 2
        )
        assert len(study.factors) == 2
        assert study.sup_diffs[-1] < study.sup_diffs[0]

    def test_energy_band(self, scalar_noise):
        band = yosida_energy_band(
            scalar_operator(1.0), fitzhugh_nagumo(0.5), scalar_noise, np.array([1.0])
        )
        assert sorted(band) == [1e-3, 1e-2, 1e-1]
        assert max(band.values()) <= 1.5 * min(band.values())
