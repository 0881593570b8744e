"""Tests for the network operator, its form and semigroup."""

import math

import numpy as np
import pytest

from fracspde.errors import ConfigurationError, DomainError, StateError
from fracspde.netop import (
    NetworkCoefficients,
    NetworkLayout,
    StateVector,
    apply_form,
    apply_operator,
    assemble,
    coercivity_ratios,
    fractional_power_matrix,
    fractional_power_norm,
    operator_triplets,
    random_states,
    scalar_operator,
    semigroup_apply,
)


@pytest.fixture(scope="module")
def spec():
    return assemble(NetworkCoefficients(lam=0.25), 16)


class TestLayout:
    def test_sizes(self):
        lay = NetworkLayout(16)
        assert lay.size == 50
        assert lay.d == 32
        assert lay.v == slice(33, 50)

    def test_block_coords_skip_constrained_nodes(self):
        coords = NetworkLayout(8).block_coords()
        assert coords["u"][1][0] == pytest.approx(1 / 8)
        assert coords["u_d"][1][-1] == pytest.approx(7 / 8)
        assert len(coords["v"][0]) == 9


class TestStateVector:
    def test_reduced_round_trip(self):
        n = 8
        x = np.arange(n + 1) / n
        state = StateVector.from_fields(lambda s: 1 + s, lambda s: 2 - s, np.sin, n)
        again = StateVector.from_reduced(state.to_reduced(), n)
        np.testing.assert_allclose(again.full(), state.full())
        np.testing.assert_allclose(again.v, np.sin(x))

    def test_trace_constraint(self):
        n = 8
        with pytest.raises(StateError):
            StateVector(u=np.ones(n + 1), u_d=np.zeros(n + 1), d=1.0, v=np.zeros(n + 1)).check()

    def test_from_fields_rejects_mismatch(self):
        with pytest.raises(StateError):
            StateVector.from_fields(lambda s: 1 + 0 * s, lambda s: 0 * s, lambda s: 0 * s, 8)

    def test_grid_mismatch(self, spec):
        state = StateVector.from_reduced(np.zeros(NetworkLayout(8).size), 8)
        with pytest.raises(StateError):
            apply_operator(spec, state)


class TestAssembly:
    def test_small_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            assemble(NetworkCoefficients(), 4)

    def test_positivity_checked(self):
        with pytest.raises(ConfigurationError):
            assemble(NetworkCoefficients(lam=1.5), 16)
        with pytest.raises(ConfigurationError):
            assemble(NetworkCoefficients(c=lambda x: x - 0.5), 16)

    def test_operator_matches_form(self, spec, rng):
        z, w = rng.standard_normal((2, spec.size))
        assert -spec.inner(spec.A @ z, w) == pytest.approx(apply_form(spec, w, z), rel=1e-10)

    def test_skew_pair(self, spec):
        n = spec.n_x
        ones = np.ones(n + 1)
        first = StateVector(u=ones, u_d=ones, d=1.0, v=np.zeros(n + 1))
        second = StateVector(u=ones, u_d=ones, d=1.0, v=ones)
        skew = apply_form(spec, first, second) - apply_form(spec, second, first)
        assert skew == pytest.approx(2.0, abs=1e-12)

    def test_full_and_reduced_forms_agree(self, spec, rng):
        z, w = rng.standard_normal((2, spec.size))
        first = StateVector.from_reduced(z, spec.n_x)
        second = StateVector.from_reduced(w, spec.n_x)
        assert apply_form(spec, first, second) == pytest.approx(apply_form(spec, z, w))

    def test_stability(self, spec):
        assert spec.spectral_bound < 0
        assert spec.omega_dissipative > 0
        assert spec.growth_constant >= 1.0
        assert set(spec.stability()) == {"spectral_bound", "omega", "omega_dissipative", "M"}

    def test_coercivity(self, spec):
        ratios = coercivity_ratios(spec, random_states(spec, 100, seed=3))
        assert np.min(ratios) >= spec.coercivity * (1 - 1e-10)

    def test_triplets_are_sparse(self, spec):
        entries = list(operator_triplets(spec))
        assert 0 < len(entries) < spec.size**2 / 4
        r, c, value = entries[0]
        assert spec.A[r, c] == value


class TestSemigroup:
    def test_scalar_closed_form(self):
        spec = scalar_operator(2.0)
        assert spec.propagator(0.5)[0, 0] == pytest.approx(math.exp(-1.0))

    def test_identity_at_zero(self, spec):
        np.testing.assert_array_equal(spec.propagator(0.0), np.eye(spec.size))

    def test_negative_time(self, spec):
        with pytest.raises(DomainError):
            spec.propagator(-0.1)

    def test_semigroup_property(self, spec):
        np.testing.assert_allclose(
            spec.propagator(0.3) @ spec.propagator(0.2), spec.propagator(0.5), atol=1e-10
        )

    def test_crank_nicolson_close_to_expm(self, spec):
        z = random_states(spec, 1, seed=1)[0]
        exact = semigroup_apply(spec, 0.1, z)
        approx = semigroup_apply(spec, 0.1, z, strategy="crank-nicolson")
        assert spec.norm(exact - approx) <= 1e-2 * spec.norm(z)

    def test_state_vector_in_state_vector_out(self, spec):
        state = StateVector.from_reduced(random_states(spec, 1)[0], spec.n_x)
        out = semigroup_apply(spec, 0.1, state)
        assert isinstance(out, StateVector)
        out.check()

    def test_unknown_strategy(self):
        with pytest.raises(ConfigurationError):
            assemble(NetworkCoefficients(), 8, strategy="euler")


class TestFractionalPowers:
    def test_square_root_squares_to_generator(self, spec):
        root = fractional_power_matrix(spec, 0.5)
        np.testing.assert_allclose(root @ root, -spec.A, atol=1e-6 * np.abs(spec.A).max())

    def test_endpoints(self, spec, rng):
        z = rng.standard_normal(spec.size)
        assert fractional_power_norm(spec, 0.0, z) == pytest.approx(spec.norm(z))
        assert fractional_power_norm(spec, 1.0, z) == pytest.approx(spec.norm(spec.A @ z))

    def test_order_range(self, spec):
        with pytest.raises(DomainError):
            fractional_power_norm(spec, 1.5, np.zeros(spec.size))
