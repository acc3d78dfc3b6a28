import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sandpile.grid import Grid, GradientMode, ObstacleField, gradient
from sandpile.oracle import generic_field
from sandpile.penalty import (
    Regime,
    clamp_pm,
    clamp_pm_deriv,
    clamp_potential,
    feasibility_violation,
    penalty_apply,
    penalty_deriv_apply,
    penalty_deriv_matrix,
    penalty_energy,
    point_jet,
)

NABLA = GradientMode.nabla()


class TestClamp:
    """Test the projection onto [0, 1], its derivative and potential."""

    @pytest.mark.parametrize(("t", "expected"), [(-0.5, 0.0), (0.3, 0.3), (1.7, 1.0)])
    def test_clamp(self, t, expected):
        assert clamp_pm(t) == pytest.approx(expected)

    @pytest.mark.parametrize(("t", "expected"), [(0.5, 1.0), (-2.0, 0.0), (1.0, 0.0), (0.0, 0.0)])
    def test_derivative_open_interval(self, t, expected):
        assert clamp_pm_deriv(t) == expected

    @pytest.mark.parametrize(("t", "expected"), [(-1.0, 0.0), (0.5, 0.125), (2.0, 1.5)])
    def test_potential(self, t, expected):
        assert clamp_potential(t) == pytest.approx(expected)


class TestPointJet:
    """Test cellwise values and Newton derivatives of P."""

    def test_inactive(self):
        jet = point_jet([0.5, 0.0], 1.0)
        assert_array_equal(jet.value, [0.0, 0.0])
        assert_array_equal(jet.deriv, np.zeros((2, 2)))
        assert jet.regime == Regime.INACTIVE

    def test_ramp(self):
        jet = point_jet([1.5, 0.0], 1.0)
        assert_allclose(jet.value, [0.5, 0.0])
        assert_allclose(jet.deriv, [[1.0, 0.0], [0.0, 1.0 / 3.0]])
        assert jet.regime == Regime.RAMP

    def test_saturated_at_kink(self):
        jet = point_jet([2.0, 0.0], 1.0)
        assert_allclose(jet.value, [1.0, 0.0])
        assert_allclose(jet.deriv, [[0.0, 0.0], [0.0, 0.5]])
        assert jet.regime == Regime.SATURATED

    def test_one_dimensional(self):
        jet = point_jet([1.5], 1.0)
        assert_allclose(jet.value, [0.5])
        assert_allclose(jet.deriv, [[1.0]])

    def test_derivative_symmetric(self, rng):
        for _ in range(20):
            jet = point_jet(3 * rng.standard_normal(2), 1.0)
            assert_allclose(jet.deriv, jet.deriv.T)


class TestPenaltyOperator:
    """Test the assembled penalty and its Newton derivative."""

    def test_zero_state(self, grid_2d, unit_obstacle):
        assert not np.any(penalty_apply(grid_2d, grid_2d.zeros(), unit_obstacle(grid_2d), NABLA))

    def test_hand_case(self, one_node, unit_obstacle):
        result = penalty_apply(one_node, np.array([0.9]), unit_obstacle(one_node), NABLA)
        assert_allclose(result, [1.6])

    def test_derivative_hand_case(self, one_node, unit_obstacle):
        result = penalty_deriv_apply(
            one_node, np.array([0.9]), unit_obstacle(one_node), NABLA, np.array([1.0])
        )
        assert_allclose(result, [4.0])

    @pytest.mark.parametrize("d", [1, 2])
    def test_vanishes_on_admissible_set(self, d, rng):
        g = Grid(d, 9)
        phi = ObstacleField(g, 0.5 + rng.random(g.num_cells), 0.5)
        for _ in range(10):
            u = rng.standard_normal(g.num_nodes)
            slopes = np.linalg.norm(gradient(g, u), axis=1)
            u *= 0.9 * np.min(phi.phi / slopes)
            assert_array_equal(penalty_apply(g, u, phi, NABLA), g.zeros())
            v = rng.standard_normal(g.num_nodes)
            assert_array_equal(penalty_deriv_apply(g, u, phi, NABLA, v), g.zeros())

    @pytest.mark.parametrize("mode_name", ["nabla", "incremental"])
    def test_derivative_symmetric_and_monotone(self, grid_2d, rng, unit_obstacle, mode_name):
        g = grid_2d
        mode = NABLA if mode_name == "nabla" else GradientMode.incremental(2 * g.h)
        phi = unit_obstacle(g)
        for _ in range(10):
            u = 2 * g.h * rng.standard_normal(g.num_nodes)
            G = penalty_deriv_matrix(g, u, phi, mode).toarray()
            assert_allclose(G, G.T, atol=1e-12)
            z = rng.standard_normal(g.num_nodes)
            assert z @ G @ z >= -1e-12 * (z @ z)

    def test_matrix_matches_action(self, grid_2d, rng, unit_obstacle):
        g = grid_2d
        u = 2 * g.h * rng.standard_normal(g.num_nodes)
        v = rng.standard_normal(g.num_nodes)
        G = penalty_deriv_matrix(g, u, unit_obstacle(g), NABLA)
        assert_allclose(G @ v, penalty_deriv_apply(g, u, unit_obstacle(g), NABLA, v), atol=1e-12)


class TestPenaltyEnergy:
    """Test the convex potential of the penalty."""

    def test_hand_case(self, one_node, unit_obstacle):
        assert penalty_energy(one_node, np.array([0.9]), unit_obstacle(one_node), NABLA) == pytest.approx(0.32)

    @pytest.mark.parametrize("d", [1, 2])
    def test_gradient_consistency(self, d, rng):
        g = Grid(d, 7)
        phi = ObstacleField.constant(g, 1.0)
        s = 1e-6
        for _ in range(5):
            u = generic_field(g, phi, NABLA, rng, scale=2 * g.h)
            v = rng.standard_normal(g.num_nodes)
            fd = (penalty_energy(g, u + s * v, phi, NABLA) - penalty_energy(g, u, phi, NABLA)) / s
            exact = penalty_apply(g, u, phi, NABLA) @ v
            assert fd == pytest.approx(exact, rel=1e-4, abs=1e-10)

    def test_convex_along_segments(self, grid_1d, rng, unit_obstacle):
        g = grid_1d
        phi = unit_obstacle(g)
        a = 2 * g.h * rng.standard_normal(g.num_nodes)
        b = 2 * g.h * rng.standard_normal(g.num_nodes)
        mid = penalty_energy(g, 0.5 * (a + b), phi, NABLA)
        ends = 0.5 * (penalty_energy(g, a, phi, NABLA) + penalty_energy(g, b, phi, NABLA))
        assert mid <= ends + 1e-14


def test_feasibility_violation(one_node, unit_obstacle):
    assert feasibility_violation(one_node, np.array([0.9]), unit_obstacle(one_node)) == pytest.approx(0.8)
    assert feasibility_violation(one_node, np.array([0.4]), unit_obstacle(one_node)) == 0.0
