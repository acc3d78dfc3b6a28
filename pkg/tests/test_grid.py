import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sandpile.errors import GridError
from sandpile.grid import (
    Grid,
    GradientMode,
    ObstacleField,
    cell_average,
    dual_h1_norm,
    gradient,
    gradient_adjoint,
    h1_norm,
    incremental_gradient,
    incremental_gradient_adjoint,
    norms,
    stiffness_apply,
)


class TestGrid:
    """Test grid construction and field validation."""

    def test_spacing_and_sizes(self):
        g = Grid(2, 3)
        assert g.h == 0.25
        assert g.num_nodes == 9
        assert g.num_cells == 16
        assert g.cell_volume == 0.0625

    @pytest.mark.parametrize(("d", "n"), [(3, 4), (0, 4), (1, 0)])
    def test_rejects_invalid_grids(self, d, n):
        with pytest.raises(GridError):
            Grid(d, n)

    def test_node_coordinates_are_interior(self, grid_2d):
        x = grid_2d.node_coordinates()
        assert x.shape == (49, 2)
        assert np.all((x > 0) & (x < 1))
        # axis 0 is x, so x varies slowest
        assert_allclose(x[:2], [[0.125, 0.125], [0.125, 0.25]])

    def test_check_nodal_rejects_wrong_shape(self, grid_1d):
        with pytest.raises(GridError, match="shape"):
            grid_1d.check_nodal(np.zeros(14))

    def test_check_nodal_rejects_non_finite(self, grid_1d):
        u = grid_1d.zeros()
        u[3] = np.nan
        with pytest.raises(GridError, match="non-finite"):
            grid_1d.check_nodal(u)

    def test_mu_must_be_multiple_of_h(self):
        g = Grid(1, 3)
        assert g.mu_steps(0.5) == 2
        with pytest.raises(GridError, match="multiple"):
            g.mu_steps(0.3)

    @pytest.mark.parametrize("mu", [math.inf, math.nan])
    def test_mu_steps_rejects_non_finite(self, mu):
        with pytest.raises(GridError, match="multiple"):
            Grid(1, 3).mu_steps(mu)

    def test_coercivity_constant_1d(self, grid_1d):
        h = grid_1d.h
        expected = 4.0 / h**2 * math.sin(math.pi * h / 2) ** 2
        assert grid_1d.coercivity_constant() == pytest.approx(expected, rel=1e-10)


class TestGradient:
    """Test the discrete gradient D_h and its weighted adjoint."""

    def test_hat_slopes(self, one_node):
        assert_allclose(gradient(one_node, np.array([0.9])), [[1.8], [-1.8]])

    def test_zero_field(self, grid_2d):
        assert_array_equal(gradient(grid_2d, grid_2d.zeros()), np.zeros((64, 2)))

    def test_bilinear_cell_centres_2d(self):
        g = Grid(2, 1)
        Du = gradient(g, np.array([1.0]))
        assert_allclose(np.linalg.norm(Du, axis=1), np.full(4, math.sqrt(0.5) / g.h))
        assert_allclose(Du, [[1, 1], [1, -1], [-1, 1], [-1, -1]])

    def test_adjoint_hand_case(self, one_node):
        assert_allclose(gradient_adjoint(one_node, np.array([[0.8], [-0.8]])), [1.6])

    @pytest.mark.parametrize("d", [1, 2])
    def test_adjoint_identity(self, d, rng):
        g = Grid(d, 7)
        v = rng.standard_normal(g.num_nodes)
        z = rng.standard_normal((g.num_cells, d))
        lhs = gradient_adjoint(g, z) @ v
        rhs = g.cell_volume * np.sum(z * gradient(g, v))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestIncrementalGradient:
    """Test the incremental quotient D_mu."""

    def test_hand_case(self):
        g = Grid(1, 3)
        Du = incremental_gradient(g, np.array([0.0, 1.0, 0.0]), 0.25)
        assert_allclose(Du[:, 0], [2.0, 0.0, -2.0, 0.0])

    def test_zero_field(self, grid_2d):
        assert not np.any(incremental_gradient(grid_2d, grid_2d.zeros(), 2 * grid_2d.h))

    def test_rejects_non_multiple(self, grid_1d):
        with pytest.raises(GridError):
            incremental_gradient(grid_1d, grid_1d.zeros(), 0.1)

    def test_rejects_non_positive_mu(self):
        with pytest.raises(GridError):
            GradientMode.incremental(0.0)

    @pytest.mark.parametrize(("d", "k"), [(1, 1), (1, 4), (2, 1), (2, 3)])
    def test_sup_bound(self, d, k, rng):
        g = Grid(d, 7)
        mu = k * g.h
        for _ in range(10):
            u = rng.standard_normal(g.num_nodes)
            Du = incremental_gradient(g, u, mu)
            assert np.max(np.abs(Du)) <= (2 / mu) * np.max(np.abs(u)) * (1 + 1e-12)

    @pytest.mark.parametrize(("d", "k"), [(1, 1), (1, 3), (2, 2)])
    def test_adjoint_identity(self, d, k, rng):
        g = Grid(d, 7)
        mu = k * g.h
        v = rng.standard_normal(g.num_nodes)
        z = rng.standard_normal((g.num_cells, d))
        lhs = incremental_gradient_adjoint(g, z, mu) @ v
        rhs = g.cell_volume * np.sum(z * incremental_gradient(g, v, mu))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_hand_case_adjoint_is_transpose(self):
        g = Grid(1, 3)
        z = np.array([[1.0], [0.0], [0.0], [0.0]])
        # the first quotient only reads node 1, through the centre of the second cell
        assert_allclose(incremental_gradient_adjoint(g, z, 0.25), g.cell_volume * np.array([0.0, 2.0, 0.0]))


class TestStiffness:
    """Test the stiffness action eps D_h^T W D_h."""

    def test_single_hat(self, one_node):
        assert_allclose(stiffness_apply(one_node, 1.0, np.array([1.0])), [4.0])

    def test_tridiagonal_pattern(self):
        g = Grid(1, 5)
        L = g.stiffness_matrix().toarray()
        expected = (2 * np.eye(5) - np.eye(5, k=1) - np.eye(5, k=-1)) / g.h
        assert_allclose(L, expected, atol=1e-12)

    def test_matches_gradient_composition(self, grid_2d, rng):
        u = rng.standard_normal(grid_2d.num_nodes)
        assert_allclose(
            stiffness_apply(grid_2d, 0.3, u), 0.3 * gradient_adjoint(grid_2d, gradient(grid_2d, u)), rtol=1e-12
        )

    def test_symmetric_positive_definite(self, grid_2d):
        L = grid_2d.stiffness_matrix().toarray()
        assert_allclose(L, L.T, atol=1e-12)
        assert np.linalg.eigvalsh(L)[0] > 0


class TestNorms:
    """Test the l2, h1 and dual h1 norms."""

    def test_zero(self, grid_1d):
        result = norms(grid_1d, grid_1d.zeros())
        assert (result.l2, result.h1, result.dual_h1) == (0.0, 0.0, 0.0)

    def test_single_hat(self, one_node):
        result = norms(one_node, np.array([1.0]))
        assert result.l2 == pytest.approx(math.sqrt(0.5))
        assert result.h1 == pytest.approx(2.0)

    @pytest.mark.parametrize("d", [1, 2])
    def test_dual_of_stiffness_is_h1(self, d, rng):
        g = Grid(d, 7)
        u = rng.standard_normal(g.num_nodes)
        assert dual_h1_norm(g, stiffness_apply(g, 1.0, u)) == pytest.approx(h1_norm(g, u), rel=1e-10)


class TestObstacleField:
    """Test slope bounds."""

    def test_rejects_phi_below_nu(self, grid_1d):
        with pytest.raises(GridError):
            ObstacleField(grid_1d, np.full(grid_1d.num_cells, 0.5), 1.0)

    def test_rejects_non_positive_nu(self, grid_1d):
        with pytest.raises(GridError):
            ObstacleField(grid_1d, np.full(grid_1d.num_cells, 0.5), 0.0)

    def test_from_angle(self, grid_1d):
        phi = ObstacleField.from_angle(grid_1d, 45.0)
        assert_allclose(phi.phi, 1.0)

    def test_from_angle_out_of_range(self, grid_1d):
        with pytest.raises(GridError):
            ObstacleField.from_angle(grid_1d, 90.0)

    def test_two_materials(self, grid_1d):
        phi = ObstacleField.two_materials(grid_1d, 0.5, 2.0)
        x = grid_1d.cell_centers()[:, 0]
        assert np.all(phi.phi[x < 0.5] == 0.5)
        assert np.all(phi.phi[x > 0.5] == 2.0)
        assert phi.nu == 0.5


def test_cell_average_of_constant_interior(grid_2d):
    avg = cell_average(grid_2d, np.ones(grid_2d.num_nodes)).reshape(grid_2d.cell_shape)
    assert_allclose(avg[1:-1, 1:-1], 1.0)
    assert_allclose(avg[0, 0], 0.25)
