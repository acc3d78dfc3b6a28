import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sandpile.grid import Grid, ObstacleField
from sandpile.problems import (
    BENCHMARKS,
    benchmark_1d,
    centred_bump,
    load_benchmark,
    paraboloid,
    support_source,
    write_problem,
)
from sandpile.runconfig import RunConfig
from sandpile.state_solver import SolverParams, solve_state


class TestSurfaces:
    """Test the analytic surfaces used by the benchmarks."""

    def test_paraboloid_peak(self, grid_2d):
        u = paraboloid(grid_2d).reshape(grid_2d.node_shape)
        assert u[3, 3] == pytest.approx(0.25)
        assert np.all(u > 0)

    def test_bump_peak(self, grid_1d):
        assert np.max(centred_bump(grid_1d, 3.0)) == pytest.approx(3.0)

    def test_support_source_of_flat_surface(self, grid_1d):
        source = np.full(grid_1d.num_nodes, 2.0)
        assert_array_equal(support_source(grid_1d, source, grid_1d.zeros(), 0.05), source)

    def test_support_source_without_feed(self, grid_1d):
        u0 = paraboloid(grid_1d)
        f = support_source(grid_1d, grid_1d.zeros(), u0, 0.05)
        # discrete Laplacian of x(1 - x) is exactly -2
        assert_allclose(f, -0.1, atol=1e-12)
        # u is measured from the support: with no feed the layer is -u0
        u, _ = solve_state(grid_1d, f, ObstacleField.constant(grid_1d, 2.0), SolverParams(eps=0.05, gamma=0.0))
        assert_allclose(u, -u0, atol=1e-12)


class TestBenchmarks:
    """Test benchmark construction and the files written for them."""

    def test_benchmark_1d(self):
        problem = benchmark_1d()
        assert problem.grid == Grid(1, 63)
        assert_array_equal(problem.f, 5.0)
        assert problem.u_d is None

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            load_benchmark("bench-3d")

    def test_names(self):
        assert set(BENCHMARKS) == {"bench-1d", "bench-2d", "source-1d", "tracking-1d"}

    def test_written_config_loads(self, tmp_path):
        problem = benchmark_1d()
        written = write_problem(problem, tmp_path)
        assert [p.name for p in written] == ["f.txt", "phi.txt", "config.toml"]
        config = RunConfig.load(tmp_path / "bench-1d" / "config.toml")
        g = config.grid()
        assert_array_equal(config.source(g), problem.f)
        assert_array_equal(config.obstacle(g).phi, problem.phi.phi)
        assert config.schedule().gammas[-1] == 1e4
        assert config.plot_data
