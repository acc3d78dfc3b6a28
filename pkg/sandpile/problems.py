"""Frozen benchmark problems and the files `sandpile make-problem` writes."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from loguru import logger

from sandpile.fields import write_cells, write_nodal
from sandpile.grid import Grid, NodalField, ObstacleField, stiffness_apply
from sandpile.state_solver import Schedule, SolverParams, path_follow

BENCHMARK_EPS = 0.05
TRACKING_LAMBDA = 1e-6
TRACKING_GAMMA = 1e3
BENCHMARKS = ("bench-1d", "bench-2d", "source-1d", "tracking-1d")


@dataclass(frozen=True)
class Problem:
    name: str
    grid: Grid
    eps: float
    f: NodalField
    phi: ObstacleField
    u_d: NodalField | None = None
    lam: float = 0.0


def support_source(g: Grid, source: NodalField, u0: NodalField, eps: float) -> NodalField:
    """f = g + eps Lap_h u0 for a pile fed by `source` on the support u0.

    The state solved with this f is the surface minus u0.
    """
    laplacian = -stiffness_apply(g, 1.0, u0) / g.cell_volume
    return g.check_nodal(source, "source") + eps * laplacian


def paraboloid(g: Grid, height: float = 0.25) -> NodalField:
    """Surface vanishing on the boundary, peaking at the centre."""
    x = g.node_coordinates()
    return height * (4.0**g.d) * np.prod(x * (1.0 - x), axis=1)


def centred_bump(g: Grid, amplitude: float, width: float = 0.1) -> NodalField:
    x = g.node_coordinates()
    r2 = np.sum((x - 0.5) ** 2, axis=1)
    return amplitude * np.exp(-r2 / (2.0 * width**2))


def benchmark_1d() -> Problem:
    g = Grid(1, 63)
    return Problem("bench-1d", g, BENCHMARK_EPS, np.full(g.num_nodes, 5.0), ObstacleField.constant(g, 1.0))


def benchmark_2d() -> Problem:
    g = Grid(2, 31)
    return Problem("bench-2d", g, BENCHMARK_EPS, np.full(g.num_nodes, 8.0), ObstacleField.constant(g, 1.0))


def source_variant_1d() -> Problem:
    g = Grid(1, 63)
    f = support_source(g, np.full(g.num_nodes, 2.0), paraboloid(g), BENCHMARK_EPS)
    return Problem("source-1d", g, BENCHMARK_EPS, f, ObstacleField.constant(g, 1.0))


def tracking_target(
    g: Grid, phi: ObstacleField, eps: float, amplitude: float = 10.0
) -> NodalField:
    """Pile grown by a centred source at the end of the gamma path."""
    params = SolverParams(eps=eps, gamma=TRACKING_GAMMA)
    gammas = tuple(x for x in Schedule().gammas if x < TRACKING_GAMMA) + (TRACKING_GAMMA,)
    u, _ = path_follow(g, centred_bump(g, amplitude), phi, params, Schedule(gammas))
    return u


def tracking_1d(n: int = 31) -> Problem:
    g = Grid(1, n)
    phi = ObstacleField.constant(g, 1.0)
    u_d = tracking_target(g, phi, BENCHMARK_EPS)
    return Problem("tracking-1d", g, BENCHMARK_EPS, g.zeros(), phi, u_d, TRACKING_LAMBDA)


def load_benchmark(name: str) -> Problem:
    builders = {
        "bench-1d": benchmark_1d,
        "bench-2d": benchmark_2d,
        "source-1d": source_variant_1d,
        "tracking-1d": tracking_1d,
    }
    if name not in builders:
        raise KeyError(f"Unknown benchmark {name!r}; choose from {', '.join(BENCHMARKS)}")
    return builders[name]()


def config_text(problem: Problem) -> str:
    """Run config for a benchmark whose fields sit next to it."""
    g = problem.grid
    lines = [
        "format_version = 1",
        "",
        "[problem]",
        f"d = {g.d}",
        f"n = {g.n}",
        f"eps = {problem.eps!r}",
        'f_file = "f.txt"',
        'phi_file = "phi.txt"',
        f"nu = {problem.phi.nu!r}",
        "",
        "[solver]",
        "gamma = 10000.0" if problem.u_d is None else f"gamma = {TRACKING_GAMMA!r}",
        "tol_res = 1e-10",
        "max_iter = 25",
        'damping = "armijo"',
        "",
        "[schedule]",
    ]
    gammas = list(Schedule().gammas)
    if problem.u_d is not None:
        gammas = [x for x in gammas if x <= TRACKING_GAMMA]
    lines.append(f"gammas = [{', '.join(repr(x) for x in gammas)}]")
    if problem.u_d is not None:
        lines += [
            "",
            "[control]",
            'u_d_file = "u_d.txt"',
            f"lambda = {problem.lam!r}",
            "max_outer = 50",
            "tol_grad = 1e-8",
        ]
    lines += ["", "[output]", "plot_data = true", ""]
    return "\n".join(lines)


def write_problem(problem: Problem, out_dir: Path | str) -> list[Path]:
    out = Path(out_dir) / problem.name
    out.mkdir(parents=True, exist_ok=True)
    written = [
        write_nodal(out / "f.txt", problem.grid, problem.f),
        write_cells(out / "phi.txt", problem.grid, problem.phi.phi),
    ]
    if problem.u_d is not None:
        written.append(write_nodal(out / "u_d.txt", problem.grid, problem.u_d))
    config = out / "config.toml"
    config.write_text(config_text(problem))
    written.append(config)
    logger.info(f"Wrote benchmark {problem.name} to {out}")
    return written
