"""Command-line entry point: solve, optimize, verify and make-problem.

Exit codes: 0 ok, 1 failed verification check, 2 usage or config error,
3 solver failure (the report is still written).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, NoReturn

import click
import numpy as np
import pandas as pd
from loguru import logger

from sandpile import __version__
from sandpile.control import optimize
from sandpile.errors import ConfigError, LinearSolveError, NewtonError, PathFollowingError
from sandpile.fields import write_nodal
from sandpile.grid import Grid, NodalField, ObstacleField, cell_average, gradient
from sandpile.logs import init_logging, load_settings
from sandpile.problems import BENCHMARKS, load_benchmark, write_problem
from sandpile.runconfig import FORMAT_VERSION, RunConfig
from sandpile.state_solver import path_follow, solve_state
from sandpile.verification import SUITE_NAMES, run_suites

EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

SOLVER_ERRORS = (NewtonError, PathFollowingError, LinearSolveError)


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with Path.open(path, "w") as f:
        json.dump(payload, f, indent=2, default=float)
        f.write("\n")
    logger.info(f"Wrote {path}")
    return path


def plot_frame(g: Grid, u: NodalField, phi: ObstacleField) -> pd.DataFrame:
    """Cell-centre samples: coordinates, interpolated u, |D_h u| and phi."""
    centres = g.cell_centers()
    columns: dict[str, Any] = {"x": centres[:, 0]}
    if g.d == 2:
        columns["y"] = centres[:, 1]
    columns["u"] = cell_average(g, u)
    columns["grad_norm"] = np.linalg.norm(gradient(g, u), axis=1)
    columns["phi"] = phi.phi
    return pd.DataFrame(columns)


def _fail_config(e: ConfigError, path: Path) -> NoReturn:
    click.echo(f"Error: {path}: {e}", err=True)
    logger.error(f"Invalid config {path}: {e}")
    raise click.exceptions.Exit(EXIT_CONFIG) from e


@click.group()
@click.version_option(version=__version__)
@click.pass_context
def cli(ctx: click.Context):
    """Regularized sandpile solver and source control."""
    settings = load_settings()
    init_logging(settings)
    ctx.obj = settings


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--seed", type=int, default=None)
@click.pass_obj
def solve(settings, config_path: Path, out_dir: Path | None, seed: int | None):
    """Solve the state equation, with path-following when a schedule is given."""
    out = out_dir or Path(settings.OUTPUT_DIR)
    try:
        config = RunConfig.load(config_path)
        g = config.grid()
        f = config.source(g)
        phi = config.obstacle(g)
        u_init = config.initial_state(g)
        params = config.solver_params()
        schedule = config.schedule()
        echo = config.resolved()
    except ConfigError as e:
        _fail_config(e, config_path)

    echo.update(seed=settings.SEED if seed is None else seed)
    payload: dict[str, Any] = {"format_version": FORMAT_VERSION, "config": echo}
    try:
        if schedule is None:
            u, report = solve_state(g, f, phi, params, u_init)
            reports = [report]
        else:
            u, reports = path_follow(g, f, phi, params, schedule, u_init, progress=settings.SHOW_PROGRESS)
    except SOLVER_ERRORS as e:
        report = getattr(e, "report", None)
        payload.update(status="failed", error=str(e), reports=[] if report is None else [report.to_dict()])
        if isinstance(e, PathFollowingError):
            payload["failed_stage"] = e.stage
        write_json(out / "report.json", payload)
        click.echo(f"Error: solver failure: {e}", err=True)
        logger.error(f"Solve failed: {e}")
        raise click.exceptions.Exit(EXIT_SOLVER) from e

    payload.update(status="ok", reports=[r.to_dict() for r in reports])
    write_nodal(out / "u.txt", g, u)
    write_json(out / "report.json", payload)
    if config.plot_data:
        plot_frame(g, u, phi).to_csv(out / "plot.csv", index=False)
        logger.info(f"Wrote {out / 'plot.csv'}")
    click.echo(f"Solved on {g.d}D grid n={g.n}: residual {reports[-1].final_residual:.3e}, outputs in {out}")


@cli.command("optimize")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--seed", type=int, default=None)
@click.pass_obj
def optimize_cmd(settings, config_path: Path, out_dir: Path | None, seed: int | None):
    """Fit the source f so that the pile tracks the target u_d."""
    out = out_dir or Path(settings.OUTPUT_DIR)
    try:
        config = RunConfig.load(config_path)
        g = config.grid()
        phi = config.obstacle(g)
        sparams = config.solver_params()
        cparams = config.control_params(g)
        f_init = config.initial_control(g)
        basis = config.basis(g)
        echo = config.resolved()
    except ConfigError as e:
        _fail_config(e, config_path)

    echo.update(seed=settings.SEED if seed is None else seed)
    payload: dict[str, Any] = {"format_version": FORMAT_VERSION, "config": echo}
    try:
        result = optimize(g, f_init, phi, cparams, sparams, basis)
    except SOLVER_ERRORS as e:
        payload.update(status="failed", error=str(e))
        write_json(out / "trace.json", payload)
        click.echo(f"Error: solver failure: {e}", err=True)
        logger.error(f"Optimization failed: {e}")
        raise click.exceptions.Exit(EXIT_SOLVER) from e

    payload.update(result.to_dict())
    write_nodal(out / "f.txt", g, result.f)
    write_nodal(out / "u.txt", g, result.u)
    write_json(out / "trace.json", payload)
    if config.plot_data:
        plot_frame(g, result.u, phi).to_csv(out / "plot.csv", index=False)
    click.echo(f"Optimization {result.status}: j={result.trace[-1].j:.6e}, outputs in {out}")


@cli.command()
@click.argument("suite", type=click.Choice(["all", *SUITE_NAMES]), default="all")
@click.option("--config", "config_path", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--threads", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=None)
@click.pass_obj
def verify(settings, suite: str, config_path: Path | None, out_dir: Path | None, threads: int | None, seed: int | None):
    """Run the property suites and write verdict.json."""
    out = out_dir or Path(settings.OUTPUT_DIR)
    echo: dict[str, Any] = {"format_version": FORMAT_VERSION}
    if config_path is not None:
        try:
            config = RunConfig.load(config_path, require_problem=False)
        except ConfigError as e:
            _fail_config(e, config_path)
        echo = {"format_version": FORMAT_VERSION, **config.data}
        seed = seed if seed is not None else config.get("verify", "seed")
        threads = threads or config.get("verify", "threads")
    seed = settings.SEED if seed is None else seed
    threads = threads or settings.THREADS

    verdict = run_suites(suite, seed=seed, threads=threads, progress=settings.SHOW_PROGRESS)
    write_json(
        out / "verdict.json",
        {"format_version": FORMAT_VERSION, "config": {**echo, "suite": suite, "seed": seed, "threads": threads}, **verdict.to_dict()},
    )
    for check in verdict.checks:
        if not check.asserted:
            mark = "recorded"
        else:
            mark = "ok" if check.passed else "FAIL"
        click.echo(f"[{mark:>8}] {check.suite}/{check.name}: {check.value!r} {check.relation} {check.threshold!r}")
    if not verdict.passed:
        raise click.exceptions.Exit(EXIT_CHECK_FAILED)


@cli.command("make-problem")
@click.argument("name", type=click.Choice(["all", *BENCHMARKS]), default="all")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
def make_problem(settings, name: str, out_dir: Path | None):
    """Write benchmark configs and their f, phi (and u_d) fields."""
    out = out_dir or Path(settings.OUTPUT_DIR)
    names = BENCHMARKS if name == "all" else (name,)
    for benchmark in names:
        written = write_problem(load_benchmark(benchmark), out)
        click.echo(f"{benchmark}: {', '.join(str(p) for p in written)}")


if __name__ == "__main__":
    cli()
