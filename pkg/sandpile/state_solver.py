"""Semismooth Newton for -eps Lap u + gamma P(u) = f with (gamma, mu) continuation."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
import scipy.sparse as sp
from loguru import logger
from tqdm import tqdm

from sandpile.errors import LinearSolveError, NewtonError, PathFollowingError
from sandpile.grid import (
    Grid,
    GradientMode,
    NodalField,
    ObstacleField,
    dual_h1_norm,
    h1_norm,
    l2_norm,
    mass_weighted,
    stiffness_apply,
)
from sandpile.linalg import LinearSolver, solve_spd
from sandpile.penalty import (
    feasibility_violation,
    penalty_apply,
    penalty_deriv_matrix,
    penalty_energy,
)

DEFAULT_GAMMAS = (1.0, 10.0, 100.0, 1e3, 1e4)
# merit differences below this relative level are roundoff
MERIT_SLACK = 1e-12
COLD_START_MAX_ITER = 200


@dataclass(frozen=True)
class Armijo:
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 30

    def __post_init__(self):
        if not 0 < self.c1 < 1 or not 0 < self.backtrack < 1 or self.max_backtracks < 0:
            raise ValueError(f"Invalid Armijo parameters {self}")


@dataclass(frozen=True)
class SolverParams:
    eps: float
    gamma: float
    mode: GradientMode = field(default_factory=GradientMode.nabla)
    tol_res: float = 1e-10
    max_iter: int = 25
    tol_lin: float = 1e-10
    damping: Armijo | None = field(default_factory=Armijo)
    linear_solver: LinearSolver = "direct"

    def __post_init__(self):
        if not 0 < self.eps < np.inf:
            raise ValueError(f"eps must be positive and finite, got {self.eps}")
        if not 0 <= self.gamma < np.inf:
            raise ValueError(f"gamma must be non-negative and finite, got {self.gamma}")
        if not (self.tol_res > 0 and self.tol_lin > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")

    def for_stage(self, gamma: float, mu: float | None) -> SolverParams:
        mode = self.mode if mu is None else GradientMode.incremental(mu)
        return replace(self, gamma=gamma, mode=mode)

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "gamma": self.gamma,
            "mode": self.mode.to_dict(),
            "tol_res": self.tol_res,
            "max_iter": self.max_iter,
            "tol_lin": self.tol_lin,
            "damping": None if self.damping is None else asdict(self.damping),
            "linear_solver": self.linear_solver,
        }


@dataclass
class RunReport:
    grid: dict[str, Any]
    params: dict[str, Any]
    residual_l2: list[float] = field(default_factory=list)
    residual_dual: list[float] = field(default_factory=list)
    feasibility: list[float] = field(default_factory=list)
    merit: list[float] = field(default_factory=list)
    step_h1: list[float] = field(default_factory=list)
    step_bound: list[float] = field(default_factory=list)
    step_length: list[float] = field(default_factory=list)
    contraction: list[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    stage: int | None = None
    violation_h: float | None = None
    increment_h1: float | None = None

    @property
    def iterations(self) -> int:
        return len(self.step_h1)

    @property
    def final_residual(self) -> float:
        return self.residual_dual[-1] if self.residual_dual else float("nan")

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["iterations"] = self.iterations
        return out


@dataclass(frozen=True)
class Schedule:
    gammas: tuple[float, ...] = DEFAULT_GAMMAS
    mus: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.gammas:
            raise ValueError("schedule needs at least one gamma")
        if any(b < a for a, b in zip(self.gammas, self.gammas[1:], strict=False)):
            raise ValueError(f"gammas must be ascending, got {self.gammas}")
        if self.mus is not None:
            if len(self.mus) != len(self.gammas):
                raise ValueError("mus and gammas must have the same length")
            if any(b > a for a, b in zip(self.mus, self.mus[1:], strict=False)):
                raise ValueError(f"mus must be descending, got {self.mus}")

    def stages(self) -> list[tuple[float, float | None]]:
        mus = self.mus if self.mus is not None else (None,) * len(self.gammas)
        return list(zip(self.gammas, mus, strict=True))

    def to_dict(self) -> dict[str, Any]:
        return {"gammas": list(self.gammas), "mus": None if self.mus is None else list(self.mus)}


def residual(
    g: Grid, u: NodalField, f: NodalField, phi: ObstacleField, params: SolverParams
) -> NodalField:
    """E(u) = eps A u + gamma P(u) - h^d f, in load (dual) scaling."""
    E = stiffness_apply(g, params.eps, u) - mass_weighted(g, f)
    if params.gamma:
        E += params.gamma * penalty_apply(g, u, phi, params.mode)
    return E


def merit(
    g: Grid, u: NodalField, f: NodalField, phi: ObstacleField, params: SolverParams
) -> float:
    """Convex energy whose gradient is E."""
    value = 0.5 * params.eps * float(u @ (g.stiffness_matrix() @ u))
    value -= float(mass_weighted(g, f) @ u)
    if params.gamma:
        value += params.gamma * penalty_energy(g, u, phi, params.mode)
    return value


def newton_matrix(
    g: Grid, u: NodalField, phi: ObstacleField, params: SolverParams
) -> sp.csr_matrix:
    """eps D_h^T W D_h + gamma G_P(u); symmetric positive definite."""
    S = params.eps * g.stiffness_matrix()
    if params.gamma:
        S = S + params.gamma * penalty_deriv_matrix(g, u, phi, params.mode)
    return sp.csr_matrix(S)


def newton_step(
    g: Grid,
    u: NodalField,
    f: NodalField,
    phi: ObstacleField,
    params: SolverParams,
    E: NodalField | None = None,
) -> NodalField:
    if E is None:
        E = residual(g, u, f, phi, params)
    return solve_spd(
        newton_matrix(g, u, phi, params), -E, params.tol_lin, params.linear_solver
    )


def _line_search(
    g: Grid,
    u: NodalField,
    v: NodalField,
    E: NodalField,
    f: NodalField,
    phi: ObstacleField,
    params: SolverParams,
    report: RunReport,
) -> float:
    armijo = params.damping or Armijo()
    m0 = merit(g, u, f, phi, params)
    slope = float(E @ v)
    slack = MERIT_SLACK * max(1.0, abs(m0))
    t = 1.0
    for _ in range(armijo.max_backtracks + 1):
        if merit(g, u + t * v, f, phi, params) <= m0 + armijo.c1 * t * slope + slack:
            return t
        t *= armijo.backtrack
    logger.warning(f"Armijo backtracking failed after {armijo.max_backtracks} reductions")
    raise NewtonError("line search failed to decrease the merit function", report)


def solve_state(
    g: Grid,
    f: NodalField,
    phi: ObstacleField,
    params: SolverParams,
    u_init: NodalField | None = None,
) -> tuple[NodalField, RunReport]:
    """Damped semismooth Newton from u_init (zero when omitted).

    The default iteration cap fits warm starts along a gamma path. Starts far
    from the solution with saturated cells take short Armijo steps; give them
    `max_iter=COLD_START_MAX_ITER`.
    """
    start = time.perf_counter()
    f = g.check_nodal(f, "source")
    u = g.zeros() if u_init is None else g.check_nodal(u_init, "initial state").copy()
    report = RunReport(grid=g.to_dict(), params=params.to_dict())
    iterates = [u.copy()]

    def record(E: NodalField):
        report.residual_l2.append(l2_norm(g, E))
        report.residual_dual.append(dual_h1_norm(g, E))
        report.feasibility.append(feasibility_violation(g, u, phi, params.mode))
        report.merit.append(merit(g, u, f, phi, params))

    E = residual(g, u, f, phi, params)
    record(E)
    for iteration in range(params.max_iter + 1):
        if report.residual_dual[-1] <= params.tol_res:
            report.converged = True
            break
        if iteration == params.max_iter:
            break
        try:
            v = newton_step(g, u, f, phi, params, E)
        except LinearSolveError as e:
            report.wall_time = time.perf_counter() - start
            raise NewtonError(f"inner solve failed at iteration {iteration}: {e}", report) from e

        step = h1_norm(g, v)
        report.step_h1.append(step)
        bound = report.residual_dual[-1] / params.eps
        report.step_bound.append(step / bound if bound > 0 else 0.0)

        t = 1.0
        if params.damping is not None:
            try:
                t = _line_search(g, u, v, E, f, phi, params, report)
            except NewtonError:
                report.wall_time = time.perf_counter() - start
                raise
        report.step_length.append(t)
        u = u + t * v
        iterates.append(u.copy())
        E = residual(g, u, f, phi, params)
        record(E)
        logger.debug(
            f"newton {iteration + 1}: |E|_dual={report.residual_dual[-1]:.3e} "
            f"|v|_h1={step:.3e} t={t:g}"
        )

    report.wall_time = time.perf_counter() - start
    errors = [h1_norm(g, w - u) for w in iterates]
    report.contraction = [b / a for a, b in zip(errors, errors[1:], strict=False) if a > 0]
    if not report.converged:
        logger.error(
            f"Newton stopped after {params.max_iter} iterations at residual "
            f"{report.final_residual:.3e} (gamma={params.gamma:g})"
        )
        raise NewtonError(
            f"no convergence within {params.max_iter} iterations "
            f"(residual {report.final_residual:.3e} > {params.tol_res:.1e})",
            report,
        )
    logger.info(
        f"State solve converged in {report.iterations} iterations "
        f"(gamma={params.gamma:g}, {params.mode.label}, residual {report.final_residual:.2e})"
    )
    return u, report


def path_follow(
    g: Grid,
    f: NodalField,
    phi: ObstacleField,
    base_params: SolverParams,
    schedule: Schedule,
    u_init: NodalField | None = None,
    progress: bool = False,
) -> tuple[NodalField, list[RunReport]]:
    """Solve along the schedule, warm-starting every stage from the previous one."""
    u = u_init
    reports: list[RunReport] = []
    for stage, (gamma, mu) in enumerate(
        tqdm(schedule.stages(), desc="path-following", disable=not progress)
    ):
        params = base_params.for_stage(gamma, mu)
        logger.info(f"Stage {stage}: gamma={gamma:g}, {params.mode.label}")
        try:
            u_next, report = solve_state(g, f, phi, params, u)
        except NewtonError as e:
            e.report.stage = stage
            raise PathFollowingError(stage, gamma, mu, e.report, str(e)) from e
        except LinearSolveError as e:
            raise PathFollowingError(stage, gamma, mu, None, str(e)) from e
        report.stage = stage
        report.violation_h = feasibility_violation(g, u_next, phi)
        if u is not None:
            report.increment_h1 = h1_norm(g, u_next - u)
        reports.append(report)
        u = u_next
    logger.info(
        f"Path-following finished: {len(reports)} stages, "
        f"final violation {reports[-1].violation_h:.2e}"
    )
    return np.asarray(u), reports
