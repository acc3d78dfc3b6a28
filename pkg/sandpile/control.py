"""Source control: minimize j(f) = 1/2 |u(f) - u_d|^2 + lambda |f|^2 (both l2).

The reduced gradient is the l2 Riesz representative p + 2 lambda f, with p
the adjoint state solving the linearized equation for u(f) - u_d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
from loguru import logger

from sandpile.errors import NewtonError
from sandpile.grid import Grid, NodalField, ObstacleField, l2_inner, l2_norm
from sandpile.sensitivity import solve_adjoint
from sandpile.state_solver import DEFAULT_GAMMAS, Schedule, SolverParams, path_follow, solve_state

Descent = Literal["armijo", "fixed"]
Status = Literal["converged", "max_outer", "line_search_failed"]


@dataclass(frozen=True)
class ControlParams:
    u_d: NodalField
    lam: float = 0.0
    descent: Descent = "armijo"
    step: float = 1.0
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 30
    max_outer: int = 100
    tol_grad: float = 1e-8
    barzilai_borwein: bool = True

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if not (self.tol_grad > 0 and self.step > 0):
            raise ValueError("tol_grad and step must be positive")
        if self.descent not in ("armijo", "fixed"):
            raise ValueError(f"Unknown descent {self.descent!r}")
        if not 0 < self.backtrack < 1:
            raise ValueError(f"backtrack factor must lie in (0, 1), got {self.backtrack}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda": self.lam,
            "descent": self.descent,
            "step": self.step,
            "c1": self.c1,
            "backtrack": self.backtrack,
            "max_backtracks": self.max_backtracks,
            "max_outer": self.max_outer,
            "tol_grad": self.tol_grad,
            "barzilai_borwein": self.barzilai_borwein,
        }


class ReducedProblem:
    """j(f) with the state map evaluated through warm-started Newton solves."""

    def __init__(
        self, g: Grid, phi: ObstacleField, cparams: ControlParams, sparams: SolverParams
    ):
        self.g = g
        self.phi = phi
        self.cparams = cparams
        self.sparams = sparams
        self.u_d = g.check_nodal(cparams.u_d, "target")
        self.state_solves = 0
        self._last: tuple[NodalField, NodalField] | None = None

    def state(self, f: NodalField) -> NodalField:
        if self._last is not None and np.array_equal(self._last[0], f):
            return self._last[1]
        warm = None if self._last is None else self._last[1]
        try:
            u, _ = solve_state(self.g, f, self.phi, self.sparams, warm)
        except NewtonError:
            # lost the Newton basin: reach gamma again by continuation from zero
            gammas = tuple(x for x in DEFAULT_GAMMAS if x < self.sparams.gamma)
            logger.warning(f"Warm start failed, continuing over gammas {gammas}")
            u, _ = path_follow(
                self.g, f, self.phi, self.sparams, Schedule((*gammas, self.sparams.gamma))
            )
        self.state_solves += 1
        self._last = (f.copy(), u)
        return u

    def objective(self, f: NodalField) -> float:
        u = self.state(f)
        misfit = u - self.u_d
        return 0.5 * l2_inner(self.g, misfit, misfit) + self.cparams.lam * l2_inner(self.g, f, f)

    def gradient(self, f: NodalField) -> NodalField:
        u = self.state(f)
        p = solve_adjoint(self.g, u, u - self.u_d, self.phi, self.sparams)
        return p + 2.0 * self.cparams.lam * f


def objective(
    g: Grid, f: NodalField, phi: ObstacleField, cparams: ControlParams, sparams: SolverParams
) -> float:
    return ReducedProblem(g, phi, cparams, sparams).objective(g.check_nodal(f, "control"))


def reduced_gradient(
    g: Grid, f: NodalField, phi: ObstacleField, cparams: ControlParams, sparams: SolverParams
) -> NodalField:
    return ReducedProblem(g, phi, cparams, sparams).gradient(g.check_nodal(f, "control"))


@dataclass(frozen=True)
class SourceBasis:
    """Controls f = sum_k c_k psi_k with Gaussian bumps psi_k at fixed locations."""

    grid: Grid
    centers: npt.NDArray[np.float64]
    width: float = 0.1
    matrix: npt.NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        if centers.shape[1] != self.grid.d:
            raise ValueError(f"centers must have {self.grid.d} coordinates each")
        x = self.grid.node_coordinates()
        dist2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "matrix", np.exp(-dist2 / (2.0 * self.width**2)))

    @property
    def size(self) -> int:
        return self.matrix.shape[1]

    def expand(self, coeffs: npt.NDArray[np.float64]) -> NodalField:
        return self.matrix @ coeffs

    def pullback(self, grad: NodalField) -> npt.NDArray[np.float64]:
        """Euclidean gradient in the coefficients of an l2 gradient field."""
        return self.grid.cell_volume * (self.matrix.T @ grad)


@dataclass
class OuterRecord:
    iteration: int
    j: float
    grad_norm: float
    step: float
    backtracks: int = 0


@dataclass
class OptimizationResult:
    f: NodalField
    u: NodalField
    trace: list[OuterRecord]
    status: Status
    coefficients: npt.NDArray[np.float64] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "trace": [vars(r) for r in self.trace],
            "coefficients": None if self.coefficients is None else self.coefficients.tolist(),
        }


def optimize(
    g: Grid,
    f_init: NodalField,
    phi: ObstacleField,
    cparams: ControlParams,
    sparams: SolverParams,
    basis: SourceBasis | None = None,
) -> OptimizationResult:
    """Armijo steepest descent on j, in the nodal l2 metric or on basis coefficients.

    Trial steps start from the Barzilai-Borwein length when enabled.
    """
    problem = ReducedProblem(g, phi, cparams, sparams)

    if basis is None:
        x = g.check_nodal(f_init, "initial control").copy()

        def to_field(c):
            return c

        def pull(grad):
            return grad

        def inner(a, b):
            return l2_inner(g, a, b)

    else:
        x = np.linalg.lstsq(basis.matrix, g.check_nodal(f_init), rcond=None)[0]
        to_field, pull = basis.expand, basis.pullback

        def inner(a, b):
            return float(np.dot(a, b))

    j = problem.objective(to_field(x))
    grad = pull(problem.gradient(to_field(x)))
    gnorm = math.sqrt(max(inner(grad, grad), 0.0))
    trace = [OuterRecord(0, j, gnorm, 0.0)]
    status: Status = "max_outer"
    t = cparams.step
    previous: tuple[Any, Any] | None = None

    for k in range(1, cparams.max_outer + 1):
        if gnorm <= cparams.tol_grad:
            status = "converged"
            break
        if cparams.barzilai_borwein and previous is not None:
            s, y = x - previous[0], grad - previous[1]
            sy = inner(s, y)
            if sy > 0:
                t = inner(s, s) / sy
        if cparams.descent == "fixed":
            t = cparams.step

        backtracks = 0
        while True:
            x_trial = x - t * grad
            j_trial = problem.objective(to_field(x_trial))
            if cparams.descent == "fixed":
                break
            if j_trial < j and j_trial <= j - cparams.c1 * t * gnorm**2:
                break
            backtracks += 1
            if backtracks > cparams.max_backtracks:
                break
            t *= cparams.backtrack
        if backtracks > cparams.max_backtracks:
            logger.warning(f"Line search failed at outer iteration {k}, keeping best iterate")
            status = "line_search_failed"
            break

        previous = (x, grad)
        x, j = x_trial, j_trial
        grad = pull(problem.gradient(to_field(x)))
        gnorm = math.sqrt(max(inner(grad, grad), 0.0))
        trace.append(OuterRecord(k, j, gnorm, t, backtracks))
        logger.debug(f"outer {k}: j={j:.6e} |grad|={gnorm:.3e} step={t:.3e}")
    else:
        if gnorm <= cparams.tol_grad:
            status = "converged"

    f = to_field(x)
    u = problem.state(f)
    logger.info(
        f"Optimization {status} after {len(trace) - 1} steps: j={j:.6e}, "
        f"|grad|={gnorm:.3e}, |f|_l2={l2_norm(g, f):.3e}, {problem.state_solves} state solves"
    )
    return OptimizationResult(
        f=f, u=u, trace=trace, status=status, coefficients=None if basis is None else x
    )
