"""Independent references for the property suites.

ADMM for the gradient-constrained variational inequality, dense
factorizations on small grids, Newton-remainder probes and central
finite differences.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.linalg as sla
from loguru import logger
from scipy.sparse.linalg import splu
from tqdm import tqdm

from sandpile.errors import AdmmError, DenseSolveError
from sandpile.grid import (
    Grid,
    GradientMode,
    NodalField,
    ObstacleField,
    apply_operator,
    mass_weighted,
    stiffness_apply,
)
from sandpile.penalty import penalty_apply, penalty_deriv_apply
from sandpile.state_solver import SolverParams, newton_matrix

DENSE_LIMIT = 4096
# distance from the clamp kinks {0, 1} that makes a point generic
KINK_MARGIN = 1e-3


@dataclass(frozen=True)
class AdmmParams:
    rho: float | None = None
    max_iter: int = 50_000
    tol_primal: float = 1e-9
    tol_dual: float = 1e-9
    rebalance_every: int = 50
    progress: bool = False


@dataclass
class AdmmResult:
    u: NodalField
    iterations: int
    rho: float
    primal: float
    dual: float
    history: list[dict[str, Any]] = field(default_factory=list)


def run_admm(
    g: Grid, f: NodalField, phi: ObstacleField, eps: float, params: AdmmParams | None = None
) -> AdmmResult:
    """min 1/2 eps |z|_W^2 - <f, u>  s.t.  z = D_h u, |z_c| <= phi_c (scaled ADMM)."""
    params = params or AdmmParams()
    load = mass_weighted(g, f)
    D = g.operator(GradientMode.nabla())
    L = g.stiffness_matrix()
    w = g.cell_volume
    rho = params.rho if params.rho is not None else eps / g.h
    factor = splu(((eps + rho) * L).tocsc())

    u = g.zeros()
    z = np.zeros(D.shape[0])
    y = np.zeros(D.shape[0])
    history: list[dict[str, Any]] = []
    primal = dual = math.inf

    for it in tqdm(range(1, params.max_iter + 1), desc="admm", disable=not params.progress):
        u = factor.solve(load + rho * w * (D.T @ (z - y)))
        Du = D @ u
        z_old = z
        v = (Du + y).reshape(g.d, g.num_cells)
        length = np.sqrt(np.sum(v * v, axis=0))
        scale = np.minimum(1.0, phi.phi / np.maximum(length, np.finfo(float).tiny))
        z = (v * scale).ravel()
        y = y + Du - z

        primal = math.sqrt(w) * float(np.linalg.norm(Du - z))
        dual = rho * math.sqrt(w) * float(np.linalg.norm(z - z_old))
        if it % params.rebalance_every == 0 or it == 1:
            history.append({"iteration": it, "primal": primal, "dual": dual, "rho": rho})
        if primal <= params.tol_primal and dual <= params.tol_dual:
            history.append({"iteration": it, "primal": primal, "dual": dual, "rho": rho})
            logger.info(f"ADMM converged in {it} iterations (rho={rho:g})")
            return AdmmResult(u, it, rho, primal, dual, history)

        if it % params.rebalance_every == 0:
            if primal > 10 * dual:
                rho, y = 2 * rho, y / 2
            elif dual > 10 * primal:
                rho, y = rho / 2, 2 * y
            else:
                continue
            factor = splu(((eps + rho) * L).tocsc())

    logger.error(f"ADMM stopped after {params.max_iter} iterations: primal={primal:.2e} dual={dual:.2e}")
    raise AdmmError(f"ADMM did not converge in {params.max_iter} iterations", history)


def vi_solve_admm(
    g: Grid, f: NodalField, phi: ObstacleField, eps: float, params: AdmmParams | None = None
) -> NodalField:
    return run_admm(g, f, phi, eps, params).u


def dense_matrix(apply: Callable[[NodalField], NodalField], size: int) -> npt.NDArray[np.float64]:
    """Assemble a matrix-free operator column by column."""
    if size > DENSE_LIMIT:
        raise DenseSolveError(f"dense oracle limited to {DENSE_LIMIT} unknowns, got {size}")
    columns = []
    for i in range(size):
        e = np.zeros(size)
        e[i] = 1.0
        columns.append(apply(e))
    return np.column_stack(columns)


def dense_solve(
    operator: Callable[[NodalField], NodalField] | npt.NDArray[np.float64],
    rhs: npt.ArrayLike,
) -> NodalField:
    b = np.asarray(rhs, dtype=np.float64)
    A = operator if isinstance(operator, np.ndarray) else dense_matrix(operator, b.size)
    try:
        lu, piv = sla.lu_factor(A, check_finite=True)
    except (ValueError, sla.LinAlgError) as e:
        raise DenseSolveError(f"dense factorization failed: {e}") from e
    if np.any(np.diag(lu) == 0.0):
        raise DenseSolveError("dense operator is singular")
    return sla.lu_solve((lu, piv), b)


def dense_poisson(g: Grid, f: NodalField, eps: float) -> NodalField:
    """Reference for gamma = 0: eps D_h^T W D_h u = h^d f."""
    return dense_solve(lambda v: stiffness_apply(g, eps, v), mass_weighted(g, f))


def dense_newton_matrix(
    g: Grid, u: NodalField, phi: ObstacleField, params: SolverParams
) -> npt.NDArray[np.float64]:
    def apply(v):
        out = stiffness_apply(g, params.eps, v)
        if params.gamma:
            out += params.gamma * penalty_deriv_apply(g, u, phi, params.mode, v)
        return out

    return dense_matrix(apply, g.num_nodes)


def newton_ratio_probe(
    F: Callable[[Any], Any],
    G_F: Callable[[Any, Any], Any],
    base: Any,
    direction: Any,
    scales: Sequence[float],
    norm_num: Callable[[Any], float] | None = None,
    norm_den: Callable[[Any], float] | None = None,
) -> list[tuple[float, float]]:
    """ratio(s) = |F(u+sh) - F(u) - G_F(u+sh)(sh)| / (s |h|), G_F at the shifted point."""
    if any(s <= 0 for s in scales) or any(b >= a for a, b in zip(scales, scales[1:], strict=False)):
        raise ValueError("scales must be positive and strictly decreasing")
    norm_num = norm_num or (lambda x: float(np.linalg.norm(x)))
    norm_den = norm_den or norm_num
    F0 = F(base)
    hnorm = norm_den(direction)
    out = []
    for s in scales:
        shifted = base + s * direction
        remainder = F(shifted) - F0 - G_F(shifted, s * direction)
        out.append((float(s), norm_num(remainder) / (s * hnorm)))
    return out


def fd_directional(
    j: Callable[[Any], float], f: Any, direction: Any, s: float
) -> float:
    if not s > 0:
        raise ValueError(f"finite-difference step must be positive, got {s}")
    return (j(f + s * direction) - j(f - s * direction)) / (2.0 * s)


def kink_distance(slack: npt.NDArray[np.float64]) -> float:
    """Smallest distance of |Du| - phi to the clamp kinks 0 and 1."""
    return float(np.min(np.minimum(np.abs(slack), np.abs(slack - 1.0))))


def slack_of(g: Grid, u: NodalField, phi: ObstacleField, mode: GradientMode):
    return np.linalg.norm(apply_operator(g, u, mode), axis=1) - phi.phi


def generic_field(
    g: Grid,
    phi: ObstacleField,
    mode: GradientMode,
    rng: np.random.Generator,
    scale: float,
    margin: float = KINK_MARGIN,
    attempts: int = 200,
) -> NodalField:
    """Random nodal field whose slopes keep away from the clamp kinks."""
    for _ in range(attempts):
        u = scale * rng.standard_normal(g.num_nodes)
        if kink_distance(slack_of(g, u, phi, mode)) >= margin:
            return u
    raise RuntimeError(f"no kink-avoiding field found in {attempts} draws")


def monotonicity_gap(
    g: Grid, phi: ObstacleField, mode: GradientMode, u1: NodalField, u2: NodalField
) -> float:
    """<P(u1) - P(u2), u1 - u2>, non-negative for a monotone penalty."""
    diff = penalty_apply(g, u1, phi, mode) - penalty_apply(g, u2, phi, mode)
    return float(diff @ (u1 - u2))


def inherited_coercivity_probe(
    g: Grid,
    u: NodalField,
    phi: ObstacleField,
    params: SolverParams,
    rng: np.random.Generator,
    samples: int = 20,
) -> float:
    """min over random h of <G_E(u)h, h> / (eps c_h h^d |h|^2); at least 1 when coercive."""
    S = newton_matrix(g, u, phi, params)
    c_h = g.coercivity_constant()
    worst = math.inf
    for _ in range(samples):
        h = rng.standard_normal(g.num_nodes)
        quotient = float(h @ (S @ h)) / (params.eps * c_h * g.cell_volume * float(h @ h))
        worst = min(worst, quotient)
    return worst
