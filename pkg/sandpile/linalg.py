from __future__ import annotations

from typing import Literal

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp
from loguru import logger
from scipy.sparse.linalg import LinearOperator, cg, splu

from sandpile.errors import LinearSolveError

LinearSolver = Literal["direct", "cg"]

REFINEMENT_STEPS = 2
# LU is backward stable; a larger residual on an SPD system means breakdown
DIRECT_RESIDUAL_CAP = 1e-6


def relative_residual(A, x: npt.NDArray[np.float64], b: npt.NDArray[np.float64]) -> float:
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return float(np.linalg.norm(A @ x))
    return float(np.linalg.norm(b - A @ x)) / bnorm


def solve_spd(
    A: sp.spmatrix,
    b: npt.NDArray[np.float64],
    tol: float,
    method: LinearSolver = "direct",
    maxiter: int | None = None,
) -> npt.NDArray[np.float64]:
    """Solve a sparse symmetric positive definite system to relative tolerance tol."""
    if not np.any(b):
        return np.zeros_like(b)
    if method == "direct":
        lu = splu(sp.csc_matrix(A))
        x = lu.solve(b)
        for _ in range(REFINEMENT_STEPS):
            if relative_residual(A, x, b) <= tol:
                break
            x = x + lu.solve(b - A @ x)
    elif method == "cg":
        diag = A.diagonal()
        diag = np.where(diag > 0, diag, 1.0)
        jacobi = LinearOperator(A.shape, matvec=lambda r: r / diag, dtype=np.float64)
        cap = maxiter or 10 * A.shape[0]
        x, info = cg(A, b, rtol=tol, atol=0.0, maxiter=cap, M=jacobi)
        if info > 0:
            achieved = relative_residual(A, x, b)
            logger.error(f"CG stopped after {cap} iterations at residual {achieved:.3e}")
            raise LinearSolveError("CG did not converge within its iteration cap", achieved)
        return x
    else:
        raise ValueError(f"Unknown linear solver {method!r}")

    achieved = relative_residual(A, x, b)
    if not np.isfinite(achieved) or achieved > max(tol, DIRECT_RESIDUAL_CAP):
        raise LinearSolveError(f"{method} solve missed tolerance {tol:.1e}", achieved)
    if achieved > tol:
        logger.debug(f"direct solve residual {achieved:.2e} above {tol:.1e} after refinement")
    return x
