"""Linearized state equation: (eps A + gamma G_P(u)) w = h^d h_dir.

The operator is symmetric, so the same solve serves as the adjoint
equation of the control problem.
"""

from __future__ import annotations

from sandpile.grid import Grid, NodalField, ObstacleField, mass_weighted
from sandpile.linalg import solve_spd
from sandpile.state_solver import SolverParams, newton_matrix


def solve_sensitivity(
    g: Grid,
    u: NodalField,
    h_dir: NodalField,
    phi: ObstacleField,
    params: SolverParams,
) -> NodalField:
    """Newton derivative of f -> u(f) at the state u, applied to h_dir."""
    S = newton_matrix(g, g.check_nodal(u, "state"), phi, params)
    return solve_spd(S, mass_weighted(g, h_dir), params.tol_lin, params.linear_solver)


def solve_adjoint(
    g: Grid,
    u: NodalField,
    rhs: NodalField,
    phi: ObstacleField,
    params: SolverParams,
) -> NodalField:
    return solve_sensitivity(g, u, rhs, phi, params)
