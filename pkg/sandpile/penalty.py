"""Penalty for the slope constraint |Du| <= phi and its Newton derivative.

Per cell, P(v) = b(v) v/|v| with b(v) = clamp(|v| - phi) and clamp the
projection onto [0, 1]. The assembled operator is D^T W P(Du); it is the
gradient of the convex energy sum_c h^d K(|Du|_c - phi_c).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp

from sandpile.grid import (
    CellVectorField,
    Grid,
    GradientMode,
    NodalField,
    ObstacleField,
    apply_operator,
    apply_operator_adjoint,
)


class Regime(StrEnum):
    INACTIVE = "inactive"
    RAMP = "ramp"
    SATURATED = "saturated"


def clamp_pm(t):
    return np.minimum(1.0, np.maximum(0.0, t))


def clamp_pm_deriv(t):
    """Indicator of the open interval (0, 1); the kinks get 0."""
    t = np.asarray(t)
    out = ((t > 0.0) & (t < 1.0)).astype(np.float64)
    return float(out) if out.ndim == 0 else out


def clamp_potential(t):
    """K(t): antiderivative of clamp_pm, zero for t < 0."""
    t = np.asarray(t, dtype=np.float64)
    out = np.where(t < 0.0, 0.0, np.where(t <= 1.0, 0.5 * t * t, t - 0.5))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PenaltyPointJet:
    value: npt.NDArray[np.float64]
    deriv: npt.NDArray[np.float64]
    regime: Regime


def point_jet(v: npt.ArrayLike, phi_c: float) -> PenaltyPointJet:
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    jets = penalty_jets(v[None, :], np.array([phi_c]))
    return PenaltyPointJet(jets.values[0], jets.derivs[0], jets.regimes()[0])


@dataclass(frozen=True)
class PenaltyJets:
    """Cellwise P(Du) and G_P(Du)."""

    values: CellVectorField
    derivs: npt.NDArray[np.float64]
    slack: npt.NDArray[np.float64]  # |Du| - phi

    def regimes(self) -> list[Regime]:
        out = []
        for t in self.slack:
            if t <= 0.0:
                out.append(Regime.INACTIVE)
            elif t < 1.0:
                out.append(Regime.RAMP)
            else:
                out.append(Regime.SATURATED)
        return out

    @property
    def active(self) -> npt.NDArray[np.bool_]:
        return self.slack > 0.0


def penalty_jets(Z: CellVectorField, phi: npt.NDArray[np.float64]) -> PenaltyJets:
    num, d = Z.shape
    norm = np.sqrt(np.einsum("ci,ci->c", Z, Z))
    slack = norm - phi
    values = np.zeros((num, d))
    derivs = np.zeros((num, d, d))
    # b > 0 forces |v| >= phi >= nu > 0, so the division below is safe
    active = slack > 0.0
    if np.any(active):
        r = norm[active]
        q = Z[active] / r[:, None]
        b = clamp_pm(slack[active])
        chi = clamp_pm_deriv(slack[active])
        qqT = q[:, :, None] * q[:, None, :]
        values[active] = b[:, None] * q
        derivs[active] = chi[:, None, None] * qqT + (b / r)[:, None, None] * (
            np.eye(d)[None, :, :] - qqT
        )
    return PenaltyJets(values, derivs, slack)


def jets_for(g: Grid, u: NodalField, phi: ObstacleField, mode: GradientMode) -> PenaltyJets:
    return penalty_jets(apply_operator(g, u, mode), phi.phi)


def penalty_apply(
    g: Grid, u: NodalField, phi: ObstacleField, mode: GradientMode
) -> NodalField:
    jets = jets_for(g, u, phi, mode)
    if not np.any(jets.active):
        return g.zeros()
    return apply_operator_adjoint(g, jets.values, mode)


def penalty_deriv_apply(
    g: Grid, u: NodalField, phi: ObstacleField, mode: GradientMode, v: NodalField
) -> NodalField:
    jets = jets_for(g, u, phi, mode)
    if not np.any(jets.active):
        return g.zeros()
    Dv = apply_operator(g, v, mode)
    return apply_operator_adjoint(g, np.einsum("cij,cj->ci", jets.derivs, Dv), mode)


def penalty_deriv_matrix(
    g: Grid, u: NodalField, phi: ObstacleField, mode: GradientMode
) -> sp.csr_matrix:
    """Assembled G_P(u) = D^T W G_P(Du) D as a sparse symmetric matrix."""
    jets = jets_for(g, u, phi, mode)
    return assemble_jets(g, jets, mode)


def assemble_jets(g: Grid, jets: PenaltyJets, mode: GradientMode) -> sp.csr_matrix:
    D = g.operator(mode)
    blocks = [
        [sp.diags(jets.derivs[:, i, j]) for j in range(g.d)] for i in range(g.d)
    ]
    middle = sp.bmat(blocks, format="csr")
    return (g.cell_volume * (D.T @ middle @ D)).tocsr()


def penalty_energy(
    g: Grid, u: NodalField, phi: ObstacleField, mode: GradientMode
) -> float:
    Du = apply_operator(g, u, mode)
    slack = np.linalg.norm(Du, axis=1) - phi.phi
    return float(g.cell_volume * np.sum(clamp_potential(slack)))


def feasibility_violation(
    g: Grid, u: NodalField, phi: ObstacleField, mode: GradientMode | None = None
) -> float:
    """max over cells of (|Du| - phi)^+; D_h unless a mode is given."""
    Du = apply_operator(g, u, mode or GradientMode.nabla())
    slack = np.linalg.norm(Du, axis=1) - phi.phi
    return float(max(np.max(slack), 0.0))
