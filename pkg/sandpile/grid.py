"""Uniform grids on the unit interval/square with zero Dirichlet boundary.

Nodal fields are flat float arrays of length n^d (row-major, axis 0 is x).
Cell fields are arrays of shape ((n+1)^d, d), one d-vector per cell
sampled at the cell centre. Every operator is a sparse matrix built once
per grid and cached on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

from sandpile.errors import GridError

NodalField = npt.NDArray[np.float64]
CellVectorField = npt.NDArray[np.float64]

GradientKind = Literal["nabla", "incremental"]

# relative slack when deciding that mu is a multiple of h
MU_MULTIPLE_TOL = 1e-9


@dataclass(frozen=True)
class GradientMode:
    """Which discrete gradient feeds the penalty: D_h itself or D_mu."""

    kind: GradientKind = "nabla"
    mu: float | None = None

    def __post_init__(self):
        if self.kind not in ("nabla", "incremental"):
            raise GridError(f"Unknown gradient mode {self.kind!r}")
        if self.kind == "incremental" and (self.mu is None or not self.mu > 0):
            raise GridError(f"Incremental gradient needs a positive mu, got {self.mu}")

    @classmethod
    def nabla(cls) -> GradientMode:
        return cls("nabla", None)

    @classmethod
    def incremental(cls, mu: float) -> GradientMode:
        return cls("incremental", float(mu))

    @property
    def label(self) -> str:
        return "nabla" if self.kind == "nabla" else f"D_mu(mu={self.mu:g})"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "mu": self.mu}


@dataclass(frozen=True)
class Grid:
    d: int
    n: int
    _cache: dict[Any, Any] = field(
        default_factory=dict, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        if self.d not in (1, 2):
            raise GridError(f"Only d = 1 or d = 2 is supported, got d = {self.d}")
        if self.n < 1:
            raise GridError(f"Need at least one interior node per axis, got n = {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def num_nodes(self) -> int:
        return self.n**self.d

    @property
    def num_cells(self) -> int:
        return (self.n + 1) ** self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def node_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return (self.n + 1,) * self.d

    def node_coordinates(self) -> npt.NDArray[np.float64]:
        """Coordinates of the interior nodes, shape (n^d, d)."""
        axis = self.h * np.arange(1, self.n + 1)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_centers(self) -> npt.NDArray[np.float64]:
        axis = self.h * (np.arange(self.n + 1) + 0.5)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def zeros(self) -> NodalField:
        return np.zeros(self.num_nodes)

    def check_nodal(self, u: npt.ArrayLike, name: str = "field") -> NodalField:
        arr = np.asarray(u, dtype=np.float64)
        if arr.shape == self.node_shape and self.d == 2:
            arr = arr.ravel()
        if arr.shape != (self.num_nodes,):
            raise GridError(
                f"{name} has shape {arr.shape}, expected ({self.num_nodes},) on {self}"
            )
        if not np.all(np.isfinite(arr)):
            raise GridError(f"{name} has non-finite entries")
        return arr

    def check_cells(self, z: npt.ArrayLike, name: str = "cell field") -> CellVectorField:
        arr = np.asarray(z, dtype=np.float64)
        if arr.shape != (self.num_cells, self.d):
            raise GridError(
                f"{name} has shape {arr.shape}, expected ({self.num_cells}, {self.d})"
            )
        if not np.all(np.isfinite(arr)):
            raise GridError(f"{name} has non-finite entries")
        return arr

    def mu_steps(self, mu: float) -> int:
        """Number of cells spanned by an incremental quotient of width mu."""
        ratio = mu / self.h
        k = round(ratio) if math.isfinite(ratio) else 0
        if k < 1 or abs(ratio - k) > MU_MULTIPLE_TOL * max(1.0, ratio):
            raise GridError(f"mu = {mu!r} is not a positive integer multiple of h = {self.h!r}")
        return k

    def operator(self, mode: GradientMode) -> sp.csr_matrix:
        """Sparse matrix of D (shape d*cells x nodes), component-major rows."""
        if mode.kind == "nabla":
            return self._cached(("D", 0), self._build_gradient)
        k = self.mu_steps(mode.mu or 0.0)
        return self._cached(("D", k), lambda: self._build_incremental(k, mode.mu))

    def stiffness_matrix(self) -> sp.csc_matrix:
        """D_h^T W D_h with W = h^d id (the discrete -Laplacian, load scaling)."""

        def build():
            D = self.operator(GradientMode.nabla())
            return (self.cell_volume * (D.T @ D)).tocsc()

        return self._cached("stiffness", build)

    def stiffness_factor(self):
        return self._cached("stiffness_lu", lambda: splu(self.stiffness_matrix()))

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def _axis_matrices(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        n, h = self.n, self.h
        ones = np.ones(n)
        diff = sp.diags([-ones, ones], [-1, 0], shape=(n + 1, n)) / h
        avg = 0.5 * sp.diags([ones, ones], [-1, 0], shape=(n + 1, n))
        return diff.tocsr(), avg.tocsr()

    def _build_gradient(self) -> sp.csr_matrix:
        diff, avg = self._axis_matrices()
        if self.d == 1:
            return diff
        # gradient of the bilinear interpolant at the cell centre
        return sp.vstack([sp.kron(diff, avg), sp.kron(avg, diff)]).tocsr()

    def _build_incremental(self, k: int, mu: float) -> sp.csr_matrix:
        _, avg = self._axis_matrices()
        cells = self.n + 1
        # centre value of the cell k steps ahead; zero once it leaves the domain
        shift = sp.eye(cells, k=k, format="csr")
        quotient = ((shift - sp.eye(cells, format="csr")) @ avg) / mu
        if self.d == 1:
            return quotient.tocsr()
        return sp.vstack([sp.kron(quotient, avg), sp.kron(avg, quotient)]).tocsr()

    def coercivity_constant(self) -> float:
        """Smallest c with <D_h^T W D_h u, u> >= c h^d |u|^2 for all u."""

        def compute():
            L = self.stiffness_matrix()
            if self.num_nodes <= 256:
                smallest = sla.eigvalsh(L.toarray())[0]
            else:
                smallest = eigsh(L, k=1, sigma=0.0, which="LM", return_eigenvectors=False)[0]
            return float(smallest) / self.cell_volume

        return self._cached("coercivity", compute)

    def to_dict(self) -> dict[str, Any]:
        return {"d": self.d, "n": self.n, "h": self.h}


@dataclass(frozen=True)
class ObstacleField:
    """Per-cell slope bound phi with phi >= nu > 0."""

    grid: Grid
    phi: npt.NDArray[np.float64]
    nu: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        if phi.shape != (self.grid.num_cells,):
            raise GridError(f"phi has shape {phi.shape}, expected ({self.grid.num_cells},)")
        if not self.nu > 0:
            raise GridError(f"nu must be strictly positive, got {self.nu}")
        if not np.all(np.isfinite(phi)) or np.any(phi < self.nu):
            raise GridError(f"phi must be finite and bounded below by nu = {self.nu}")
        object.__setattr__(self, "phi", phi)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> ObstacleField:
        return cls(grid, np.full(grid.num_cells, float(value)), float(value))

    @classmethod
    def from_angle(cls, grid: Grid, alpha_degrees: float) -> ObstacleField:
        """Homogeneous pile with angle of repose alpha: phi = tan(alpha)."""
        if not 0 < alpha_degrees < 90:
            raise GridError(f"angle of repose must lie in (0, 90) degrees, got {alpha_degrees}")
        return cls.constant(grid, math.tan(math.radians(alpha_degrees)))

    @classmethod
    def two_materials(
        cls, grid: Grid, phi_left: float, phi_right: float, split: float = 0.5
    ) -> ObstacleField:
        """Inhomogeneous pile: material boundary at x = split."""
        x = grid.cell_centers()[:, 0]
        phi = np.where(x < split, float(phi_left), float(phi_right))
        return cls(grid, phi, float(min(phi_left, phi_right)))


@dataclass(frozen=True)
class Norms:
    l2: float
    h1: float
    dual_h1: float


def gradient(g: Grid, u: NodalField) -> CellVectorField:
    return apply_operator(g, u, GradientMode.nabla())


def gradient_adjoint(g: Grid, z: CellVectorField) -> NodalField:
    return apply_operator_adjoint(g, z, GradientMode.nabla())


def incremental_gradient(g: Grid, u: NodalField, mu: float) -> CellVectorField:
    return apply_operator(g, u, GradientMode.incremental(mu))


def incremental_gradient_adjoint(g: Grid, z: CellVectorField, mu: float) -> NodalField:
    return apply_operator_adjoint(g, z, GradientMode.incremental(mu))


def apply_operator(g: Grid, u: NodalField, mode: GradientMode) -> CellVectorField:
    u = g.check_nodal(u)
    flat = g.operator(mode) @ u
    return flat.reshape(g.d, g.num_cells).T.copy()


def apply_operator_adjoint(g: Grid, z: CellVectorField, mode: GradientMode) -> NodalField:
    """D^T W z, the transpose with respect to the cell weights h^d."""
    z = g.check_cells(z)
    return g.cell_volume * (g.operator(mode).T @ z.T.ravel())


def stiffness_apply(g: Grid, eps: float, u: NodalField) -> NodalField:
    return eps * (g.stiffness_matrix() @ g.check_nodal(u))


def mass_weighted(g: Grid, f: NodalField) -> NodalField:
    """Load vector of nodal source samples."""
    return g.cell_volume * g.check_nodal(f, "source")


def l2_inner(g: Grid, u: NodalField, v: NodalField) -> float:
    return float(g.cell_volume * np.dot(u, v))


def l2_norm(g: Grid, u: NodalField) -> float:
    return math.sqrt(max(l2_inner(g, u, u), 0.0))


def h1_norm(g: Grid, u: NodalField) -> float:
    Du = gradient(g, u)
    return math.sqrt(g.cell_volume * float(np.sum(Du * Du)))


def dual_h1_norm(g: Grid, r: NodalField) -> float:
    """<r, (D_h^T W D_h)^{-1} r>^{1/2} for a load-scaled r."""
    r = g.check_nodal(r)
    if not np.any(r):
        return 0.0
    return math.sqrt(max(float(np.dot(r, g.stiffness_factor().solve(r))), 0.0))


def norms(g: Grid, u: NodalField) -> Norms:
    return Norms(l2=l2_norm(g, u), h1=h1_norm(g, u), dual_h1=dual_h1_norm(g, u))


def cell_average(g: Grid, u: NodalField) -> NodalField:
    """Interpolant of u evaluated at the cell centres (for plot data)."""
    _, avg = g._axis_matrices()
    C = avg if g.d == 1 else sp.kron(avg, avg)
    return C @ g.check_nodal(u)
