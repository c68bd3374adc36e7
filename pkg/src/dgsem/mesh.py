"""Cartesian meshes, tensor-ordered DOF storage, projections and norms."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .gll import QuadratureBasis


@dataclass(frozen=True)
class Bounds:
    """Admissible solution range [m, M]; M may be None for one-sided bounds."""

    m: float
    M: float | None = None

    def __post_init__(self):
        if self.M is not None and self.m > self.M:
            raise ValueError(f"invalid bounds: m={self.m} > M={self.M}")

    @property
    def upper(self) -> float:
        return np.inf if self.M is None else self.M


@dataclass(frozen=True)
class MeshGrid:
    """Cartesian grid in 1, 2 or 3 dimensions.

    ``cell_sizes[a]`` holds the cell widths along axis a (x first), and
    ``box[a]`` the axis interval.  Cells are indexed with the x index
    varying fastest, matching the flat DOF ordering of FieldState.
    """

    dim: int
    counts: tuple[int, ...]
    cell_sizes: tuple[np.ndarray, ...]
    box: tuple[tuple[float, float], ...]

    @staticmethod
    def uniform(counts: Sequence[int], box: Sequence[tuple[float, float]] | None = None) -> "MeshGrid":
        counts = tuple(int(n) for n in counts)
        dim = len(counts)
        if dim not in (1, 2, 3) or any(n < 1 for n in counts):
            raise ValueError(f"invalid cell counts {counts}")
        if box is None:
            box = [(0.0, 1.0)] * dim
        box = tuple((float(a), float(b)) for a, b in box)
        sizes = tuple(np.full(n, (b - a) / n) for n, (a, b) in zip(counts, box))
        return MeshGrid(dim=dim, counts=counts, cell_sizes=sizes, box=box)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    def edges(self, axis: int) -> np.ndarray:
        a = self.box[axis][0]
        return np.concatenate([[a], a + np.cumsum(self.cell_sizes[axis])])

    def cell_volumes(self) -> np.ndarray:
        """|kappa| per cell, shaped like the cell grid (z, y, x ordering)."""
        vol = self.cell_sizes[0]
        for a in range(1, self.dim):
            vol = np.multiply.outer(self.cell_sizes[a], vol)
        return vol


def quad_points(mesh: MeshGrid, basis: QuadratureBasis, axis: int) -> np.ndarray:
    """Physical quadrature points along one axis, shape (N_axis, p+1)."""
    left = mesh.edges(axis)[:-1]
    return left[:, None] + 0.5 * (1.0 + basis.nodes)[None, :] * mesh.cell_sizes[axis][:, None]


@dataclass
class FieldState:
    """DOF storage for one scalar field on a mesh.

    ``dofs`` is shaped (cells..., nodes...) with cell axes ordered
    (z, y, x) slowest-to-fastest and node axes likewise, so that
    ``dofs.ravel()`` reproduces the flat ordering
    n = k + l*(p+1) + r*(p+1)^2 within a cell, cells with x fastest.
    """

    mesh: MeshGrid
    basis: QuadratureBasis
    dofs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        expected = self.mesh.counts[::-1] + (self.basis.p + 1,) * self.mesh.dim
        if self.dofs.shape != expected:
            raise ValueError(f"dof array shape {self.dofs.shape}, expected {expected}")

    def copy(self) -> "FieldState":
        return replace(self, dofs=self.dofs.copy())

    @property
    def flat(self) -> np.ndarray:
        """Flat DOF view in the documented global ordering."""
        return self.dofs.reshape(self.mesh.n_cells, -1)

    def cell_view(self) -> np.ndarray:
        """(n_cells, (p+1)^dim) view, cells ordered x fastest."""
        return self.flat


def zeros_like_field(mesh: MeshGrid, basis: QuadratureBasis, time: float = 0.0) -> FieldState:
    shape = mesh.counts[::-1] + (basis.p + 1,) * mesh.dim
    return FieldState(mesh=mesh, basis=basis, dofs=np.zeros(shape), time=time)


def project_pointwise(mesh: MeshGrid, basis: QuadratureBasis, f: Callable, time: float = 0.0) -> FieldState:
    """Collocation projection: DOFs are f evaluated at the quadrature points.

    ``f`` takes dim positional arrays (x[, y[, z]]) broadcast together.
    """
    pts = [quad_points(mesh, basis, a) for a in range(mesh.dim)]
    if mesh.dim == 1:
        values = np.asarray(f(pts[0]), dtype=float)
    elif mesh.dim == 2:
        x = pts[0][None, :, None, :]
        y = pts[1][:, None, :, None]
        values = np.asarray(f(x, y), dtype=float)
        values = np.broadcast_to(values, mesh.counts[::-1] + (basis.p + 1,) * 2).copy()
    else:
        x = pts[0][None, None, :, None, None, :]
        y = pts[1][None, :, None, None, :, None]
        z = pts[2][:, None, None, :, None, None]
        values = np.asarray(f(x, y, z), dtype=float)
        values = np.broadcast_to(values, mesh.counts[::-1] + (basis.p + 1,) * 3).copy()
    return FieldState(mesh=mesh, basis=basis, dofs=values, time=time)


def cell_average(state: FieldState) -> np.ndarray:
    """Quadrature-weighted cell means, shaped like the cell grid."""
    w = 0.5 * state.basis.weights
    avg = state.dofs
    for _ in range(state.mesh.dim):
        avg = np.tensordot(avg, w, axes=([-1], [0]))
    return avg


def minmax_dofs(state: FieldState) -> tuple[float, float]:
    return float(state.dofs.min()), float(state.dofs.max())


def minmax_averages(state: FieldState) -> tuple[float, float]:
    avg = cell_average(state)
    return float(avg.min()), float(avg.max())


def _pointwise_exact(state: FieldState, exact: Callable) -> np.ndarray:
    mesh, basis = state.mesh, state.basis
    pts = [quad_points(mesh, basis, a) for a in range(mesh.dim)]
    if mesh.dim == 1:
        return np.asarray(exact(pts[0]), dtype=float)
    if mesh.dim == 2:
        x = pts[0][None, :, None, :]
        y = pts[1][:, None, :, None]
        return np.broadcast_to(np.asarray(exact(x, y), dtype=float), state.dofs.shape)
    x = pts[0][None, None, :, None, None, :]
    y = pts[1][None, :, None, None, :, None]
    z = pts[2][:, None, None, :, None, None]
    return np.broadcast_to(np.asarray(exact(x, y, z), dtype=float), state.dofs.shape)


def error_norms(state: FieldState, exact: Callable) -> tuple[float, float]:
    """Spatial (L2, Linf) errors against a callable exact solution.

    L2 uses the scheme's own Gauss-Lobatto quadrature; Linf is the max
    over quadrature points.  Summation order is fixed for reproducibility.
    """
    diff = state.dofs - _pointwise_exact(state, exact)
    linf = float(np.abs(diff).max())
    w = 0.5 * state.basis.weights
    sq = diff * diff
    for _ in range(state.mesh.dim):
        sq = np.tensordot(sq, w, axes=([-1], [0]))
    total = float((sq * state.mesh.cell_volumes()).sum())
    return float(np.sqrt(total)), linf


@dataclass
class SpaceTimeNorm:
    """Accumulates space-time L2/Linf errors over backward-Euler steps.

    Each accepted step contributes its spatial error at the new time
    weighted by dt (the new state represents the solution on the whole
    step interval for a first-order scheme); Linf is the running max.
    """

    l2_sq: float = 0.0
    linf: float = 0.0
    _steps: int = field(default=0, repr=False)

    def add_step(self, state: FieldState, exact: Callable, dt: float) -> None:
        l2, linf = error_norms(state, exact)
        self.l2_sq += dt * l2 * l2
        self.linf = max(self.linf, linf)
        self._steps += 1

    @property
    def l2(self) -> float:
        return float(np.sqrt(self.l2_sq))


def dump_csv(state: FieldState, path: str) -> None:
    """Write DOFs as CSV rows (cell indices, node indices, coords, value)."""
    mesh, basis = state.mesh, state.basis
    dim = mesh.dim
    names = ["i", "j", "k"][:dim] + ["kx", "ky", "kz"][:dim] + ["x", "y", "z"][:dim] + ["value"]
    pts = [quad_points(mesh, basis, a) for a in range(dim)]
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        it = np.ndindex(state.dofs.shape)
        for idx in it:
            cells = idx[:dim][::-1]
            nodes = idx[dim:][::-1]
            coords = [pts[a][cells[a], nodes[a]] for a in range(dim)]
            row = [str(v + 1) for v in cells + nodes]
            row += [f"{c:.17g}" for c in coords]
            row.append(f"{state.dofs[idx]:.17g}")
            fh.write(",".join(row) + "\n")
