"""Backward-Euler DGSEM in three space dimensions.

Same structure as the 2D solver with triple tensor products: diagonal
blocks factor through R (x) R (x) R, graph viscosity adds a rank-3(p+1)^2
Woodbury correction, and the flux-corrected blend runs over the six
neighbors.  Meant for property runs on small meshes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bounds import d_min
from .gll import QuadratureBasis
from .limiters import fct_blend, scaling_limit
from .mesh import Bounds, FieldState, MeshGrid, cell_average, quad_points
from .spectral import NumericError, cached_factor, real_cast


@dataclass(frozen=True)
class SchemeConfig3D:
    """3D step configuration; see the 2D variant for field semantics."""

    velocity: tuple[float, float, float]
    dt: float
    bc: str = "periodic"
    inflow_data: Callable | tuple | None = None
    reaction: float = 0.0
    source: Callable | None = None
    limiter: str | None = None
    bounds: Bounds | None = None
    d: float | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if any(c < 0 for c in self.velocity):
            raise ValueError("negative velocities: revert the axis instead")
        if self.bc not in ("periodic", "inflow"):
            raise ValueError(f"unknown bc {self.bc!r}")
        if self.limiter not in (None, "scaling", "fct"):
            raise ValueError(f"unknown limiter mode {self.limiter!r}")
        if self.limiter is not None and self.bounds is None:
            raise ValueError("limiter requires bounds")

    def lam(self, mesh: MeshGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.velocity[a] * self.dt / mesh.cell_sizes[a] for a in range(3))


def config_for_lambda_3d(mesh: MeshGrid, lam: tuple[float, float, float], **kwargs) -> SchemeConfig3D:
    dx = float(mesh.cell_sizes[0][0])
    dt = lam[0] * dx
    vel = tuple(lam[a] * float(mesh.cell_sizes[a][0]) / dt for a in range(3))
    return SchemeConfig3D(velocity=vel, dt=dt, **kwargs)


class DiagBlockFactor3D:
    """Solver for one diagonal block L_3d^(v) (M (x) M (x) M).

    Cell arrays are shaped [z-node, y-node, x-node]; the x eigenvalue
    pairs with the fastest index.
    """

    def __init__(self, basis: QuadratureBasis, lam_x: float, lam_y: float, lam_z: float,
                 d: float = 0.0, shift: float = 0.0):
        if lam_x + lam_y + lam_z <= 0:
            raise ValueError("lam_x + lam_y + lam_z must be positive")
        if d < 0:
            raise ValueError("graph-viscosity coefficient must be nonnegative")
        self.basis = basis
        self.lams = (float(lam_x), float(lam_y), float(lam_z))
        self.d = float(d)
        self.shift = float(shift)
        factor = cached_factor(basis.p)
        self.factor = factor
        psi = factor.psi
        lam = sum(self.lams)
        self.psi3d = (1.0 + self.shift + 2.0 * self.d * lam
                      - 2.0 * (lam_x * psi[None, None, :]
                               + lam_y * psi[None, :, None]
                               + lam_z * psi[:, None, None]))
        if np.any(np.abs(self.psi3d) < 1e-13):
            raise NumericError("singular tensor-product diagonal")
        self.inv_psi3d = 1.0 / self.psi3d
        if self.d > 0.0:
            self._build_woodbury()

    def _transform(self, cell: np.ndarray, mat: np.ndarray) -> np.ndarray:
        """(mat (x) mat (x) mat) applied to a [z, y, x] cell array."""
        out = np.einsum("ab,zyb->zya", mat, cell)
        out = np.einsum("ab,zbx->zax", mat, out)
        return np.einsum("ab,byx->ayx", mat, out)

    def _diag_solve(self, cell: np.ndarray) -> np.ndarray:
        f = self.factor
        t = self._transform(cell.astype(complex), f.Rinv)
        t *= self.inv_psi3d
        return self._transform(t, f.R)

    def _build_woodbury(self):
        basis, factor = self.basis, self.factor
        n = basis.p + 1
        wvec = 0.5 * basis.weights
        rw = factor.Rinv @ wvec
        npc = n * n
        z = np.empty((n**3, 3 * npc), dtype=complex)
        lam_x, lam_y, lam_z = self.lams
        # U_v columns: x block e_a (x) e_b (x) wvec, y block e_a (x) wvec (x) e_b,
        # z block wvec (x) e_a (x) e_b  (a, b transverse node indices)
        for a in range(n):
            for b in range(n):
                col = a * n + b
                tx = self.inv_psi3d * (factor.Rinv[:, a][:, None, None]
                                       * factor.Rinv[:, b][None, :, None]
                                       * rw[None, None, :])
                z[:, col] = self._transform(tx, factor.R).ravel() * (2.0 * self.d * lam_x)
                ty = self.inv_psi3d * (factor.Rinv[:, a][:, None, None]
                                       * rw[None, :, None]
                                       * factor.Rinv[:, b][None, None, :])
                z[:, npc + col] = self._transform(ty, factor.R).ravel() * (2.0 * self.d * lam_y)
                tz = self.inv_psi3d * (rw[:, None, None]
                                       * factor.Rinv[:, a][None, :, None]
                                       * factor.Rinv[:, b][None, None, :])
                z[:, 2 * npc + col] = self._transform(tz, factor.R).ravel() * (2.0 * self.d * lam_z)
        self.zmat = real_cast(z, "3D graph-viscosity correction")
        vtz = np.empty((3 * npc, 3 * npc))
        for c in range(3 * npc):
            cell = self.zmat[:, c].reshape(n, n, n)
            vtz[:npc, c] = cell.sum(axis=2).ravel()       # (z, y) pairs
            vtz[npc:2 * npc, c] = cell.sum(axis=1).ravel()  # (z, x)
            vtz[2 * npc:, c] = cell.sum(axis=0).ravel()     # (y, x)
        small = np.eye(3 * npc) - vtz
        if not np.isfinite(small).all() or np.linalg.cond(small) > 1e13:
            raise NumericError("singular Woodbury system in 3D graph-viscosity block")
        self.small_inv = np.linalg.inv(small)

    def _solve_once(self, cell: np.ndarray) -> np.ndarray:
        n = self.basis.p + 1
        if self.d == 0.0:
            y = real_cast(self._diag_solve(cell), "3D block solve")
        else:
            y0 = real_cast(self._diag_solve(cell), "3D diagonal solve")
            vty = np.concatenate([y0.sum(axis=2).ravel(),
                                  y0.sum(axis=1).ravel(),
                                  y0.sum(axis=0).ravel()])
            zcoef = self.small_inv @ vty
            y = y0 + (self.zmat @ zcoef).reshape(n, n, n)
        mass3 = (self.basis.mass[:, None, None]
                 * self.basis.mass[None, :, None]
                 * self.basis.mass[None, None, :])
        return y / mass3

    def solve(self, rhs: np.ndarray, refine: int = 1) -> np.ndarray:
        n = self.basis.p + 1
        shape = rhs.shape
        b = rhs.reshape(n, n, n)
        x = self._solve_once(b)
        for _ in range(refine):
            r = b - self.apply(x)
            x = x + self._solve_once(r)
        return x.reshape(shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        basis = self.basis
        p = basis.p
        lam_x, lam_y, lam_z = self.lams
        mass3 = (basis.mass[:, None, None] * basis.mass[None, :, None]
                 * basis.mass[None, None, :])
        mx = x * mass3
        cx = basis.D.T * basis.weights[None, :]
        cx[p, p] -= 1.0
        out = (1.0 + self.shift) * mx
        out -= lam_x * (np.einsum("ab,zyb->zya", cx, x)
                        * basis.mass[:, None, None] * basis.mass[None, :, None])
        out -= lam_y * (np.einsum("ab,zbx->zax", cx, x)
                        * basis.mass[:, None, None] * basis.mass[None, None, :])
        out -= lam_z * (np.einsum("ab,byx->ayx", cx, x)
                        * basis.mass[None, :, None] * basis.mass[None, None, :])
        if self.d > 0.0:
            lam = sum(self.lams)
            wvec = 0.5 * basis.weights
            out += 2.0 * self.d * lam * mx
            sx = mx.sum(axis=2)
            sy = mx.sum(axis=1)
            sz = mx.sum(axis=0)
            out -= 2.0 * self.d * (lam_x * sx[:, :, None] * wvec[None, None, :]
                                   + lam_y * sy[:, None, :] * wvec[None, :, None]
                                   + lam_z * sz[None, :, :] * wvec[:, None, None])
        return out


def _source_rhs_3d(state: FieldState, cfg: SchemeConfig3D) -> np.ndarray:
    u = state.dofs
    basis = state.basis
    if cfg.source is not None:
        mesh = state.mesh
        px = quad_points(mesh, basis, 0)
        py = quad_points(mesh, basis, 1)
        pz = quad_points(mesh, basis, 2)
        x = px[None, None, :, None, None, :]
        y = py[None, :, None, None, :, None]
        z = pz[:, None, None, :, None, None]
        u = u + cfg.dt * np.asarray(cfg.source(x, y, z), dtype=float)
    mass3 = (basis.mass[:, None, None] * basis.mass[None, :, None]
             * basis.mass[None, None, :])
    return u * mass3[None, None, None]


def step_3d(state: FieldState, cfg: SchemeConfig3D, mode: str = "HO",
            d: float | None = None) -> FieldState:
    """One implicit 3D step (HO or graph-viscosity LO)."""
    if mode not in ("HO", "LO"):
        raise ValueError(f"unknown mode {mode!r}")
    basis, mesh = state.basis, state.mesh
    lam_x, lam_y, lam_z = cfg.lam(mesh)
    for arr in (lam_x, lam_y, lam_z):
        if not np.all(arr == arr[0]):
            raise NotImplementedError("3D solver supports uniform meshes only")
    dvisc = 0.0
    if mode == "LO":
        dvisc = cfg.d if d is None else d
        if dvisc is None:
            dvisc = d_min(basis)
    block = DiagBlockFactor3D(basis, float(lam_x[0]), float(lam_y[0]), float(lam_z[0]),
                              d=dvisc, shift=cfg.reaction * cfg.dt)
    rhs = _source_rhs_3d(state, cfg)
    t_new = state.time + cfg.dt
    if cfg.bc == "inflow":
        new = _sweep_inflow_3d(rhs, state, cfg, block, lam_x, lam_y, lam_z, t_new)
    else:
        new = _gauss_seidel_3d(rhs, state, block, lam_x, lam_y, lam_z)
    return FieldState(mesh=mesh, basis=basis, dofs=new, time=t_new)


def _coupling_rhs_3d(rhs_cell, lams, wvec, traces):
    """Add the three upwind-neighbor face contributions."""
    out = rhs_cell.copy()
    lam_x, lam_y, lam_z = lams
    tx, ty, tz = traces
    ww = np.outer(wvec, wvec)
    out[:, :, 0] += lam_x * ww * tx      # [r, m, l=0] += lam_x (w_r w_m / 4) U_left[r, m, p]
    out[:, 0, :] += lam_y * ww * ty
    out[0, :, :] += lam_z * ww * tz
    return out


def _inflow_traces_3d(state, cfg, t_new):
    mesh, basis = state.mesh, state.basis
    n = basis.p + 1
    counts = mesh.counts
    pts = [quad_points(mesh, basis, a) for a in range(3)]
    if isinstance(cfg.inflow_data, tuple):
        gx_f, gy_f, gz_f = cfg.inflow_data
        # x face: g(y, z); arrays shaped (Nz, Ny, n_r, n_m)
        y = pts[1][None, :, None, :]
        z = pts[2][:, None, :, None]
        gx = np.broadcast_to(np.asarray(gx_f(y, z, t_new), float),
                             (counts[2], counts[1], n, n))
        x = pts[0][None, :, None, :]
        z = pts[2][:, None, :, None]
        gy = np.broadcast_to(np.asarray(gy_f(x, z, t_new), float),
                             (counts[2], counts[0], n, n))
        x = pts[0][None, :, None, :]
        y = pts[1][:, None, :, None]
        gz = np.broadcast_to(np.asarray(gz_f(x, y, t_new), float),
                             (counts[1], counts[0], n, n))
        return gx, gy, gz
    g = cfg.inflow_data
    box = state.mesh.box
    y = pts[1][None, :, None, :]
    z = pts[2][:, None, :, None]
    gx = np.broadcast_to(np.asarray(g(box[0][0] + 0 * (y + z), y, z, t_new), float),
                         (counts[2], counts[1], n, n))
    x = pts[0][None, :, None, :]
    z = pts[2][:, None, :, None]
    gy = np.broadcast_to(np.asarray(g(x, box[1][0] + 0 * (x + z), z, t_new), float),
                         (counts[2], counts[0], n, n))
    x = pts[0][None, :, None, :]
    y = pts[1][:, None, :, None]
    gz = np.broadcast_to(np.asarray(g(x, y, box[2][0] + 0 * (x + y), t_new), float),
                         (counts[1], counts[0], n, n))
    return gx, gy, gz


def _sweep_inflow_3d(rhs, state, cfg, block, lam_x, lam_y, lam_z, t_new):
    basis, mesh = state.basis, state.mesh
    nx, ny, nz = mesh.counts
    p = basis.p
    wvec = 0.5 * basis.weights
    gx, gy, gz = _inflow_traces_3d(state, cfg, t_new)
    new = np.empty_like(rhs)
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                tx = new[k, j, i - 1][:, :, p] if i > 0 else gx[k, j]
                ty = new[k, j - 1, i][:, p, :] if j > 0 else gy[k, i]
                tz = new[k - 1, j, i][p, :, :] if k > 0 else gz[j, i]
                b = _coupling_rhs_3d(rhs[k, j, i], (lam_x[i], lam_y[j], lam_z[k]),
                                     wvec, (tx, ty, tz))
                new[k, j, i] = block.solve(b)
    return new


def _gauss_seidel_3d(rhs, state, block, lam_x, lam_y, lam_z,
                     tol: float = 1e-12, max_sweeps: int = 10**5):
    mesh, basis = state.mesh, state.basis
    nx, ny, nz = mesh.counts
    p = basis.p
    wvec = 0.5 * basis.weights
    new = state.dofs.copy()
    scale = max(1e-300, float(np.abs(rhs).max()))
    for sweep in range(max_sweeps):
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    tx = new[k, j, i - 1][:, :, p]
                    ty = new[k, j - 1, i][:, p, :]
                    tz = new[k - 1, j, i][p, :, :]
                    b = _coupling_rhs_3d(rhs[k, j, i], (lam_x[i], lam_y[j], lam_z[k]),
                                         wvec, (tx, ty, tz))
                    new[k, j, i] = block.solve(b)
        res = 0.0
        tx_up = np.roll(new[:, :, :, :, :, p], 1, axis=2)
        ty_up = np.roll(new[:, :, :, :, p, :], 1, axis=1)
        tz_up = np.roll(new[:, :, :, p, :, :], 1, axis=0)
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    b = _coupling_rhs_3d(rhs[k, j, i], (lam_x[i], lam_y[j], lam_z[k]),
                                         wvec, (tx_up[k, j, i], ty_up[k, j, i], tz_up[k, j, i]))
                    res = max(res, float(np.abs(block.apply(new[k, j, i]) - b).max()))
        if res / scale <= tol:
            return new
    raise NumericError(f"3D Gauss-Seidel did not reach {tol:g} in {max_sweeps} sweeps")


def advance_3d(state: FieldState, cfg: SchemeConfig3D) -> FieldState:
    """One full 3D step with the configured limiter pipeline."""
    ho = step_3d(state, cfg, mode="HO")
    if cfg.limiter is None:
        return ho
    if cfg.limiter == "scaling":
        return scaling_limit(ho, cfg.bounds, in_place=True)
    avg = cell_average(ho)
    slack = 1e-12
    if avg.min() >= cfg.bounds.m - slack and avg.max() <= cfg.bounds.upper + slack:
        return scaling_limit(ho, cfg.bounds, in_place=True)
    lo = step_3d(state, cfg, mode="LO")
    blended = fct_blend(ho, lo, cfg.bounds, cfg.lam(state.mesh),
                        reaction_dt=cfg.reaction * cfg.dt,
                        periodic=cfg.bc == "periodic")
    return scaling_limit(blended, cfg.bounds, in_place=True)


def fct_3d(ho: FieldState, lo: FieldState, bounds: Bounds, cfg: SchemeConfig3D) -> FieldState:
    """Six-neighbor flux-corrected blend of two 3D solutions."""
    return fct_blend(ho, lo, bounds, cfg.lam(ho.mesh),
                     reaction_dt=cfg.reaction * cfg.dt,
                     periodic=cfg.bc == "periodic")
