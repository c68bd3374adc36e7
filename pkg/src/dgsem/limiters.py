"""Bound-preserving limiters.

Two stages: a flux-corrected blend of the high-order and graph-viscosity
solutions that restores the maximum principle on cell averages, followed
by the linear scaling limiter that contracts DOFs toward the (already
admissible) cell average.  The scaling limiter never changes averages,
the FCT stage never changes the global conservation sum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .mesh import Bounds, FieldState, cell_average

AVG_SLACK = 1e-12


def scaling_limit(
    state: FieldState,
    bounds: Bounds,
    in_place: bool = False,
    strict: bool = True,
) -> FieldState:
    """Contract each cell's DOFs toward its average to satisfy bounds.

    Requires every cell average inside [m, M] (up to 1e-12 slack); with
    ``strict`` these violations raise, otherwise the offending cells are
    left untouched.  Averages are preserved exactly up to roundoff.
    """
    out = state if in_place else state.copy()
    dim = state.mesh.dim
    avg = cell_average(state)
    m, M = bounds.m, bounds.upper

    valid = (avg >= m - AVG_SLACK) & (avg <= M + AVG_SLACK)
    if strict and not valid.all():
        cell = np.unravel_index(int(np.argmin(valid)), valid.shape)
        label = tuple(int(c) for c in cell[::-1])
        raise ValueError(
            f"cell average {float(avg[cell])} outside [{m}, {M}] in cell {label}; "
            "apply the flux-corrected blend first"
        )

    node_axes = tuple(range(dim, 2 * dim))
    umin = state.dofs.min(axis=node_axes)
    umax = state.dofs.max(axis=node_axes)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.abs(M - avg) / np.abs(umax - avg)
        lo = np.abs(m - avg) / np.abs(umin - avg)
    up = np.where((np.abs(umax - avg) < 1e-15) | ~np.isfinite(up), 1.0, up)
    lo = np.where(np.abs(umin - avg) < 1e-15, 1.0, lo)
    theta = np.minimum(np.minimum(up, lo), 1.0)
    theta = np.where(valid, theta, 1.0)

    shape = theta.shape + (1,) * dim
    out.dofs = theta.reshape(shape) * out.dofs + (1.0 - theta.reshape(shape)) * avg.reshape(shape)
    # roundoff-zone excursions (below the theta denominator guard) snap onto
    # the bound; the induced average shift stays under the 1e-13 contract
    np.copyto(out.dofs, m, where=(out.dofs < m) & (out.dofs >= m - 1e-14))
    if np.isfinite(M):
        np.copyto(out.dofs, M, where=(out.dofs > M) & (out.dofs <= M + 1e-14))
    return out


def _cell_axis(dim: int, axis: int) -> int:
    return dim - 1 - axis


def _node_axis(dim: int, axis: int) -> int:
    return 2 * dim - 1 - axis


def _face_trace(delta: np.ndarray, dim: int, axis: int, p: int) -> np.ndarray:
    """Outflow-face nodal values of a per-cell array along one axis."""
    return np.take(delta, p, axis=_node_axis(dim, axis))


def _face_mean(trace: np.ndarray, weights: np.ndarray, dim: int) -> np.ndarray:
    """Contract the remaining node axes with w/2 to get per-cell face sums."""
    w = 0.5 * weights
    out = trace
    for _ in range(dim - 1):
        out = np.tensordot(out, w, axes=([-1], [0]))
    return out


def _along(values: np.ndarray, dim: int, axis: int) -> np.ndarray:
    """Reshape a per-axis-cell vector for broadcasting over the cell grid."""
    shape = [1] * dim
    shape[_cell_axis(dim, axis)] = -1
    return values.reshape(shape)


@dataclass
class FctWorkspace:
    """Antidiffusive interface data of one flux-corrected blend.

    ``a_minus[a]``/``a_plus[a]`` hold the per-cell antidiffusive
    quantities toward the upwind/downwind neighbor along axis a;
    ``l_up[a]``/``l_dn[a]`` the matched interface limiter factors.
    ``target_avg`` is the blended cell average the corrected DOFs must
    reproduce.
    """

    bounds: Bounds
    lam: tuple[np.ndarray, ...]
    scale: float
    periodic: bool
    a_minus: list[np.ndarray]
    a_plus: list[np.ndarray]
    p_minus: np.ndarray
    p_plus: np.ndarray
    q_minus: np.ndarray
    q_plus: np.ndarray
    l_minus: np.ndarray
    l_plus: np.ndarray
    l_up: list[np.ndarray]
    l_dn: list[np.ndarray]
    face_delta: list[np.ndarray]
    target_avg: np.ndarray


def fct_coefficients(
    ho: FieldState,
    lo: FieldState,
    bounds: Bounds,
    lam: tuple[np.ndarray, ...],
    reaction_dt: float = 0.0,
    periodic: bool = True,
) -> FctWorkspace:
    """Interface antidiffusive quantities and limiter factors.

    Both states must come from the same previous state and time step;
    ``lam`` holds the per-axis nondimensional steps.  The decomposition
    sum of the quantities equals avg(HO) - avg(LO) cell by cell.
    """
    if ho.mesh is not lo.mesh and ho.mesh != lo.mesh:
        raise ValueError("high-order and low-order states live on different meshes")
    if ho.basis.p != lo.basis.p:
        raise ValueError("high-order and low-order states have different degrees")
    dim, p = ho.mesh.dim, ho.basis.p
    for arr in lam:
        if not np.all(arr == arr[0]):
            warnings.warn("flux-corrected blend on a nonuniform mesh is experimental")
            break
    scale = 1.0 / (1.0 + reaction_dt)
    delta = ho.dofs - lo.dofs

    face_delta, a_minus, a_plus = [], [], []
    for a in range(dim):
        trace = _face_trace(delta, dim, a, p)
        face_delta.append(trace)
        f = _face_mean(trace, ho.basis.weights, dim)
        lam_b = _along(lam[a], dim, a)
        ca = _cell_axis(dim, a)
        f_up = np.roll(f, 1, axis=ca)
        if not periodic:
            upstream = [slice(None)] * dim
            upstream[ca] = 0
            f_up[tuple(upstream)] = 0.0
        a_minus.append(scale * lam_b * f_up)
        a_plus.append(-scale * lam_b * f)

    stacked = np.stack(a_minus + a_plus)
    p_minus = np.minimum(stacked, 0.0).sum(axis=0)
    p_plus = np.maximum(stacked, 0.0).sum(axis=0)
    avg_lo = cell_average(lo)
    q_minus = bounds.m - avg_lo
    q_plus = bounds.upper - avg_lo

    with np.errstate(divide="ignore", invalid="ignore"):
        l_minus = np.where(p_minus == 0.0, 1.0, np.minimum(1.0, q_minus / p_minus))
        l_plus = np.where(p_plus == 0.0, 1.0, np.minimum(1.0, q_plus / p_plus))
    l_minus = np.clip(np.nan_to_num(l_minus, nan=1.0, posinf=1.0), 0.0, 1.0)
    l_plus = np.clip(np.nan_to_num(l_plus, nan=1.0, posinf=1.0), 0.0, 1.0)

    l_up, l_dn = [], []
    for a in range(dim):
        ca = _cell_axis(dim, a)
        lm_up = np.roll(l_minus, 1, axis=ca)
        lp_up = np.roll(l_plus, 1, axis=ca)
        lf = np.where(a_minus[a] < 0.0, np.minimum(l_minus, lp_up), np.minimum(lm_up, l_plus))
        if not periodic:
            first = [slice(None)] * dim
            first[ca] = 0
            lf[tuple(first)] = 1.0
        l_up.append(lf)
        ld = np.roll(lf, -1, axis=ca)
        if not periodic:
            last = [slice(None)] * dim
            last[ca] = -1
            one_sided = np.where(a_plus[a] < 0.0, l_minus, l_plus)
            ld[tuple(last)] = one_sided[tuple(last)]
        l_dn.append(ld)

    target = avg_lo.copy()
    for a in range(dim):
        target += l_up[a] * a_minus[a] + l_dn[a] * a_plus[a]

    return FctWorkspace(
        bounds=bounds,
        lam=lam,
        scale=scale,
        periodic=periodic,
        a_minus=a_minus,
        a_plus=a_plus,
        p_minus=p_minus,
        p_plus=p_plus,
        q_minus=q_minus,
        q_plus=q_plus,
        l_minus=l_minus,
        l_plus=l_plus,
        l_up=l_up,
        l_dn=l_dn,
        face_delta=face_delta,
        target_avg=target,
    )


def fct_apply(ho: FieldState, lo: FieldState, ws: FctWorkspace) -> FieldState:
    """Correct the high-order DOFs at cell interfaces per the workspace.

    Only the outermost node layers change; the resulting cell averages
    equal the blended targets and the global conservation sum is kept.
    """
    dim, p = ho.mesh.dim, ho.basis.p
    w0 = ho.basis.weights[0]
    wp = ho.basis.weights[p]
    out = ho.copy()
    # cell-shaped factors broadcast against face traces carrying dim-1 node axes
    pad = (Ellipsis,) + (None,) * (dim - 1)
    for a in range(dim):
        ca = _cell_axis(dim, a)
        na = _node_axis(dim, a)
        lam_b = _along(ws.lam[a], dim, a)[pad]
        trace = ws.face_delta[a]

        node_sel = [slice(None)] * (2 * dim)
        node_sel[na] = p
        down = ws.scale * (2.0 * lam_b / wp) * (1.0 - ws.l_dn[a])[pad] * trace
        out.dofs[tuple(node_sel)] += down

        trace_up = np.roll(trace, 1, axis=ca)
        if not ws.periodic:
            first = [slice(None)] * trace_up.ndim
            first[ca] = 0
            trace_up[tuple(first)] = 0.0
        node_sel[na] = 0
        up = ws.scale * (2.0 * lam_b / w0) * (1.0 - ws.l_up[a])[pad] * trace_up
        out.dofs[tuple(node_sel)] -= up
    return out


def fct_blend(
    ho: FieldState,
    lo: FieldState,
    bounds: Bounds,
    lam: tuple[np.ndarray, ...],
    reaction_dt: float = 0.0,
    periodic: bool = True,
) -> FieldState:
    """Full pipeline: coefficients then interface DOF correction."""
    ws = fct_coefficients(ho, lo, bounds, lam, reaction_dt=reaction_dt, periodic=periodic)
    return fct_apply(ho, lo, ws)
