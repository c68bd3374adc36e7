"""Scaling limiter and flux-corrected interface blending."""

import numpy as np
import pytest

from dgsem.gll import build_basis
from dgsem.limiters import fct_apply, fct_blend, fct_coefficients, scaling_limit
from dgsem.mesh import Bounds, FieldState, MeshGrid, cell_average
from dgsem.solver2d import config_for_lambda_2d, step_2d


def _cell_state(dofs):
    dofs = np.atleast_2d(np.asarray(dofs, dtype=float))
    basis = build_basis(dofs.shape[1] - 1)
    mesh = MeshGrid.uniform([dofs.shape[0]])
    return FieldState(mesh=mesh, basis=basis, dofs=dofs)


def test_scaling_identity_when_within_bounds():
    state = _cell_state([[0.2, 0.5, 0.8]])
    out = scaling_limit(state, Bounds(0.0, 1.0))
    assert np.array_equal(out.dofs, state.dofs)


def test_scaling_published_example():
    state = _cell_state([[-0.1, 0.5, 1.2]])
    avg = cell_average(state)[0]
    assert abs(avg - 31.0 / 60.0) <= 1e-15
    out = scaling_limit(state, Bounds(0.0, 1.0))
    theta = (1.0 - avg) / (1.2 - avg)
    assert abs(theta - 29.0 / 41.0) <= 1e-14
    expect = theta * np.array([-0.1, 0.5, 1.2]) + (1 - theta) * avg
    assert np.allclose(out.dofs[0], expect, atol=1e-14)
    assert np.allclose(out.dofs[0], [0.08049, 0.50488, 1.0], atol=5e-5)
    assert abs(cell_average(out)[0] - avg) <= 1e-13
    assert out.dofs.min() >= -1e-12 and out.dofs.max() <= 1.0 + 1e-12


def test_scaling_idempotent():
    rng = np.random.default_rng(0)
    state = _cell_state(rng.uniform(-0.4, 1.4, size=(6, 4)))
    # shift each cell into admissible average range
    avg = cell_average(state)
    state.dofs += (0.5 - avg)[:, None]
    once = scaling_limit(state, Bounds(0.0, 1.0))
    twice = scaling_limit(once, Bounds(0.0, 1.0))
    assert np.abs(twice.dofs - once.dofs).max() <= 1e-13


def test_scaling_preserves_averages():
    rng = np.random.default_rng(1)
    state = _cell_state(rng.uniform(-0.2, 1.2, size=(8, 5)))
    avg = cell_average(state)
    state.dofs += (np.clip(avg, 0.1, 0.9) - avg)[:, None]
    before = cell_average(state).copy()
    out = scaling_limit(state, Bounds(0.0, 1.0))
    assert np.abs(cell_average(out) - before).max() <= 1e-13


def test_scaling_one_sided_upper_unbounded():
    state = _cell_state([[-0.5, 0.5, 3.0]])
    out = scaling_limit(state, Bounds(0.0, None))
    assert out.dofs.min() >= 0.0
    assert abs(cell_average(out)[0] - cell_average(state)[0]) <= 1e-13


def test_scaling_strict_precondition_names_cell():
    state = _cell_state([[2.0, 2.0, 2.0], [0.5, 0.5, 0.5]])
    with pytest.raises(ValueError, match=r"cell \(0,\)"):
        scaling_limit(state, Bounds(0.0, 1.0))
    out = scaling_limit(state, Bounds(0.0, 1.0), strict=False)
    assert np.array_equal(out.dofs[0], state.dofs[0])


def test_scaling_constant_cell_theta_one():
    state = _cell_state([[0.3, 0.3, 0.3]])
    out = scaling_limit(state, Bounds(0.0, 1.0))
    assert np.array_equal(out.dofs, state.dofs)


def _consistent_pair(p=2, n=5, lam=(0.8, 1.3), seed=0):
    rng = np.random.default_rng(seed)
    basis = build_basis(p)
    mesh = MeshGrid.uniform([n, n])
    cfg = config_for_lambda_2d(mesh, lam[0], lam[1])
    state = FieldState(mesh=mesh, basis=basis, dofs=rng.uniform(0, 1, (n, n, p + 1, p + 1)))
    return step_2d(state, cfg, mode="HO"), step_2d(state, cfg, mode="LO"), cfg


def test_fct_identical_inputs_are_inert():
    ho, _, cfg = _consistent_pair()
    ws = fct_coefficients(ho, ho.copy(), Bounds(0.0, 1.0), cfg.lam(ho.mesh))
    for a in range(2):
        assert np.abs(ws.a_minus[a]).max() == 0.0
        assert np.abs(ws.a_plus[a]).max() == 0.0
    assert np.all(ws.l_minus == 1.0) and np.all(ws.l_plus == 1.0)
    out = fct_apply(ho, ho.copy(), ws)
    assert np.abs(out.dofs - ho.dofs).max() == 0.0


@pytest.mark.parametrize("p", [1, 2, 3])
def test_fct_decomposition_identity(p):
    ho, lo, cfg = _consistent_pair(p=p, seed=p)
    ws = fct_coefficients(ho, lo, Bounds(0.0, 1.0), cfg.lam(ho.mesh))
    total = sum(ws.a_minus) + sum(ws.a_plus)
    diff = cell_average(ho) - cell_average(lo)
    assert np.abs(total - diff).max() <= 1e-12


def test_fct_interface_antisymmetry_uniform():
    ho, lo, cfg = _consistent_pair(seed=4)
    ws = fct_coefficients(ho, lo, Bounds(0.0, 1.0), cfg.lam(ho.mesh))
    for a, axis in ((0, 1), (1, 0)):
        assert np.abs(ws.a_minus[a] + np.roll(ws.a_plus[a], 1, axis=axis)).max() <= 1e-13


def test_fct_interface_factor_symmetry():
    ho, lo, cfg = _consistent_pair(seed=5)
    ws = fct_coefficients(ho, lo, Bounds(0.0, 1.0), cfg.lam(ho.mesh))
    for a, axis in ((0, 1), (1, 0)):
        assert np.abs(ws.l_dn[a] - np.roll(ws.l_up[a], -1, axis=axis)).max() == 0.0


def test_fct_bound_chain():
    ho, lo, cfg = _consistent_pair(seed=6)
    ws = fct_coefficients(ho, lo, Bounds(0.0, 1.0), cfg.lam(ho.mesh))
    assert np.all(ws.p_minus <= 1e-15) and np.all(ws.p_plus >= -1e-15)
    assert np.all(ws.q_minus <= 1e-12) and np.all(ws.q_plus >= -1e-12)
    lm = ws.l_minus * ws.p_minus
    lp = ws.l_plus * ws.p_plus
    assert np.all(ws.q_minus - 1e-12 <= lm) and np.all(lm <= 1e-12)
    assert np.all(-1e-12 <= lp) and np.all(lp <= ws.q_plus + 1e-12)


def test_fct_apply_average_and_conservation():
    ho, lo, cfg = _consistent_pair(p=3, seed=7)
    ws = fct_coefficients(ho, lo, Bounds(0.0, 1.0), cfg.lam(ho.mesh))
    out = fct_apply(ho, lo, ws)
    assert np.abs(cell_average(out) - ws.target_avg).max() <= 1e-12
    assert abs(cell_average(out).sum() - cell_average(ho).sum()) <= 1e-12
    avg = cell_average(out)
    assert avg.min() >= -1e-12 and avg.max() <= 1.0 + 1e-12


def test_fct_forced_factor_limits():
    # l == 1 keeps the high-order DOFs, l == 0 reproduces the low-order means
    ho, lo, cfg = _consistent_pair(seed=8)
    ws = fct_coefficients(ho, lo, Bounds(0.0, 1.0), cfg.lam(ho.mesh))
    for a in range(2):
        ws.l_up[a][:] = 1.0
        ws.l_dn[a][:] = 1.0
    assert np.abs(fct_apply(ho, lo, ws).dofs - ho.dofs).max() <= 1e-14
    for a in range(2):
        ws.l_up[a][:] = 0.0
        ws.l_dn[a][:] = 0.0
    out = fct_apply(ho, lo, ws)
    assert np.abs(cell_average(out) - cell_average(lo)).max() <= 1e-12


def test_fct_zero_over_zero_convention():
    ho, _, cfg = _consistent_pair(seed=9)
    ws = fct_coefficients(ho, ho.copy(), Bounds(0.0, 1.0), cfg.lam(ho.mesh))
    assert np.all(ws.l_minus == 1.0) and np.all(ws.l_plus == 1.0)


def test_fct_rejects_mismatched_states():
    ho, lo, cfg = _consistent_pair(seed=10)
    other = build_basis(3)
    mesh = ho.mesh
    bad = FieldState(mesh=mesh, basis=other,
                     dofs=np.zeros(mesh.counts[::-1] + (4, 4)))
    with pytest.raises(ValueError):
        fct_coefficients(ho, bad, Bounds(0.0, 1.0), cfg.lam(mesh))


def test_fct_nonuniform_warns():
    rng = np.random.default_rng(11)
    basis = build_basis(1)
    sizes = (np.array([0.3, 0.7]), np.array([0.5, 0.5]))
    mesh = MeshGrid(dim=2, counts=(2, 2), cell_sizes=sizes, box=((0, 1), (0, 1)))
    ho = FieldState(mesh=mesh, basis=basis, dofs=rng.uniform(0, 1, (2, 2, 2, 2)))
    lo = FieldState(mesh=mesh, basis=basis, dofs=rng.uniform(0, 1, (2, 2, 2, 2)))
    lam = (0.3 / sizes[0], 0.3 / sizes[1])
    with pytest.warns(UserWarning, match="nonuniform"):
        fct_coefficients(ho, lo, Bounds(0.0, 1.0), lam)


def test_fct_blend_1d_states():
    # the interface construction is dimension generic; exercise it in 1D
    rng = np.random.default_rng(12)
    basis = build_basis(2)
    mesh = MeshGrid.uniform([6])
    u0 = rng.uniform(0, 1, (6, 3))
    from dgsem.solver1d import config_for_lambda, step_periodic
    cfg = config_for_lambda(mesh, 0.7)
    state = FieldState(mesh=mesh, basis=basis, dofs=u0)
    ho = step_periodic(state, cfg)
    lo = ho.copy()
    lo.dofs = lo.dofs + 0.0  # same scheme; blend must be inert
    out = fct_blend(ho, lo, Bounds(0.0, 1.0), (cfg.lam(mesh),))
    assert np.abs(out.dofs - ho.dofs).max() == 0.0
