"""Quadrature and derivative-operator identities."""

import numpy as np
import pytest

from dgsem.gll import build_basis, derivative_matrix, derivative_powers, neumann_inverse


def test_p1_nodes_weights():
    b = build_basis(1)
    assert np.allclose(b.nodes, [-1.0, 1.0], atol=0)
    assert np.allclose(b.weights, [1.0, 1.0], atol=0)


def test_p2_weights_against_exactness_oracle():
    # brute force: solve the moment equations on the known nodes (-1, 0, 1)
    b = build_basis(2)
    nodes = np.array([-1.0, 0.0, 1.0])
    vand = np.vander(nodes, 3, increasing=True).T
    moments = np.array([2.0, 0.0, 2.0 / 3.0])
    weights = np.linalg.solve(vand, moments)
    assert np.allclose(b.nodes, nodes, atol=1e-15)
    assert np.allclose(b.weights, weights, atol=1e-14)
    assert np.allclose(weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-14)


@pytest.mark.parametrize("p", range(1, 9))
def test_weights_sum_and_symmetry(p):
    b = build_basis(p)
    assert abs(b.weights.sum() - 2.0) <= 1e-14
    assert np.abs(b.nodes + b.nodes[::-1]).max() <= 1e-14
    assert b.nodes[0] == -1.0 and b.nodes[-1] == 1.0
    assert np.all(np.diff(b.nodes) > 0)
    assert np.all(b.weights > 0)


@pytest.mark.parametrize("p", range(1, 9))
def test_quadrature_exactness(p):
    b = build_basis(p)
    for m in range(2 * p):
        exact = 2.0 / (m + 1) if m % 2 == 0 else 0.0
        approx = float(b.weights @ b.nodes**m)
        assert abs(approx - exact) <= 1e-13 * max(1.0, abs(exact))


def test_derivative_matrix_p1():
    d = derivative_matrix(build_basis(1))
    assert np.allclose(d, [[-0.5, 0.5], [-0.5, 0.5]], atol=1e-15)


def test_derivative_matrix_p2():
    d = derivative_matrix(build_basis(2))
    ref = np.array([[-1.5, 2.0, -0.5], [-0.5, 0.0, 0.5], [0.5, -2.0, 1.5]])
    assert np.allclose(d, ref, atol=1e-14)


@pytest.mark.parametrize("p", range(1, 9))
def test_kernel_and_rank(p):
    b = build_basis(p)
    assert np.abs(b.D @ np.ones(p + 1)).max() <= 1e-13
    assert np.linalg.matrix_rank(b.D, tol=1e-10) == p


@pytest.mark.parametrize("p", range(1, 9))
def test_sbp_identity(p):
    b = build_basis(p)
    w = np.diag(b.weights)
    boundary = np.zeros((p + 1, p + 1))
    boundary[0, 0], boundary[p, p] = -1.0, 1.0
    assert np.abs(w @ b.D + (w @ b.D).T - boundary).max() <= 1e-13


@pytest.mark.parametrize("p", range(1, 9))
def test_integration_row_identity(p):
    b = build_basis(p)
    target = np.zeros(p + 1)
    target[0], target[p] = -1.0, 1.0
    assert np.abs(b.weights @ b.D - target).max() <= 1e-13


@pytest.mark.parametrize("p", range(1, 9))
def test_nilpotency(p):
    # tolerance scaled by the operator norms as the entries of D^(p) blow
    # up with p; the raw 1e-10 bound holds through p = 5
    b = build_basis(p)
    dpow = derivative_powers(b)
    top = b.Dpow[-1] @ b.D
    scale = np.linalg.norm(b.D, 2) ** (p + 1) * np.finfo(float).eps
    assert np.abs(top).max() <= max(1e-10, scale)
    assert np.abs(dpow[p + 1]).max() == 0.0


def test_dp_columns_constant_p2():
    b = build_basis(2)
    d2 = b.Dpow[2]
    assert np.abs(d2 - d2[0][None, :]).max() <= 1e-12
    pred = [2 * np.prod([1 / (b.nodes[l] - b.nodes[m]) for m in range(3) if m != l])
            for l in range(3)]
    assert np.allclose(d2[0], pred, atol=1e-12)


def test_p1_second_power_vanishes():
    b = build_basis(1)
    assert np.abs(b.D @ b.D).max() <= 1e-15


@pytest.mark.parametrize("p", range(1, 9))
def test_telescoping_integration(p):
    b = build_basis(p)
    dpow = derivative_powers(b)
    for alpha in range(1, p + 2):
        lhs = b.weights @ dpow[alpha]
        rhs = dpow[alpha - 1][p, :] - dpow[alpha - 1][0, :]
        scale = max(1.0, np.abs(dpow[alpha - 1]).max())
        assert np.abs(lhs - rhs).max() <= 1e-11 * scale


def test_neumann_identity_trivial():
    b = build_basis(3)
    assert np.allclose(neumann_inverse(b, 0.0), np.eye(4), atol=0)


@pytest.mark.parametrize("p,y", [(2, 1.0), (4, -3.7)])
def test_neumann_against_dense_lu(p, y):
    # the LU oracle itself carries forward error ~cond(I - yD) * eps, which
    # dominates the comparison once the matrix is badly conditioned
    b = build_basis(p)
    a = np.eye(p + 1) - y * b.D
    dense = np.linalg.solve(a, np.eye(p + 1))
    got = neumann_inverse(b, y)
    scale = max(1.0, np.abs(dense).max())
    tol = max(1e-11, 50 * np.finfo(float).eps * np.linalg.cond(a))
    assert np.abs(got - dense).max() <= tol * scale


@pytest.mark.parametrize("p", range(1, 7))
def test_neumann_random_inverse_property(p):
    rng = np.random.default_rng(42 + p)
    b = build_basis(p)
    eye = np.eye(p + 1)
    for y in rng.uniform(-10.0, 10.0, size=50):
        prod = neumann_inverse(b, y) @ (eye - y * b.D)
        scale = max(1.0, np.abs(neumann_inverse(b, y)).max() * (1 + abs(y) * np.abs(b.D).max()))
        assert np.abs(prod - eye).max() <= 1e-12 * scale


@pytest.mark.parametrize("p", [0, -3, 17, 40])
def test_rejects_unsupported_degree(p):
    with pytest.raises(ValueError):
        build_basis(p)
