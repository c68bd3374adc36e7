"""Gauss-Lobatto quadrature and Lagrange derivative operators on [-1, 1].

Everything downstream (time-implicit blocks, viscosity bounds, limiters)
is built from the (p+1)-point Gauss-Lobatto rule and the nodal derivative
matrix family constructed here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DEGREE = 16


def _legendre(p: int, x):
    """Evaluate P_p and its first two derivatives by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    l0, d0, s0 = np.ones_like(x), np.zeros_like(x), np.zeros_like(x)
    l1, d1, s1 = np.zeros_like(x), np.zeros_like(x), np.zeros_like(x)
    for i in range(1, p + 1):
        l2, d2, s2 = l1, d1, s1
        l1, d1, s1 = l0, d0, s0
        a = (2 * i - 1) / i
        b = (i - 1) / i
        l0 = a * x * l1 - b * l2
        d0 = a * (l1 + x * d1) - b * d2
        s0 = a * (2 * d1 + x * s1) - b * s2
    return l0, d0, s0


def gauss_lobatto_nodes_weights(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the (p+1)-point Gauss-Lobatto rule.

    Interior nodes are the roots of (1-x^2) P_p'(x), found by Newton
    iteration from Chebyshev-Lobatto initial guesses; endpoints are pinned
    at -1 and 1.  Weights are 2 / (p (p+1) P_p(x_k)^2).
    """
    n = p + 1
    nodes = -np.cos(np.pi * np.arange(n) / p)
    if p > 1:
        for _ in range(100):
            _, d, s = _legendre(p, nodes[1:-1])
            x = nodes[1:-1]
            f = (1.0 - x * x) * d
            df = -2.0 * x * d + (1.0 - x * x) * s
            dx = f / df
            nodes[1:-1] -= dx
            if np.max(np.abs(dx)) < 1e-15:
                break
    nodes[0], nodes[-1] = -1.0, 1.0
    # enforce exact symmetry about the origin
    nodes = 0.5 * (nodes - nodes[::-1])
    lp, _, _ = _legendre(p, nodes)
    weights = 2.0 / (p * n * lp**2)
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


def lagrange_derivative_matrix(nodes: np.ndarray) -> np.ndarray:
    """Matrix D with D[k, l] = l_l'(x_k), by barycentric differentiation.

    Off-diagonal entries use the barycentric weights; diagonal entries are
    the negated row sums, so D annihilates constants exactly.
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    d = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


@dataclass(frozen=True)
class QuadratureBasis:
    """Degree-p Gauss-Lobatto collocation basis.

    Immutable after construction; shared freely across threads.  ``Dpow[a]``
    holds the a-th derivative matrix D^(a) for a = 0..p (D^(p+1) vanishes
    identically and is not stored).
    """

    p: int
    nodes: np.ndarray
    weights: np.ndarray
    D: np.ndarray
    Dpow: list[np.ndarray] = field(repr=False)

    @property
    def mass(self) -> np.ndarray:
        """Diagonal of the reference mass matrix M = diag(w)/2."""
        return 0.5 * self.weights


def build_basis(p: int) -> QuadratureBasis:
    """Construct the degree-p basis with nodes, weights and D^(0..p).

    Raises:
        ValueError: if p is outside 1..16 (higher derivative powers lose
            all useful precision beyond that).
    """
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= MAX_DEGREE:
        raise ValueError(f"polynomial degree must be an integer in 1..{MAX_DEGREE}, got {p!r}")
    nodes, weights = gauss_lobatto_nodes_weights(p)
    d = lagrange_derivative_matrix(nodes)
    dpow = [np.eye(p + 1), d]
    for _ in range(2, p + 1):
        dpow.append(dpow[-1] @ d)
    basis = QuadratureBasis(p=int(p), nodes=nodes, weights=weights, D=d, Dpow=dpow)
    return basis


def derivative_matrix(basis: QuadratureBasis) -> np.ndarray:
    """First-derivative matrix of the basis (copy)."""
    return basis.D.copy()


def derivative_powers(basis: QuadratureBasis) -> list[np.ndarray]:
    """All derivative matrices D^(0), ..., D^(p+1); the last one is zero."""
    p = basis.p
    return [m.copy() for m in basis.Dpow] + [np.zeros((p + 1, p + 1))]


def neumann_inverse(basis: QuadratureBasis, y: float) -> np.ndarray:
    """Inverse of (I - y D) as the exact truncated series sum_k y^k D^(k).

    Exact for every real y because D is nilpotent of index p+1.
    """
    out = np.zeros_like(basis.D)
    yk = 1.0
    for dk in basis.Dpow:
        out += yk * dk
        yk *= y
    return out
