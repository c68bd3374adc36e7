"""Maximum-principle thresholds and M-matrix verification.

The cell-averaged implicit scheme in 1D preserves bounds once the
nondimensional step exceeds a degree-dependent floor; in 2D/3D the
low-order scheme needs a floor on the graph-viscosity coefficient.
Both floors are computed here from first principles, together with a
diagonal-dominance certificate used by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .gll import QuadratureBasis
from .spectral import NumericError

ZERO_SLACK = 1e-12


def _condition_polynomials(basis: QuadratureBasis) -> list[np.ndarray]:
    """Polynomials in lam (lowest degree first) that must be nonnegative.

    Entries of the resolvent are polynomials in 2*lam; the four
    nonnegativity conditions on its last row become the list below.
    """
    p = basis.p
    wp = basis.weights[p]
    # dres[p, k] = sum_l (2 lam)^l Dpow[l][k, p]
    polys = []
    for k in range(p + 1):
        # w_p + 2*lam*(dres_pp - dres_pk) >= 0; the l = p term cancels
        # because D^(p) has constant columns.
        coeff = np.zeros(p + 1)
        coeff[0] = wp
        for l in range(p):
            coeff[l + 1] = 2.0**(l + 1) * (basis.Dpow[l][p, p] - basis.Dpow[l][k, p])
        polys.append(coeff)
    for k in range(1, p + 1):
        # dres_pk - dres_p0 >= 0; the l = p term cancels for the same reason
        coeff = np.zeros(p + 1)
        for l in range(p):
            coeff[l] = 2.0**l * (basis.Dpow[l][k, p] - basis.Dpow[l][0, p])
        polys.append(coeff)
    # dres_p0 >= 0
    coeff = np.zeros(p + 1)
    for l in range(p + 1):
        coeff[l] = 2.0**l * basis.Dpow[l][0, p]
    polys.append(coeff)
    return polys


def _largest_nonnegative_root(coeff_ascending: np.ndarray) -> float:
    """Largest real root >= 0 of a polynomial, or 0.0 if none.

    Leading coefficients below 1e-9 of the largest one are treated as
    zero; they are roundoff remnants of analytically cancelling terms and
    would otherwise inject spurious huge roots.
    """
    coeff = np.asarray(coeff_ascending, dtype=float)[::-1]
    scale = np.max(np.abs(coeff))
    if scale == 0.0:
        return 0.0
    keep = np.flatnonzero(np.abs(coeff) > 1e-9 * scale)
    if keep.size == 0:
        return 0.0
    coeff = coeff[keep[0]:]
    if coeff.size <= 1:
        return 0.0
    roots = np.roots(coeff)
    real = roots[np.abs(roots.imag) <= 1e-9 * (1.0 + np.abs(roots.real))].real
    real = real[real >= -ZERO_SLACK]
    return float(real.max()) if real.size else 0.0


def lambda_min(basis: QuadratureBasis) -> float:
    """Smallest floor on lam above which every bound-preservation condition holds.

    Takes the largest nonnegative real root over all condition polynomials,
    then verifies on a lam grid that the conditions hold above the floor.
    """
    polys = _condition_polynomials(basis)
    floor = max(_largest_nonnegative_root(c) for c in polys)

    grid = floor + np.arange(1, 5001) * 1e-3
    for coeff in polys:
        values = np.polynomial.polynomial.polyval(grid, coeff)
        if np.any(values < -ZERO_SLACK * max(1.0, np.max(np.abs(coeff)))):
            raise NumericError(
                f"condition violated above computed floor {floor:.6g} for p={basis.p}"
            )
    return floor


def d_min(basis: QuadratureBasis) -> float:
    """Graph-viscosity floor 2*max_{k != m}(-D[m, k] / w_k)."""
    ratios = -basis.D / basis.weights[None, :]
    np.fill_diagonal(ratios, -np.inf)
    return 2.0 * float(ratios.max())


@dataclass(frozen=True)
class MpBounds:
    p: int
    lambda_min: float
    d_min: float


def mp_bounds(basis: QuadratureBasis) -> MpBounds:
    return MpBounds(p=basis.p, lambda_min=lambda_min(basis), d_min=d_min(basis))


class MMatrixCheck(NamedTuple):
    """Outcome of the diagonal-dominance M-matrix test with a certificate."""

    ok: bool
    reason: str
    index: tuple[int, int] | None
    value: float

    def __bool__(self) -> bool:
        return self.ok


def is_m_matrix(a: np.ndarray, tol: float = ZERO_SLACK) -> MMatrixCheck:
    """Check the sufficient M-matrix conditions row by row.

    Requires nonpositive off-diagonals (within tol), strictly positive
    diagonal, and strict row diagonal dominance.  Reports the first
    violating entry on failure.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    scale = max(1.0, float(np.abs(a).max()))
    bad = np.argwhere(off > tol * scale)
    if bad.size:
        i, j = map(int, bad[0])
        return MMatrixCheck(False, "positive off-diagonal entry", (i, j), float(a[i, j]))
    diag = np.diag(a)
    bad_diag = np.flatnonzero(diag <= tol)
    if bad_diag.size:
        i = int(bad_diag[0])
        return MMatrixCheck(False, "non-positive diagonal entry", (i, i), float(diag[i]))
    gap = diag - np.abs(off).sum(axis=1)
    weak = np.flatnonzero(gap <= tol * scale)
    if weak.size:
        i = int(weak[0])
        return MMatrixCheck(False, "row not strictly diagonally dominant", (i, i), float(gap[i]))
    return MMatrixCheck(True, "strictly diagonally dominant Z-matrix", None, float(gap.min()))
