"""Spectral machinery for the time-implicit diagonal blocks.

The single-cell implicit operator in 1D is L = I - 2*lam*(D^T - e_p e_p^T/w_p).
Its eigendecomposition depends only on the degree p, so it is computed once
and reused for every lam and for all the tensor-product block solves in two
and three dimensions.  The resolvent (I - 2*lam*D^T)^{-1} is available in
closed form as a truncated Neumann series thanks to nilpotency of D.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gll import QuadratureBasis, build_basis


class NumericError(RuntimeError):
    """Raised when a fast solve loses validity (defective factor, bad cast)."""


IMAG_TOL = 1e-9


def resolvent_matrix(basis: QuadratureBasis, lam: float) -> np.ndarray:
    """(I - 2*lam*D^T)^{-1} as the exact p+1 term series sum (2*lam*D^T)^l."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    out = np.zeros((basis.p + 1, basis.p + 1))
    c = 1.0
    for dk in basis.Dpow:
        out += c * dk.T
        c *= 2.0 * lam
    return out


@dataclass(frozen=True)
class ResolventSeries:
    """Resolvent of the transported derivative at a fixed time-step ratio."""

    lam: float
    matrix: np.ndarray


def resolvent(basis: QuadratureBasis, lam: float) -> ResolventSeries:
    """Build the resolvent series for nondimensional step lam > 0."""
    return ResolventSeries(lam=float(lam), matrix=resolvent_matrix(basis, lam))


def upwinded_operator(basis: QuadratureBasis) -> np.ndarray:
    """The lam-independent cell operator D^T - e_p e_p^T / w_p."""
    p = basis.p
    mat = basis.D.T.copy()
    mat[p, p] -= 1.0 / basis.weights[p]
    return mat


def eigenvalue_polynomial(basis: QuadratureBasis) -> np.ndarray:
    """Coefficients (highest degree first) of w_p x^{p+1} + sum x^{p-l} Dpp^(l)."""
    coeffs = np.empty(basis.p + 2)
    coeffs[0] = basis.weights[basis.p]
    for l, dk in enumerate(basis.Dpow):
        coeffs[l + 1] = dk[basis.p, basis.p]
    return coeffs


@dataclass(frozen=True)
class SpectralFactor:
    """Eigendecomposition of the upwinded cell operator for degree p.

    ``R`` holds right eigenvectors (column j for eigenvalue ``psi[j]``)
    normalized so the last component is exactly 1; ``Rinv`` is its inverse.
    Immutable, safe to share.
    """

    p: int
    psi: np.ndarray
    R: np.ndarray
    Rinv: np.ndarray
    MinvR: np.ndarray


def spectral_factor(basis: QuadratureBasis) -> SpectralFactor:
    """Factor the upwinded operator via its characteristic polynomial.

    Eigenvalues come from the companion matrix of the degree-(p+1)
    polynomial, polished with one Newton step; eigenvectors follow the
    closed-form expression with r_p = 1.
    """
    p = basis.p
    coeffs = eigenvalue_polynomial(basis)
    psi = np.roots(coeffs)
    dcoeffs = np.polyder(coeffs)
    psi = psi - np.polyval(coeffs, psi) / np.polyval(dcoeffs, psi)

    residual = np.abs(np.polyval(coeffs, psi))
    if np.any(residual > 1e-9 * max(1.0, np.max(np.abs(coeffs)))):
        raise NumericError(
            f"eigenvalue polynomial residual too large for p={p}: {residual.max():.3e}"
        )
    if np.any(np.abs(psi) < 1e-14):
        raise NumericError(f"zero eigenvalue found for p={p}; operator should be invertible")

    # r_k = -(1/w_p) sum_l psi^{-l-1} D^(l)[p, k], r_p = 1
    R = np.empty((p + 1, p + 1), dtype=complex)
    for j, ev in enumerate(psi):
        acc = np.zeros(p + 1, dtype=complex)
        power = 1.0 / ev
        for dk in basis.Dpow:
            acc += power * dk[p, :]
            power /= ev
        R[:, j] = -acc / basis.weights[p]
        R[p, j] = 1.0

    cond = np.linalg.cond(R)
    if cond > 1e12:
        raise NumericError(
            f"eigenvector matrix nearly defective for p={p} (cond={cond:.3e})"
        )
    Rinv = np.linalg.inv(R)
    MinvR = R / basis.mass[:, None]
    return SpectralFactor(p=p, psi=psi, R=R, Rinv=Rinv, MinvR=MinvR)


@lru_cache(maxsize=None)
def cached_factor(p: int) -> SpectralFactor:
    """Per-degree factor, computed once at first use."""
    return spectral_factor(build_basis(p))


def real_cast(values: np.ndarray, context: str = "fast solve") -> np.ndarray:
    """Drop the imaginary part after checking it is numerically negligible."""
    re = np.ascontiguousarray(values.real)
    imag = np.abs(values.imag).max() if values.size else 0.0
    scale = max(np.abs(re).max() if re.size else 0.0, 1e-300)
    if imag > IMAG_TOL * scale:
        raise NumericError(f"{context}: imaginary residual {imag:.3e} exceeds {IMAG_TOL:g}*{scale:.3e}")
    return re


def sherman_morrison_block_inverse(basis: QuadratureBasis, lam: float) -> np.ndarray:
    """Inverse of (L_1d M) through the rank-one update of the resolvent.

    Returns M^{-1} (I - 2*lam/(w_p + 2*lam*Dres_pp) * Dres e_p e_p^T) Dres
    with Dres the Neumann-series resolvent.  The denominator is strictly
    positive for every lam > 0.  Exact in real arithmetic, but the series
    entries grow like (2*lam)^p, so in floats this form is only accurate
    while 2*lam*||D|| stays moderate; the spectral form below is the
    stable equivalent used by the solvers.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    dres = resolvent_matrix(basis, lam)
    wp = basis.weights[basis.p]
    denom = wp + 2.0 * lam * dres[basis.p, basis.p]
    if denom <= 0:
        raise NumericError(f"non-positive Sherman-Morrison denominator {denom:.3e}")
    linv = dres - (2.0 * lam / denom) * np.outer(dres[:, basis.p], dres[basis.p, :])
    return linv / basis.mass[:, None]


class BlockInverse1D:
    """Applies the inverse of the 1D diagonal block (L_1d M) for one lam.

    Assembled once from the cached eigendecomposition as
    M^{-1} R diag(1/(1 + shift - 2*lam*psi)) R^{-1}, which agrees with the
    rank-one resolvent update exactly but stays accurate for large lam.
    ``shift`` adds an implicit reaction contribution (1 + shift) on the mass.
    """

    def __init__(self, basis: QuadratureBasis, lam: float, shift: float = 0.0):
        if lam <= 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        self.lam = float(lam)
        self.shift = float(shift)
        factor = cached_factor(basis.p)
        denom = 1.0 + self.shift - 2.0 * self.lam * factor.psi
        if np.abs(denom).min() < 1e-13:
            raise NumericError("singular 1D diagonal block")
        linv = real_cast((factor.R / denom[None, :]) @ factor.Rinv, "1D block inverse")
        matrix = linv / basis.mass[:, None]
        # one Newton polish of the precomputed inverse takes the identity
        # residual from ~cond(R)^2*eps down to machine level
        eye = np.eye(basis.p + 1)
        block = (1.0 + self.shift) * eye - 2.0 * self.lam * upwinded_operator(basis)
        block = block * basis.mass[None, :]
        self.matrix = matrix @ (2.0 * eye - block @ matrix)
        self.block = block

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        return self.matrix @ rhs
