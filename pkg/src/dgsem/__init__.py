"""Time-implicit DGSEM solvers for linear scalar conservation laws.

Gauss-Lobatto collocation in space, backward Euler in time, with
bound-preserving limiters and tensor-product fast block inverses.
"""

from .bounds import MpBounds, d_min, is_m_matrix, lambda_min, mp_bounds
from .gll import QuadratureBasis, build_basis, derivative_matrix, derivative_powers, neumann_inverse
from .limiters import FctWorkspace, fct_apply, fct_blend, fct_coefficients, scaling_limit
from .mesh import (
    Bounds,
    FieldState,
    MeshGrid,
    SpaceTimeNorm,
    cell_average,
    dump_csv,
    error_norms,
    minmax_averages,
    minmax_dofs,
    project_pointwise,
    zeros_like_field,
)
from .spectral import (
    BlockInverse1D,
    NumericError,
    ResolventSeries,
    SpectralFactor,
    resolvent,
    sherman_morrison_block_inverse,
    spectral_factor,
)

__version__ = "0.1.0"
