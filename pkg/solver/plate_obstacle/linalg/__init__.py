"""
Sparse Linear Algebra Module

Symmetric sparse storage, banded sparse Cholesky and preconditioned conjugate gradients
with Lanczos condition number estimates.
"""

from plate_obstacle.linalg.sparse import (
    SparseSym,
    submatrix,
    read_matrix_market,
    write_matrix_market,
    read_vector,
    write_vector,
)
from plate_obstacle.linalg.cholesky import CholFactor, cholesky
from plate_obstacle.linalg.krylov import (
    PcgResult,
    pcg,
    lanczos_kappa,
    dense_condition_number,
    dump_residual_history,
)

__all__ = [
    'SparseSym',
    'submatrix',
    'read_matrix_market',
    'write_matrix_market',
    'read_vector',
    'write_vector',
    'CholFactor',
    'cholesky',
    'PcgResult',
    'pcg',
    'lanczos_kappa',
    'dense_condition_number',
    'dump_residual_history',
]
