"""
Symmetric Sparse Storage

SparseSym keeps the upper triangle of a symmetric matrix in CSR form and exposes the
full matrix lazily for products. Principal submatrices remember which rows of the
original (root) matrix they were cut from.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional
import logging

import numpy as np
import scipy.io
import scipy.sparse as sp

from plate_obstacle.exceptions import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SparseSym:
    upper: sp.csr_matrix
    index_map: Optional[np.ndarray] = None

    @classmethod
    def from_matrix(cls, matrix, drop_tolerance: float = 0.0,
                    index_map: Optional[np.ndarray] = None) -> "SparseSym":
        """
        Store a symmetric matrix by its upper triangle.

        Args:
            matrix: dense or sparse square matrix, assumed symmetric
            drop_tolerance: entries below drop_tolerance * max|diagonal| are removed
            index_map: rows of the root matrix this one was cut from
        """
        matrix = sp.csr_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ParameterError(f"matrix must be square, got shape {matrix.shape}")
        upper = sp.triu(matrix, format='csr')
        upper.sum_duplicates()
        if drop_tolerance > 0.0 and upper.nnz:
            threshold = drop_tolerance * np.abs(upper.diagonal()).max()
            upper.data[np.abs(upper.data) < threshold] = 0.0
        upper.eliminate_zeros()
        upper.sort_indices()
        return cls(upper, index_map)

    @property
    def n(self) -> int:
        return self.upper.shape[0]

    @property
    def nnz(self) -> int:
        return self.upper.nnz

    @cached_property
    def full(self) -> sp.csr_matrix:
        strict = sp.triu(self.upper, k=1, format='csr')
        return (self.upper + strict.T).tocsr()

    def diagonal(self) -> np.ndarray:
        return self.upper.diagonal()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.full @ x

    def __matmul__(self, x):
        return self.full @ x

    def to_dense(self) -> np.ndarray:
        return self.full.toarray()

    def norm_inf(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.abs(self.full).sum(axis=1).max())

    def root_indices(self) -> np.ndarray:
        return np.arange(self.n) if self.index_map is None else self.index_map


def _check_index_set(keep: Iterable[int], n: int) -> np.ndarray:
    keep = np.asarray(list(keep) if not isinstance(keep, np.ndarray) else keep, dtype=np.int64).ravel()
    if keep.size and (keep.min() < 0 or keep.max() >= n):
        raise ParameterError(f"index set has entries outside [0, {n})")
    if np.unique(keep).size != keep.size:
        raise ParameterError("index set has duplicate entries")
    return keep


def submatrix(matrix: SparseSym, keep: Iterable[int]) -> SparseSym:
    """Principal submatrix on `keep` (in the given order); index_map points into the root matrix."""
    keep = _check_index_set(keep, matrix.n)
    block = matrix.full[keep][:, keep]
    return SparseSym.from_matrix(block, index_map=matrix.root_indices()[keep])


def write_matrix_market(matrix: SparseSym, path, comment: str = ""):
    """Matrix Market coordinate format, symmetric."""
    scipy.io.mmwrite(str(path), matrix.full.tocoo(), comment=comment, symmetry='symmetric')
    logger.info(f"Wrote {matrix.n}x{matrix.n} matrix ({matrix.nnz} stored entries) to {path}")


def read_matrix_market(path) -> SparseSym:
    return SparseSym.from_matrix(scipy.io.mmread(str(path)))


def write_vector(vector: np.ndarray, path):
    """One value per line."""
    np.savetxt(str(path), np.asarray(vector, dtype=float), fmt='%.17g')


def read_vector(path) -> np.ndarray:
    return np.loadtxt(str(path), ndmin=1)
