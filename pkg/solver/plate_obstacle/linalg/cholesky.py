"""
Sparse Cholesky

Reverse Cuthill-McKee ordering followed by a banded LAPACK Cholesky factorization of the
permuted matrix: P A P^T = L L^T.
"""

from dataclasses import dataclass
import logging
import re

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded
from scipy.sparse.csgraph import reverse_cuthill_mckee

from plate_obstacle.exceptions import NotPositiveDefiniteError, NumericError, ParameterError
from plate_obstacle.linalg.sparse import SparseSym
from plate_obstacle.observability import get_tracer

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

ORDERING = "reverse_cuthill_mckee"


@dataclass(frozen=True, eq=False)
class CholFactor:
    n: int
    perm: np.ndarray
    band: np.ndarray  # lower banded storage of L, shape (bandwidth + 1, n)
    ordering: str = ORDERING

    @property
    def bandwidth(self) -> int:
        return self.band.shape[0] - 1

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ParameterError(f"right-hand side has {rhs.shape[0]} rows, factor has {self.n}")
        if self.n == 0:
            return rhs.copy()
        permuted = cho_solve_banded((self.band, True), rhs[self.perm], check_finite=False)
        out = np.empty_like(permuted)
        out[self.perm] = permuted
        return out

    def lower(self) -> sp.csr_matrix:
        """L in the permuted ordering."""
        diagonals = [self.band[k, :self.n - k] for k in range(self.bandwidth + 1)]
        return sp.diags(diagonals, [-k for k in range(self.bandwidth + 1)], shape=(self.n, self.n), format='csr')


def cholesky(matrix: SparseSym) -> CholFactor:
    """
    Factor a symmetric positive definite matrix.

    Raises:
        NotPositiveDefiniteError: a pivot was non-positive; `pivot` is the row in the
            caller's ordering
        NumericError: the matrix has non-finite entries
    """
    n = matrix.n
    if n == 0:
        return CholFactor(0, np.zeros(0, dtype=np.int64), np.zeros((1, 0)))
    if not np.all(np.isfinite(matrix.upper.data)):
        raise NumericError("matrix has non-finite entries")

    with tracer.start_as_current_span("linalg.cholesky") as span:
        full = matrix.full
        perm = np.asarray(reverse_cuthill_mckee(full, symmetric_mode=True), dtype=np.int64)
        permuted = sp.tril(full[perm][:, perm], format='coo')
        bandwidth = int((permuted.row - permuted.col).max()) if permuted.nnz else 0

        band = np.zeros((bandwidth + 1, n))
        band[permuted.row - permuted.col, permuted.col] = permuted.data

        span.set_attribute("linalg.n", n)
        span.set_attribute("linalg.bandwidth", bandwidth)

        try:
            factor = cholesky_banded(band, lower=True, check_finite=False)
        except LinAlgError as e:
            match = re.search(r'(\d+)', str(e))
            minor = int(match.group(1)) if match else 0
            pivot = int(perm[minor - 1]) if 0 < minor <= n else -1
            span.set_attribute("error", True)
            raise NotPositiveDefiniteError(pivot) from e

    logger.debug(f"Cholesky: n={n}, bandwidth={bandwidth}")
    return CholFactor(n, perm, factor)
