"""
Additive Schwarz Preconditioners

Overlapping decompositions aligned with the patch grid, and one-level / two-level additive
Schwarz preconditioners for the reduced PDAS systems

    B_OL = sum_j I_j A_j^{-1} I_j^t,    B_TL = B_OL + P A_0^{-1} P^t,

where A_j is the principal submatrix of the reduced operator on the inactive nodes inside
D_j and P is the truncated coarse-to-fine prolongation.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sp
from scipy.linalg.lapack import dpstrf

from plate_obstacle.config import settings
from plate_obstacle.discretization.cover import Cover2D, coarse_to_fine
from plate_obstacle.exceptions import ParameterError, PlateObstacleError, SubdomainFactorizationError
from plate_obstacle.linalg.cholesky import CholFactor, cholesky
from plate_obstacle.linalg.sparse import SparseSym, submatrix
from plate_obstacle.models.schemas import OverlapKind, PreconditionerKind
from plate_obstacle.observability import get_tracer

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

# inclusive patch-index ranges (ix_lo, ix_hi, iy_lo, iy_hi)
PatchRect = Tuple[int, int, int, int]


def valid_subdomain_counts(level: int) -> List[int]:
    return [4 ** m for m in range(level + 1)]


def coarse_level_for(J: int) -> int:
    """Coarse cover level m with 2^m = sqrt(J)."""
    return int(round(math.log2(math.isqrt(J)))) if J > 1 else 0


@dataclass(frozen=True, eq=False)
class Decomposition:
    J: int
    grid: int
    overlap_kind: OverlapKind
    overlap_patches: int
    subdomain_rects: Tuple[PatchRect, ...]
    H: float
    delta: float
    Nc: int
    level: int

    def rect_bounds(self, cover: Cover2D, j: int) -> Tuple[float, float, float, float]:
        """Geometric open rectangle D_j = (x_lo, x_hi) x (y_lo, y_hi)."""
        ix_lo, ix_hi, iy_lo, iy_hi = self.subdomain_rects[j]
        (ax, _), (ay, _) = cover.domain
        hx, hy = cover.x_cover.cell_width, cover.y_cover.cell_width
        return (ax + ix_lo * hx, ax + (ix_hi + 1) * hx, ay + iy_lo * hy, ay + (iy_hi + 1) * hy)

    def node_mask(self, cover: Cover2D, j: int) -> np.ndarray:
        """Nodes lying in the open rectangle D_j."""
        x_lo, x_hi, y_lo, y_hi = self.rect_bounds(cover, j)
        x, y = cover.coords[:, 0], cover.coords[:, 1]
        return (x > x_lo) & (x < x_hi) & (y > y_lo) & (y < y_hi)

    def to_frame(self, cover: Cover2D) -> pd.DataFrame:
        rows = []
        for j, rect in enumerate(self.subdomain_rects):
            x_lo, x_hi, y_lo, y_hi = self.rect_bounds(cover, j)
            rows.append({
                'subdomain': j,
                'patch_x_lo': rect[0], 'patch_x_hi': rect[1],
                'patch_y_lo': rect[2], 'patch_y_hi': rect[3],
                'x_lo': x_lo, 'x_hi': x_hi, 'y_lo': y_lo, 'y_hi': y_hi,
                'n_nodes': int(self.node_mask(cover, j).sum()),
                'Nc': self.Nc, 'delta': self.delta, 'H': self.H,
                'overlap': self.overlap_kind.value,
            })
        return pd.DataFrame(rows)


def build_decomposition(cover: Cover2D, J: int, overlap_kind) -> Decomposition:
    """
    Split the 2^l x 2^l patch grid into sqrt(J) x sqrt(J) blocks and extend every block by
    one patch layer (small overlap) or ceil(block/4) layers (generous overlap), clipped at
    the boundary.
    """
    overlap_kind = OverlapKind(overlap_kind)
    n_x, n_y = cover.patch_grid
    valid = valid_subdomain_counts(cover.level)
    grid = math.isqrt(J) if J >= 1 else 0
    if J not in valid or grid * grid != J or n_x % grid or n_y % grid:
        raise ParameterError(f"J={J} is invalid at level {cover.level}; valid values: {valid}")

    block_x, block_y = n_x // grid, n_y // grid
    if overlap_kind is OverlapKind.SMALL:
        layers = 1
    else:
        layers = math.ceil(block_x / 4)

    rects = []
    multiplicity = np.zeros((n_x, n_y), dtype=np.int64)
    for bx in range(grid):
        for by in range(grid):
            rect = (
                max(0, bx * block_x - layers), min(n_x - 1, (bx + 1) * block_x - 1 + layers),
                max(0, by * block_y - layers), min(n_y - 1, (by + 1) * block_y - 1 + layers),
            )
            multiplicity[rect[0]:rect[1] + 1, rect[2]:rect[3] + 1] += 1
            rects.append(rect)

    (ax, bx_), _ = cover.domain
    decomposition = Decomposition(
        J=J,
        grid=grid,
        overlap_kind=overlap_kind,
        overlap_patches=layers,
        subdomain_rects=tuple(rects),
        H=(bx_ - ax) / grid,
        delta=2 * layers * cover.x_cover.cell_width,
        Nc=int(multiplicity.max()),
        level=cover.level,
    )
    logger.debug(f"Decomposition J={J} overlap={overlap_kind.value} layers={layers} Nc={decomposition.Nc}")
    return decomposition


@dataclass(frozen=True, eq=False)
class CoarseCorrection:
    prolongation: sp.csr_matrix  # reduced rows x retained coarse columns
    retained: np.ndarray
    factor: Tuple[np.ndarray, bool]

    def apply(self, r: np.ndarray) -> np.ndarray:
        coarse_rhs = self.prolongation.T @ r
        return self.prolongation @ scipy.linalg.cho_solve(self.factor, coarse_rhs)


@dataclass(frozen=True, eq=False)
class SchwarzPreconditioner:
    level_kind: PreconditionerKind
    n: int
    subspace_index_sets: Tuple[np.ndarray, ...]
    subdomain_ids: Tuple[int, ...]
    subdomain_factors: Tuple[CholFactor, ...]
    coarse: Optional[CoarseCorrection] = None

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply(self, r)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return apply(self, r)

    def to_dense(self) -> np.ndarray:
        """B as a dense matrix (small systems only)."""
        return np.column_stack([apply(self, e) for e in np.eye(self.n)]) if self.n else np.zeros((0, 0))


def _reduced_index(n_dofs: int, reduced_nodes: np.ndarray) -> np.ndarray:
    """Map node id -> reduced index, -1 for active nodes."""
    index = np.full(n_dofs, -1, dtype=np.int64)
    index[reduced_nodes] = np.arange(reduced_nodes.size)
    return index


def _subspace_sets(decomposition: Decomposition, cover: Cover2D,
                   reduced_nodes: np.ndarray) -> List[Tuple[int, np.ndarray]]:
    index = _reduced_index(cover.dof_count, reduced_nodes)
    sets = []
    for j in range(decomposition.J):
        members = index[decomposition.node_mask(cover, j)]
        members = np.sort(members[members >= 0])
        if members.size:
            sets.append((j, members))
    return sets


def _factor_subdomain(Atilde: SparseSym, j: int, indices: np.ndarray) -> CholFactor:
    try:
        return cholesky(submatrix(Atilde, indices))
    except PlateObstacleError as e:
        raise SubdomainFactorizationError(j, e) from e


def one_level_setup(Atilde: SparseSym, reduced_nodes: Sequence[int], decomposition: Decomposition,
                    cover: Cover2D, max_workers: Optional[int] = None) -> SchwarzPreconditioner:
    """
    One-level additive Schwarz preconditioner for the reduced operator.

    Args:
        Atilde: principal submatrix of A_h on the inactive nodes
        reduced_nodes: node id of every reduced index (the inactive nodes, in reduced order)
        decomposition: overlapping subdomains on `cover`
        cover: fine cover the nodes live on
        max_workers: thread count for the subdomain factorizations
    """
    reduced_nodes = np.asarray(reduced_nodes, dtype=np.int64)
    if Atilde.n != reduced_nodes.size:
        raise ParameterError(f"reduced operator has size {Atilde.n} but {reduced_nodes.size} reduced nodes given")
    workers = settings.max_workers if max_workers is None else max_workers

    with tracer.start_as_current_span("schwarz.one_level_setup") as span:
        sets = _subspace_sets(decomposition, cover, reduced_nodes)
        span.set_attribute("schwarz.J", decomposition.J)
        span.set_attribute("schwarz.reduced_size", Atilde.n)
        span.set_attribute("schwarz.subspaces", len(sets))

        if workers > 1 and len(sets) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                factors = list(pool.map(lambda item: _factor_subdomain(Atilde, *item), sets))
        else:
            factors = [_factor_subdomain(Atilde, j, indices) for j, indices in sets]

    return SchwarzPreconditioner(
        level_kind=PreconditionerKind.ONE_LEVEL,
        n=Atilde.n,
        subspace_index_sets=tuple(indices for _, indices in sets),
        subdomain_ids=tuple(j for j, _ in sets),
        subdomain_factors=tuple(factors),
    )


def _coarse_correction(Atilde: SparseSym, reduced_nodes: np.ndarray, fine_cover: Cover2D,
                       coarse_cover: Cover2D, pivot_tol: float) -> Optional[CoarseCorrection]:
    prolongation = coarse_to_fine(coarse_cover, fine_cover, keep=reduced_nodes)[reduced_nodes]
    coarse_matrix = (prolongation.T @ (Atilde.full @ prolongation)).toarray()
    coarse_matrix = 0.5 * (coarse_matrix + coarse_matrix.T)
    max_pivot = float(np.max(np.diag(coarse_matrix))) if coarse_matrix.size else 0.0
    if max_pivot <= 0.0:
        return None

    # pivoted Cholesky picks a numerically independent column subset
    _, piv, rank, info = dpstrf(coarse_matrix, tol=pivot_tol * max_pivot, lower=1)
    if info < 0:
        raise SubdomainFactorizationError(-1, ValueError(f"dpstrf argument {-info} invalid"))
    if rank == 0:
        return None
    retained = np.sort(piv[:rank] - 1)
    dropped = coarse_matrix.shape[0] - rank
    if dropped:
        logger.debug(f"Coarse space: dropped {dropped} of {coarse_matrix.shape[0]} truncated columns")

    try:
        factor = scipy.linalg.cho_factor(coarse_matrix[np.ix_(retained, retained)], lower=True)
    except scipy.linalg.LinAlgError as e:
        raise SubdomainFactorizationError(-1, e) from e
    return CoarseCorrection(prolongation[:, retained].tocsr(), retained, factor)


def two_level_setup(Atilde: SparseSym, reduced_nodes: Sequence[int], decomposition: Decomposition,
                    fine_cover: Cover2D, coarse_cover: Cover2D,
                    max_workers: Optional[int] = None,
                    pivot_tol: Optional[float] = None) -> SchwarzPreconditioner:
    """
    Two-level preconditioner: the one-level sum plus a coarse solve on T_h Pi_h V_H.

    Columns of the truncated prolongation that become (nearly) dependent are dropped by a
    pivoted Cholesky with threshold pivot_tol * (largest initial pivot). If every column
    drops, the preconditioner degrades to one-level with a warning.
    """
    reduced_nodes = np.asarray(reduced_nodes, dtype=np.int64)
    tol = settings.coarse_pivot_tol if pivot_tol is None else pivot_tol
    one_level = one_level_setup(Atilde, reduced_nodes, decomposition, fine_cover, max_workers)

    with tracer.start_as_current_span("schwarz.coarse_setup") as span:
        coarse = None
        if Atilde.n:
            coarse = _coarse_correction(Atilde, reduced_nodes, fine_cover, coarse_cover, tol)
        span.set_attribute("schwarz.coarse_level", coarse_cover.level)
        span.set_attribute("schwarz.coarse_retained", 0 if coarse is None else int(coarse.retained.size))

    if coarse is None and Atilde.n:
        logger.warning("Coarse space fully truncated; falling back to one-level behavior")

    return SchwarzPreconditioner(
        level_kind=PreconditionerKind.TWO_LEVEL,
        n=Atilde.n,
        subspace_index_sets=one_level.subspace_index_sets,
        subdomain_ids=one_level.subdomain_ids,
        subdomain_factors=one_level.subdomain_factors,
        coarse=coarse,
    )


def apply(B: SchwarzPreconditioner, r: np.ndarray) -> np.ndarray:
    """z = sum_j I_j A_j^{-1} I_j^t r (+ P A_0^{-1} P^t r for two-level)."""
    r = np.asarray(r, dtype=float)
    if r.shape != (B.n,):
        raise ParameterError(f"residual has shape {r.shape}, preconditioner expects ({B.n},)")
    z = np.zeros(B.n)
    for indices, factor in zip(B.subspace_index_sets, B.subdomain_factors):
        z[indices] += factor.solve(r[indices])
    if B.coarse is not None:
        z += B.coarse.apply(r)
    return z


def truncate(values: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Nodal truncation T_h: zero every value outside `keep`."""
    out = np.zeros_like(values)
    keep = np.asarray(keep, dtype=np.int64)
    out[keep] = values[keep]
    return out
