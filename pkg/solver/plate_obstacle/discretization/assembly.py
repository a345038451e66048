"""
Biharmonic Assembly

Stiffness for a(v, w) = int D^2 v : D^2 w, load vectors and nodal obstacle vectors on a
flat-top PUM cover.

Every global basis function is a product X_a(x) Y_b(y) of 1D factors, so the tensor Gauss
rule on the breakpoint mesh factorizes:

    A = K2 (x) M + 2 K1 (x) K1 + M (x) K2,    K_m[a, a'] = int X_a^(m) X_a'^(m)

with each 1D integral evaluated by the breakpoint-aligned composite Gauss rule.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple
import logging

import numpy as np
import scipy.sparse as sp

from plate_obstacle.config import settings
from plate_obstacle.discretization.cover import (
    DEFAULT_DOMAIN,
    Cover1D,
    Cover2D,
    Domain,
    build_cover_2d,
    coarse_to_fine,
)
from plate_obstacle.exceptions import ParameterError
from plate_obstacle.linalg.sparse import SparseSym
from plate_obstacle.observability import get_tracer

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

PointFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

PROBLEM_KINDS = ('dome', 'free')
FAR_OBSTACLE = -1.0e6


@dataclass(frozen=True, eq=False)
class ObstacleProblem:
    """A_h, f, psi and c. `cover` may be None for purely algebraic problems."""
    cover: Optional[Cover2D]
    stiffness: SparseSym
    load: np.ndarray
    obstacle: np.ndarray
    pdas_c: float = 100.0
    kind: str = 'custom'

    @property
    def level(self) -> int:
        return self.cover.level if self.cover is not None else 0

    @property
    def size(self) -> int:
        return self.stiffness.n


def dome_obstacle(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """psi(x) = 1 - 5|x|^2 + |x|^4"""
    r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    return 1.0 - 5.0 * r2 + r2 ** 2


def _gram_1d(cover: Cover1D, order: int, n_gauss: Optional[int] = None,
             refine: int = 1) -> np.ndarray:
    """int X_a^(order) X_a'^(order) over the interval, symmetrized exactly."""
    points, weights = cover.quadrature(n_gauss, refine)
    values = cover.basis_matrix(points, order)
    gram = values.T @ (weights[:, None] * values)
    return 0.5 * (gram + gram.T)


def one_dimensional_matrices(cover: Cover1D, n_gauss: Optional[int] = None,
                             refine: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mass, first-derivative and second-derivative Gram matrices of the 1D factors."""
    return tuple(_gram_1d(cover, order, n_gauss, refine) for order in (0, 1, 2))


def assemble_stiffness(cover: Cover2D, n_gauss: Optional[int] = None,
                       drop_tolerance: Optional[float] = None) -> SparseSym:
    """Stiffness matrix A_h of a(v, w) = int D^2 v : D^2 w dx."""
    drop = settings.drop_tolerance if drop_tolerance is None else drop_tolerance
    with tracer.start_as_current_span("assembly.stiffness") as span:
        span.set_attribute("cover.level", cover.level)
        span.set_attribute("cover.dofs", cover.dof_count)

        mx, k1x, k2x = (sp.csr_matrix(m) for m in one_dimensional_matrices(cover.x_cover, n_gauss))
        my, k1y, k2y = (sp.csr_matrix(m) for m in one_dimensional_matrices(cover.y_cover, n_gauss))
        full = sp.kron(k2x, my) + 2.0 * sp.kron(k1x, k1y) + sp.kron(mx, k2y)
        stiffness = SparseSym.from_matrix(full, drop_tolerance=drop)

        span.set_attribute("assembly.nnz", stiffness.nnz)
    logger.info(f"Assembled level-{cover.level} stiffness: n={stiffness.n}, stored nnz={stiffness.nnz}")
    return stiffness


def assemble_mass(cover: Cover2D, n_gauss: Optional[int] = None) -> SparseSym:
    """L2 Gram matrix of the global basis (diagnostics only)."""
    mx = sp.csr_matrix(_gram_1d(cover.x_cover, 0, n_gauss))
    my = sp.csr_matrix(_gram_1d(cover.y_cover, 0, n_gauss))
    return SparseSym.from_matrix(sp.kron(mx, my))


def assemble_load(cover: Cover2D, f: PointFunction, n_gauss: Optional[int] = None,
                  refine: int = 1) -> np.ndarray:
    """
    Load vector (f, phi_g).

    Args:
        cover: 2D cover
        f: vectorized callable f(x, y); scalars are broadcast
        n_gauss: Gauss points per cell and direction
        refine: split every breakpoint cell into this many subcells
    """
    with tracer.start_as_current_span("assembly.load"):
        qx, wx = cover.x_cover.quadrature(n_gauss, refine)
        qy, wy = cover.y_cover.quadrature(n_gauss, refine)
        gx, gy = np.meshgrid(qx, qy, indexing='ij')
        values = np.broadcast_to(np.asarray(f(gx, gy), dtype=float), gx.shape)
        bx = cover.x_cover.basis_matrix(qx) * wx[:, None]
        by = cover.y_cover.basis_matrix(qy) * wy[:, None]
        return (bx.T @ values @ by).ravel()


def obstacle_vector(cover: Cover2D, psi: PointFunction) -> np.ndarray:
    """psi evaluated at every node, in dof order."""
    coords = cover.coords
    return np.broadcast_to(
        np.asarray(psi(coords[:, 0], coords[:, 1]), dtype=float), (cover.dof_count,)
    ).copy()


def build_problem(level: int, kind: str = 'dome', pdas_c: Optional[float] = None,
                  domain: Domain = DEFAULT_DOMAIN,
                  transition_ratio: Optional[float] = None) -> ObstacleProblem:
    """
    Assemble a complete obstacle problem.

    kind='dome': f = 0, psi = 1 - 5|x|^2 + |x|^4.
    kind='free': f = 1 and psi far below the plate, so the obstacle never binds.
    """
    if kind not in PROBLEM_KINDS:
        raise ParameterError(f"unknown problem kind {kind!r}; expected one of {PROBLEM_KINDS}")
    c = settings.pdas_c if pdas_c is None else pdas_c
    if not c > 0.0:
        raise ParameterError(f"PDAS constant must be positive, got {c}")

    cover = build_cover_2d(level, domain, transition_ratio)
    stiffness = assemble_stiffness(cover)
    if kind == 'dome':
        load = np.zeros(cover.dof_count)
        obstacle = obstacle_vector(cover, dome_obstacle)
    else:
        load = assemble_load(cover, lambda x, y: 1.0)
        obstacle = np.full(cover.dof_count, FAR_OBSTACLE)
    return ObstacleProblem(cover, stiffness, load, obstacle, c, kind)


def prolongate(coarse: Cover2D, fine: Cover2D, coefficients: np.ndarray) -> np.ndarray:
    """Pi_h on the fine cover of a coarse-cover function."""
    return coarse_to_fine(coarse, fine) @ coefficients


def energy_difference(coarse: ObstacleProblem, u_coarse: np.ndarray,
                      fine: ObstacleProblem, u_fine: np.ndarray) -> float:
    """|Pi_h u_coarse - u_fine|_{H^2} measured with the fine stiffness form."""
    diff = prolongate(coarse.cover, fine.cover, u_coarse) - u_fine
    return float(np.sqrt(max(diff @ (fine.stiffness @ diff), 0.0)))
