"""
Reduced-System Solvers

Pluggable solvers for the auxiliary system A_II u_I = f_I - A_IA psi_A of one PDAS step:
a direct Cholesky solve, unpreconditioned CG, and PCG with one-level or two-level
additive Schwarz preconditioning.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Protocol
import logging
import time

import numpy as np

from plate_obstacle.discretization.cover import Cover2D, build_cover_2d
from plate_obstacle.exceptions import ParameterError
from plate_obstacle.linalg.cholesky import cholesky
from plate_obstacle.linalg.krylov import pcg
from plate_obstacle.linalg.sparse import SparseSym
from plate_obstacle.models.schemas import OverlapKind, PreconditionerKind
from plate_obstacle.solvers.schwarz import (
    Decomposition,
    SchwarzPreconditioner,
    build_decomposition,
    coarse_level_for,
    one_level_setup,
    two_level_setup,
)

logger = logging.getLogger(__name__)


@dataclass
class ReducedSolve:
    solution: np.ndarray
    iterations: int = 0
    kappa: float = 0.0
    converged: bool = True
    setup_time: float = 0.0
    solve_time: float = 0.0
    timed_out: bool = False


class ReducedSolver(Protocol):
    name: str

    def solve(self, cover: Cover2D, reduced_nodes: np.ndarray, Atilde: SparseSym,
              rhs: np.ndarray, deadline: Optional[float] = None) -> ReducedSolve:
        ...


class DirectSolver:
    """Sparse Cholesky on the reduced operator; the deadline is ignored."""

    name = "direct"

    def solve(self, cover, reduced_nodes, Atilde, rhs, deadline=None) -> ReducedSolve:
        start = time.perf_counter()
        factor = cholesky(Atilde)
        setup = time.perf_counter() - start
        solution = factor.solve(rhs)
        return ReducedSolve(solution, setup_time=setup, solve_time=time.perf_counter() - start - setup)


class CGSolver:
    """Conjugate gradients without a preconditioner."""

    name = "none"

    def __init__(self, rel_tol: Optional[float] = None, max_iter_factor: Optional[int] = None):
        self.rel_tol = rel_tol
        self.max_iter_factor = max_iter_factor

    def solve(self, cover, reduced_nodes, Atilde, rhs, deadline=None) -> ReducedSolve:
        start = time.perf_counter()
        max_iter = self.max_iter_factor * max(Atilde.n, 1) if self.max_iter_factor else None
        result = pcg(Atilde, lambda r: r, rhs, self.rel_tol, max_iter, deadline=deadline)
        return ReducedSolve(result.solution, result.iterations, result.kappa_estimate,
                            result.converged, 0.0, time.perf_counter() - start, result.timed_out)


class SchwarzSolver:
    """
    PCG with an additive Schwarz preconditioner rebuilt for every reduced system.

    The decomposition (and, for two levels, the coarse cover at level log2(sqrt(J))) is
    built once per fine cover and reused across PDAS iterations.
    """

    def __init__(self, J: int, overlap, kind=PreconditionerKind.ONE_LEVEL,
                 rel_tol: Optional[float] = None, max_iter_factor: Optional[int] = None,
                 max_workers: Optional[int] = None):
        self.J = J
        self.overlap = OverlapKind(overlap)
        self.kind = PreconditionerKind(kind)
        if self.kind is PreconditionerKind.NONE:
            raise ParameterError("SchwarzSolver needs a one-level or two-level kind; use CGSolver for none")
        if self.kind is PreconditionerKind.TWO_LEVEL and J < 4:
            raise ParameterError("two-level preconditioning needs J >= 4")
        self.rel_tol = rel_tol
        self.max_iter_factor = max_iter_factor
        self.max_workers = max_workers
        self.name = f"{self.kind.value}-level J={J} {self.overlap.value}"
        self._decompositions: Dict[Cover2D, Decomposition] = {}
        self._coarse_covers: Dict[Cover2D, Cover2D] = {}

    def decomposition_for(self, cover: Cover2D) -> Decomposition:
        if cover not in self._decompositions:
            self._decompositions[cover] = build_decomposition(cover, self.J, self.overlap)
        return self._decompositions[cover]

    def coarse_cover_for(self, cover: Cover2D) -> Cover2D:
        if cover not in self._coarse_covers:
            self._coarse_covers[cover] = build_cover_2d(
                coarse_level_for(self.J), cover.domain, cover.x_cover.transition_ratio
            )
        return self._coarse_covers[cover]

    def preconditioner(self, cover: Cover2D, reduced_nodes: np.ndarray,
                       Atilde: SparseSym) -> SchwarzPreconditioner:
        decomposition = self.decomposition_for(cover)
        if self.kind is PreconditionerKind.ONE_LEVEL:
            return one_level_setup(Atilde, reduced_nodes, decomposition, cover, self.max_workers)
        return two_level_setup(Atilde, reduced_nodes, decomposition, cover,
                               self.coarse_cover_for(cover), self.max_workers)

    def solve(self, cover, reduced_nodes, Atilde, rhs, deadline=None) -> ReducedSolve:
        start = time.perf_counter()
        B = self.preconditioner(cover, reduced_nodes, Atilde)
        setup = time.perf_counter() - start
        max_iter = self.max_iter_factor * max(Atilde.n, 1) if self.max_iter_factor else None
        result = pcg(Atilde, B, rhs, self.rel_tol, max_iter, deadline=deadline)
        return ReducedSolve(result.solution, result.iterations, result.kappa_estimate,
                            result.converged, setup, time.perf_counter() - start - setup,
                            result.timed_out)


def make_solver(kind, J: int = 1, overlap=OverlapKind.SMALL, rel_tol: Optional[float] = None,
                max_iter_factor: Optional[int] = None, max_workers: Optional[int] = None) -> ReducedSolver:
    """Solver for a preconditioner kind: 'none' -> CG, 'one'/'two' -> Schwarz PCG."""
    kind = PreconditionerKind(kind)
    if kind is PreconditionerKind.NONE:
        return CGSolver(rel_tol, max_iter_factor)
    return SchwarzSolver(J, overlap, kind, rel_tol, max_iter_factor, max_workers)
