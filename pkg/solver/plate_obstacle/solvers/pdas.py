"""
Primal-Dual Active Set Solver

Semi-smooth Newton iteration for the discrete obstacle problem

    A u - f = lambda,   lambda = max(0, lambda + c (psi - u))   (componentwise at the nodes).

Each step fixes u = psi on the active set A_k = {lambda_k + c (psi - u_k) > 0}, solves the
reduced system on the inactive nodes, and reads lambda off the active rows. The iteration
stops when the active set repeats.
"""

from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Tuple
import logging
import time

import numpy as np

from plate_obstacle.config import settings
from plate_obstacle.discretization.assembly import ObstacleProblem
from plate_obstacle.exceptions import (
    ParameterError,
    PlateObstacleError,
    ReducedSolveError,
    TimeBudgetExceeded,
)
from plate_obstacle.linalg.sparse import submatrix
from plate_obstacle.observability import get_tracer
from plate_obstacle.solvers.reduced import DirectSolver, ReducedSolve, ReducedSolver

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)


@dataclass(frozen=True, eq=False)
class ActiveSet:
    """Sorted, duplicate-free node ids."""
    indices: np.ndarray

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "ActiveSet":
        return cls(np.flatnonzero(mask).astype(np.int64))

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices.tolist())

    def __contains__(self, node) -> bool:
        return bool(np.isin(node, self.indices))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActiveSet):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    def mask(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=bool)
        out[self.indices] = True
        return out

    def inactive(self, n: int) -> np.ndarray:
        return np.flatnonzero(~self.mask(n)).astype(np.int64)


@dataclass
class PdasIteration:
    k: int
    active_size: int
    pcg_iterations: int
    kappa: float
    time: float


@dataclass
class PdasReport:
    u: np.ndarray
    lam: np.ndarray
    iterations: int
    active: ActiveSet
    converged: bool
    history: List[PdasIteration] = field(default_factory=list)
    timed_out: bool = False

    @property
    def avg_kappa(self) -> float:
        """Arithmetic mean of the per-iteration kappa estimates of iterations that produced one."""
        kappas = [it.kappa for it in self.history if it.kappa > 0.0]
        return float(np.mean(kappas)) if kappas else 0.0

    @property
    def total_time(self) -> float:
        return float(sum(it.time for it in self.history))


@dataclass
class KktReport:
    stationarity: float
    feasibility: float
    dual_feasibility: float
    complementarity: float
    nonsmooth: float
    tol: float
    scale: float
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def active_set(u: np.ndarray, lam: np.ndarray, psi: np.ndarray, c: float) -> ActiveSet:
    """{p : lambda(p) + c (psi(p) - u(p)) > 0}; ties are inactive."""
    if not (u.shape == lam.shape == psi.shape):
        raise ParameterError(f"vector shapes differ: u {u.shape}, lambda {lam.shape}, psi {psi.shape}")
    if not c > 0.0:
        raise ParameterError(f"PDAS constant must be positive, got {c}")
    return ActiveSet.from_mask(lam + c * (psi - u) > 0.0)


def _step(problem: ObstacleProblem, active: ActiveSet, lin_solver: ReducedSolver,
          deadline: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, Optional[ReducedSolve]]:
    n = problem.size
    act = active.indices
    inactive = active.inactive(n)
    A = problem.stiffness.full
    f, psi = problem.load, problem.obstacle

    u = np.zeros(n)
    u[act] = psi[act]
    solve = None
    if inactive.size:
        rhs = f[inactive] - A[inactive][:, act] @ psi[act]
        Atilde = submatrix(problem.stiffness, inactive)
        try:
            solve = lin_solver.solve(problem.cover, inactive, Atilde, rhs, deadline=deadline)
        except PlateObstacleError as e:
            raise ReducedSolveError(f"reduced solve failed: {e}", act) from e
        if solve.timed_out:
            raise TimeBudgetExceeded(f"{lin_solver.name} stopped after {solve.iterations} iterations")
        if not solve.converged:
            raise ReducedSolveError(
                f"{lin_solver.name} did not converge in {solve.iterations} iterations", act
            )
        u[inactive] = solve.solution

    lam = np.zeros(n)
    if act.size:
        lam[act] = A[act] @ u - f[act]
    return u, lam, solve


def pdas_step(problem: ObstacleProblem, active: ActiveSet,
              lin_solver: Optional[ReducedSolver] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    One semi-smooth Newton step: u = psi on the active set, reduced solve on the rest,
    lambda = (A u - f) on the active set and 0 elsewhere.
    """
    u, lam, _ = _step(problem, active, lin_solver or DirectSolver())
    return u, lam


def pdas_solve(problem: ObstacleProblem, u0: Optional[np.ndarray] = None,
               lambda0: Optional[np.ndarray] = None,
               lin_solver: Optional[ReducedSolver] = None,
               max_pdas: Optional[int] = None,
               time_budget: Optional[float] = None,
               on_iteration: Optional[Callable[[PdasIteration], None]] = None) -> PdasReport:
    """
    Run PDAS until the active set repeats.

    Args:
        problem: assembled obstacle problem
        u0, lambda0: initial iterate (zeros when omitted)
        lin_solver: reduced-system solver (direct Cholesky when omitted)
        max_pdas: iteration cap; exceeding it returns converged=False
        time_budget: seconds; checked between iterations and passed to PCG as a deadline.
            Exceeding it returns converged=False with timed_out=True and the last completed
            iterate. Preconditioner setup and direct solves are not interrupted.
        on_iteration: callback receiving each PdasIteration record
    """
    max_pdas = settings.max_pdas if max_pdas is None else max_pdas
    if max_pdas < 1:
        raise ParameterError(f"max_pdas must be >= 1, got {max_pdas}")
    lin_solver = lin_solver or DirectSolver()
    n = problem.size
    u = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float).copy()
    lam = np.zeros(n) if lambda0 is None else np.asarray(lambda0, dtype=float).copy()
    psi, c = problem.obstacle, problem.pdas_c

    active = active_set(u, lam, psi, c)
    history: List[PdasIteration] = []
    converged = timed_out = False
    start = time.perf_counter()
    deadline = None if time_budget is None else start + time_budget

    with tracer.start_as_current_span("pdas.solve") as span:
        span.set_attribute("pdas.level", problem.level)
        span.set_attribute("pdas.solver", lin_solver.name)

        for k in range(1, max_pdas + 1):
            tick = time.perf_counter()
            try:
                with tracer.start_as_current_span("pdas.step") as step_span:
                    u, lam, solve = _step(problem, active, lin_solver, deadline)
                    record = PdasIteration(
                        k=k,
                        active_size=len(active),
                        pcg_iterations=solve.iterations if solve else 0,
                        kappa=solve.kappa if solve else 0.0,
                        time=time.perf_counter() - tick,
                    )
                    step_span.set_attribute("pdas.k", k)
                    step_span.set_attribute("pdas.active_size", record.active_size)
                    step_span.set_attribute("pdas.pcg_iterations", record.pcg_iterations)
                    step_span.set_attribute("pdas.kappa", record.kappa)
            except TimeBudgetExceeded as e:
                timed_out = True
                logger.warning(f"PDAS stopped in iteration {k}: time budget {time_budget}s exhausted ({e})")
                break

            history.append(record)
            logger.info(
                f"PDAS k={k} |A|={record.active_size} pcg_its={record.pcg_iterations} "
                f"kappa={record.kappa:.4e} time={record.time:.3f}s"
            )
            if on_iteration:
                on_iteration(record)

            next_active = active_set(u, lam, psi, c)
            if next_active == active:
                converged = True
                break
            active = next_active
            if time_budget is not None and time.perf_counter() - start > time_budget:
                timed_out = True
                logger.warning(f"PDAS stopped after {k} iterations: time budget {time_budget}s exhausted")
                break

        span.set_attribute("pdas.iterations", len(history))
        span.set_attribute("pdas.converged", converged)

    if not converged and not timed_out:
        logger.warning(f"PDAS did not converge in {max_pdas} iterations")
    return PdasReport(u, lam, len(history), active, converged, history, timed_out)


def kkt_scale(problem: ObstacleProblem, u: np.ndarray) -> float:
    """1 + ||f||_inf + ||A||_inf ||u||_inf"""
    return float(1.0 + np.abs(problem.load).max(initial=0.0)
                 + problem.stiffness.norm_inf() * np.abs(u).max(initial=0.0))


def check_kkt(u: np.ndarray, lam: np.ndarray, problem: ObstacleProblem, tol: float = 1e-10,
              scale: Optional[float] = None) -> KktReport:
    """
    Verify the discrete optimality system.

    Stationarity, complementarity and the max-reformulation are measured against
    tol * scale (scale defaults to kkt_scale); primal and dual feasibility against tol.
    """
    scale = kkt_scale(problem, u) if scale is None else scale
    psi, c = problem.obstacle, problem.pdas_c
    gap = u - psi

    report = KktReport(
        stationarity=float(np.abs(problem.stiffness @ u - problem.load - lam).max(initial=0.0)),
        feasibility=float(gap.min(initial=np.inf)),
        dual_feasibility=float(lam.min(initial=np.inf)),
        complementarity=float(np.abs(gap * lam).max(initial=0.0)),
        nonsmooth=float(np.abs(lam - np.maximum(0.0, lam + c * (psi - u))).max(initial=0.0)),
        tol=tol,
        scale=scale,
    )
    if report.stationarity > tol * scale:
        report.failures.append('stationarity')
    if report.feasibility < -tol:
        report.failures.append('feasibility')
    if report.dual_feasibility < -tol:
        report.failures.append('dual_feasibility')
    if report.complementarity > tol * scale:
        report.failures.append('complementarity')
    if report.nonsmooth > tol * scale:
        report.failures.append('nonsmooth')
    return report
