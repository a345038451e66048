"""
Experiment Runner

Drives the experiment matrix levels x J x overlap x preconditioner. Every
(J, overlap, preconditioner) column is swept level by level, warm-starting PDAS from the
previous level's solution interpolated onto the finer cover.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple
import logging
import threading
import time

import numpy as np

from plate_obstacle.discretization.assembly import ObstacleProblem, build_problem, prolongate
from plate_obstacle.exceptions import PlateObstacleError, ReducedSolveError
from plate_obstacle.models.schemas import (
    CellStatus,
    ExperimentCell,
    ExperimentConfig,
    OverlapKind,
    PdasIterationRecord,
    PreconditionerKind,
)
from plate_obstacle.observability import get_tracer
from plate_obstacle.solvers.pdas import PdasIteration, pdas_solve
from plate_obstacle.solvers.reduced import make_solver
from plate_obstacle.solvers.schwarz import valid_subdomain_counts

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

Column = Tuple[int, OverlapKind, PreconditionerKind]

RUN_LOG_NAME = "run_log.jsonl"
CELLS_NAME = "cells.csv"


def experiment_columns(config: ExperimentConfig) -> List[Column]:
    """
    Columns in output order. The unpreconditioned column has no decomposition and is
    keyed as J=1 with small overlap.
    """
    columns: List[Column] = []
    for prec in config.preconditioners:
        if prec is PreconditionerKind.NONE:
            columns.append((1, OverlapKind.SMALL, prec))
            continue
        for J in config.J_values:
            for overlap in config.overlaps:
                columns.append((J, overlap, prec))
    return columns


def skip_reason(level: int, J: int, prec: PreconditionerKind) -> Optional[str]:
    """Why (level, J, prec) has no experiment, or None when it is valid."""
    if prec is PreconditionerKind.NONE:
        return None
    if J not in valid_subdomain_counts(level):
        return f"J={J} needs a {int(np.sqrt(J))}x{int(np.sqrt(J))} block split of the 2^{level} patch grid"
    if prec is PreconditionerKind.TWO_LEVEL and J < 4:
        return "two-level preconditioning needs J >= 4"
    return None


class ProblemCache:
    """Assembled problems per level, shared across columns (assembly is never timed)."""

    def __init__(self, kind: str, pdas_c: float):
        self.kind = kind
        self.pdas_c = pdas_c
        self._problems: Dict[int, ObstacleProblem] = {}
        self._lock = threading.Lock()

    def get(self, level: int) -> ObstacleProblem:
        with self._lock:
            if level not in self._problems:
                start = time.perf_counter()
                self._problems[level] = build_problem(level, self.kind, self.pdas_c)
                logger.info(f"Assembled level {level} ({self._problems[level].size} dofs) "
                            f"in {time.perf_counter() - start:.2f}s")
            return self._problems[level]


@dataclass
class ColumnResult:
    cells: List[ExperimentCell] = field(default_factory=list)
    records: List[PdasIterationRecord] = field(default_factory=list)


def run_column(config: ExperimentConfig, column: Column, problems: ProblemCache,
               on_record: Optional[Callable[[PdasIterationRecord], None]] = None) -> ColumnResult:
    """Sweep one column over the configured levels, ascending."""
    J, overlap, prec = column
    result = ColumnResult()
    previous: Optional[Tuple[ObstacleProblem, np.ndarray]] = None
    stalled: Optional[int] = None
    solver = None

    for level in config.levels:
        cell = ExperimentCell(level=level, J=J, overlap=overlap, preconditioner=prec)
        reason = skip_reason(level, J, prec)
        if reason:
            cell.status = CellStatus.SKIPPED
            cell.message = reason
            result.cells.append(cell)
            continue
        if stalled is not None:
            cell.status = CellStatus.DNC
            cell.message = f"level {stalled} did not complete"
            result.cells.append(cell)
            continue
        if solver is None:
            solver = make_solver(prec, J, overlap, config.pcg_rel_tol, config.max_pcg_factor,
                                 config.max_workers)

        with tracer.start_as_current_span("experiment.cell") as span:
            span.set_attribute("cell.level", level)
            span.set_attribute("cell.J", J)
            span.set_attribute("cell.overlap", overlap.value)
            span.set_attribute("cell.preconditioner", prec.value)

            def record(it: PdasIteration):
                entry = PdasIterationRecord(level=level, J=J, overlap=overlap, preconditioner=prec,
                                            k=it.k, active_size=it.active_size,
                                            pcg_iterations=it.pcg_iterations, kappa=it.kappa,
                                            time=it.time)
                result.records.append(entry)
                if on_record:
                    on_record(entry)

            try:
                problem = problems.get(level)
                u0 = None
                if previous is not None:
                    u0 = prolongate(previous[0].cover, problem.cover, previous[1])

                start = time.perf_counter()
                report = pdas_solve(problem, u0=u0, lin_solver=solver, max_pdas=config.max_pdas,
                                    time_budget=config.budget_sec, on_iteration=record)
                cell.t_solve = time.perf_counter() - start
                cell.pdas_iterations = report.iterations
                cell.avg_kappa = report.avg_kappa

                if report.converged:
                    previous = (problem, report.u)
                elif report.timed_out:
                    cell.status = CellStatus.DNC
                    cell.message = f"time budget {config.budget_sec}s exhausted"
                else:
                    cell.status = CellStatus.DNC
                    cell.message = f"PDAS did not converge in {config.max_pdas} iterations"
            except ReducedSolveError as e:
                cell.status = CellStatus.DNC if e.__cause__ is None else CellStatus.ERROR
                cell.message = str(e)
            except PlateObstacleError as e:
                cell.status = CellStatus.ERROR
                cell.message = str(e)

            if cell.status is not CellStatus.OK:
                logger.warning(f"Cell level={level} J={J} {overlap.value} {prec.value}: "
                               f"{cell.status.value} ({cell.message})")
                if cell.status is CellStatus.DNC:
                    stalled = level
                else:
                    previous = None
            span.set_attribute("cell.status", cell.status.value)
            span.set_attribute("cell.avg_kappa", cell.avg_kappa)
            span.set_attribute("cell.pdas_iterations", cell.pdas_iterations)

        logger.info(f"level={level} J={J} overlap={overlap.value} prec={prec.value}: "
                    f"{cell.status.value} iters={cell.pdas_iterations} "
                    f"avg_kappa={cell.avg_kappa:.4e} t={cell.t_solve:.2f}s")
        result.cells.append(cell)
    return result


def run_experiment(config: ExperimentConfig,
                   on_record: Optional[Callable[[PdasIterationRecord], None]] = None,
                   workers: Optional[int] = None) -> List[ExperimentCell]:
    """
    Run every configured cell and return them column by column, levels ascending.

    Columns are independent and may run on a thread pool (workers > 1); the returned
    order does not depend on scheduling.
    """
    problems = ProblemCache(config.problem, config.pdas_c)
    columns = experiment_columns(config)
    logger.info(f"Running {len(columns)} columns over levels {config.levels}")

    with tracer.start_as_current_span("experiment.run") as span:
        span.set_attribute("experiment.columns", len(columns))
        span.set_attribute("experiment.levels", str(config.levels))

        if workers and workers > 1 and len(columns) > 1:
            # records are reported after each column finishes so the log stays grouped
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda col: run_column(config, col, problems), columns))
            if on_record:
                for column_result in results:
                    for entry in column_result.records:
                        on_record(entry)
        else:
            results = [run_column(config, col, problems, on_record) for col in columns]

    return [cell for column_result in results for cell in column_result.cells]


class RunLog:
    """JSON-lines writer with one record per PDAS iteration."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, 'w')

    def __call__(self, entry: PdasIterationRecord):
        self._handle.write(entry.model_dump_json() + "\n")
        self._handle.flush()

    def close(self):
        self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
