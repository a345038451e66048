"""
Solver Services Module

The primal-dual active set iteration, its pluggable reduced-system solvers, and the
additive Schwarz preconditioners used inside them.
"""

from plate_obstacle.solvers.schwarz import (
    Decomposition,
    SchwarzPreconditioner,
    build_decomposition,
    one_level_setup,
    two_level_setup,
    apply,
    truncate,
    valid_subdomain_counts,
    coarse_level_for,
)
from plate_obstacle.solvers.reduced import (
    ReducedSolve,
    ReducedSolver,
    DirectSolver,
    CGSolver,
    SchwarzSolver,
    make_solver,
)
from plate_obstacle.solvers.pdas import (
    ActiveSet,
    KktReport,
    PdasIteration,
    PdasReport,
    active_set,
    pdas_step,
    pdas_solve,
    check_kkt,
    kkt_scale,
)

__all__ = [
    'Decomposition',
    'SchwarzPreconditioner',
    'build_decomposition',
    'one_level_setup',
    'two_level_setup',
    'apply',
    'truncate',
    'valid_subdomain_counts',
    'coarse_level_for',
    'ReducedSolve',
    'ReducedSolver',
    'DirectSolver',
    'CGSolver',
    'SchwarzSolver',
    'make_solver',
    'ActiveSet',
    'KktReport',
    'PdasIteration',
    'PdasReport',
    'active_set',
    'pdas_step',
    'pdas_solve',
    'check_kkt',
    'kkt_scale',
]
