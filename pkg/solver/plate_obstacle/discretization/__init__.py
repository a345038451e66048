"""
Discretization Module

Flat-top partition of unity covers, global PUM shape functions, interpolation and
biharmonic assembly.
"""

from plate_obstacle.discretization.cover import (
    Cover1D,
    Cover2D,
    Node,
    Patch1D,
    build_cover_1d,
    build_cover_2d,
    pu_eval_1d,
    shape_eval,
    interpolate,
    interpolate_function,
    coarse_to_fine,
    dump_cover_csv,
)
from plate_obstacle.discretization.assembly import (
    ObstacleProblem,
    assemble_stiffness,
    assemble_mass,
    assemble_load,
    obstacle_vector,
    build_problem,
    dome_obstacle,
    prolongate,
    energy_difference,
)

__all__ = [
    'Cover1D',
    'Cover2D',
    'Node',
    'Patch1D',
    'build_cover_1d',
    'build_cover_2d',
    'pu_eval_1d',
    'shape_eval',
    'interpolate',
    'interpolate_function',
    'coarse_to_fine',
    'dump_cover_csv',
    'ObstacleProblem',
    'assemble_stiffness',
    'assemble_mass',
    'assemble_load',
    'obstacle_vector',
    'build_problem',
    'dome_obstacle',
    'prolongate',
    'energy_difference',
]
