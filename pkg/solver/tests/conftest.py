"""Shared fixtures: assembled problems are cached per session."""

import sys
import os

# Add parent directory to path to import plate_obstacle modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import numpy as np
import pytest

from plate_obstacle.config import settings
from plate_obstacle.discretization.assembly import ObstacleProblem, build_problem
from plate_obstacle.linalg.sparse import SparseSym

_PROBLEMS = {}


def cached_problem(level: int, kind: str = 'dome', pdas_c: float = 100.0) -> ObstacleProblem:
    key = (level, kind, pdas_c)
    if key not in _PROBLEMS:
        _PROBLEMS[key] = build_problem(level, kind, pdas_c)
    return _PROBLEMS[key]


@pytest.fixture
def rng():
    """Generator seeded from PLATE_SEED."""
    return np.random.default_rng(settings.seed)


@pytest.fixture(params=[1, 2, 3])
def small_level(request):
    return request.param


@pytest.fixture
def dome_problem():
    """build(level) for the dome obstacle, assembled once per level."""
    return lambda level, pdas_c=100.0: cached_problem(level, 'dome', pdas_c)


@pytest.fixture
def free_problem():
    """build(level) for the obstacle-free plate with f = 1."""
    return lambda level: cached_problem(level, 'free')


def algebraic_problem(matrix, load, obstacle, pdas_c=100.0) -> ObstacleProblem:
    """Obstacle problem without a cover, for hand-checked toy systems."""
    return ObstacleProblem(None, SparseSym.from_matrix(np.asarray(matrix, dtype=float)),
                           np.asarray(load, dtype=float), np.asarray(obstacle, dtype=float), pdas_c)


def dihedral_permutations(coords: np.ndarray):
    """Node permutations for the 8 symmetries of the centred square."""
    key = {tuple(np.round(p, 12)): g for g, p in enumerate(coords)}
    x, y = coords[:, 0], coords[:, 1]
    maps = [
        (x, y), (-x, y), (x, -y), (-x, -y),
        (y, x), (-y, x), (y, -x), (-y, -x),
    ]
    perms = []
    for mx, my in maps:
        image = np.column_stack([mx, my])
        perms.append(np.array([key[tuple(np.round(p, 12))] for p in image]))
    return perms
