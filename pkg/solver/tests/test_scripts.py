"""
Test Export Scripts

Runs the problem export and decomposition dump builders on a small level.
"""

import sys
import os

# Add parent directory to path to import plate_obstacle modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'scripts'))

import numpy as np
import pandas as pd
from numpy.testing import assert_allclose

from dump_decomposition import DecompositionDumper
from export_problem import ProblemExporter
from plate_obstacle.linalg import read_matrix_market, read_vector
from tests.conftest import cached_problem


def test_export_problem(tmp_path):
    ProblemExporter(2, 'dome', str(tmp_path)).build(solve=True)
    problem = cached_problem(2)
    assert_allclose(read_matrix_market(tmp_path / 'stiffness.mtx').to_dense(),
                    problem.stiffness.to_dense(), rtol=1e-14)
    assert_allclose(read_vector(tmp_path / 'obstacle.txt'), problem.obstacle)
    u = read_vector(tmp_path / 'u.txt')
    assert u.shape == (problem.size,)
    assert np.all(u >= problem.obstacle - 1e-10)
    assert len(pd.read_csv(tmp_path / 'nodes.csv')) == problem.size


def test_dump_decomposition(tmp_path):
    DecompositionDumper(3, 4, 'small', str(tmp_path)).build()
    subdomains = pd.read_csv(tmp_path / 'subdomains.csv')
    membership = pd.read_csv(tmp_path / 'membership.csv')
    assert len(subdomains) == 4
    assert membership['count'].min() >= 1
    assert membership['count'].max() == subdomains['Nc'].iloc[0]
