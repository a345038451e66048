"""
Test Biharmonic Assembly

Stiffness, load and obstacle vectors against independent brute-force quadrature on a
refined integration mesh.
"""

import sys
import os

# Add parent directory to path to import plate_obstacle modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from plate_obstacle.discretization import (
    assemble_load,
    assemble_stiffness,
    build_cover_2d,
    build_problem,
    energy_difference,
    obstacle_vector,
    dome_obstacle,
    prolongate,
)
from plate_obstacle.discretization.assembly import FAR_OBSTACLE
from plate_obstacle.exceptions import ParameterError
from plate_obstacle.linalg import cholesky, read_matrix_market, read_vector, write_matrix_market, write_vector


def brute_force_form(cover, v, w, refine=4):
    """int D^2 v : D^2 w on a refined tensor Gauss mesh, evaluated pointwise."""
    qx, wx = cover.x_cover.quadrature(None, refine)
    qy, wy = cover.y_cover.quadrature(None, refine)
    nx, ny = cover.x_cover.n_nodes, cover.y_cover.n_nodes
    bx = [cover.x_cover.basis_matrix(qx, m) for m in range(3)]
    by = [cover.y_cover.basis_matrix(qy, m) for m in range(3)]

    def hessian(c):
        c = c.reshape(nx, ny)
        return (bx[2] @ c @ by[0].T, bx[1] @ c @ by[1].T, bx[0] @ c @ by[2].T)

    vxx, vxy, vyy = hessian(v)
    wxx, wxy, wyy = hessian(w)
    integrand = vxx * wxx + 2.0 * vxy * wxy + vyy * wyy
    return float(wx @ integrand @ wy)


def test_stiffness_symmetric_positive(rng):
    cover = build_cover_2d(2)
    stiffness = assemble_stiffness(cover)
    dense = stiffness.to_dense()
    assert_array_equal(dense, dense.T)
    for _ in range(20):
        v = rng.standard_normal(cover.dof_count)
        assert v @ (stiffness @ v) > 0.0
    cholesky(stiffness)
    print(f"✓ level-2 stiffness: n={stiffness.n}, stored nnz={stiffness.nnz}")


def test_stiffness_matches_brute_force_quadrature(rng):
    cover = build_cover_2d(2)
    stiffness = assemble_stiffness(cover)
    for _ in range(5):
        v, w = rng.standard_normal(cover.dof_count), rng.standard_normal(cover.dof_count)
        expected = brute_force_form(cover, v, w)
        assert v @ (stiffness @ w) == pytest.approx(expected, rel=1e-10)


def test_stiffness_quadrature_exactness():
    """Doubling the Gauss points leaves every entry unchanged."""
    cover = build_cover_2d(3)
    base = assemble_stiffness(cover, n_gauss=6, drop_tolerance=0.0).to_dense()
    doubled = assemble_stiffness(cover, n_gauss=12, drop_tolerance=0.0).to_dense()
    assert np.max(np.abs(base - doubled)) <= 1e-12 * np.max(np.abs(base))


def test_load_zero_and_linearity(rng):
    cover = build_cover_2d(2)
    assert_array_equal(assemble_load(cover, lambda x, y: 0.0), np.zeros(cover.dof_count))

    a, b = rng.standard_normal(3), rng.standard_normal(3)
    f1 = lambda x, y: a[0] + a[1] * x ** 2 + a[2] * x * y
    f2 = lambda x, y: b[0] * y + b[1] * x ** 3 + b[2] * y ** 2
    both = assemble_load(cover, lambda x, y: f1(x, y) + f2(x, y))
    assert_allclose(both, assemble_load(cover, f1) + assemble_load(cover, f2), atol=1e-14)


def test_load_constant_against_refined_quadrature():
    cover = build_cover_2d(2)
    load = assemble_load(cover, lambda x, y: 1.0)
    refined = assemble_load(cover, lambda x, y: 1.0, n_gauss=8, refine=4)
    assert_allclose(load, refined, rtol=1e-12, atol=1e-15)

    # sum_g (1, phi_g) = int of the sum of all basis functions
    qx, wx = cover.x_cover.quadrature(None, 4)
    qy, wy = cover.y_cover.quadrature(None, 4)
    total = (wx @ cover.x_cover.basis_matrix(qx)).sum() * (wy @ cover.y_cover.basis_matrix(qy)).sum()
    assert load.sum() == pytest.approx(total, rel=1e-12)


def test_obstacle_vector():
    assert dome_obstacle(0.0, 0.0) == pytest.approx(1.0)
    assert dome_obstacle(0.5, 0.0) == pytest.approx(-0.1875)

    cover = build_cover_2d(2)
    psi = obstacle_vector(cover, dome_obstacle)
    assert_allclose(psi, dome_obstacle(cover.coords[:, 0], cover.coords[:, 1]))
    assert_array_equal(obstacle_vector(cover, lambda x, y: -1.0e6), np.full(cover.dof_count, -1.0e6))


@pytest.mark.parametrize("level", [5, 6])
def test_obstacle_negative_on_boundary_patches(level):
    cover = build_cover_2d(level)
    psi = obstacle_vector(cover, dome_obstacle)
    last = cover.x_cover.n_patches - 1
    patches = cover.node_patches
    touching = np.isin(patches[:, 0], [0, last]) | np.isin(patches[:, 1], [0, last])
    assert np.all(psi[touching] < 0.0)


def test_build_problem_kinds():
    dome = build_problem(2, 'dome', pdas_c=50.0)
    assert dome.pdas_c == 50.0
    assert dome.size == 64 and dome.level == 2
    assert_array_equal(dome.load, np.zeros(64))

    free = build_problem(2, 'free')
    assert np.all(free.obstacle == FAR_OBSTACLE)
    assert free.load.sum() > 0.0

    with pytest.raises(ParameterError):
        build_problem(2, 'membrane')
    with pytest.raises(ParameterError):
        build_problem(2, 'dome', pdas_c=0.0)


def test_energy_difference(free_problem):
    coarse, fine = free_problem(2), free_problem(3)
    u = np.linalg.solve(coarse.stiffness.to_dense(), coarse.load)
    assert energy_difference(coarse, u, coarse, u) == pytest.approx(0.0, abs=1e-12)

    u_fine = np.linalg.solve(fine.stiffness.to_dense(), fine.load)
    diff = prolongate(coarse.cover, fine.cover, u) - u_fine
    expected = np.sqrt(diff @ (fine.stiffness @ diff))
    assert energy_difference(coarse, u, fine, u_fine) == pytest.approx(expected)
    assert expected > 0.0


def test_matrix_market_export(tmp_path):
    stiffness = assemble_stiffness(build_cover_2d(2))
    write_matrix_market(stiffness, tmp_path / "A.mtx", comment="level 2")
    loaded = read_matrix_market(tmp_path / "A.mtx")
    assert loaded.n == stiffness.n
    assert_allclose(loaded.to_dense(), stiffness.to_dense(), rtol=1e-14)

    load = assemble_load(build_cover_2d(2), lambda x, y: 1.0)
    write_vector(load, tmp_path / "f.txt")
    assert_array_equal(read_vector(tmp_path / "f.txt"), load)
