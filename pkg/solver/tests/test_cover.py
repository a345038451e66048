"""
Test Flat-top PUM Cover

Checks the 1D and 2D covers, the flat-top partition of unity, the nodal global basis,
interpolation and the truncated coarse-to-fine prolongation.
"""

import sys
import os

# Add parent directory to path to import plate_obstacle modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from plate_obstacle.discretization import (
    assemble_mass,
    build_cover_1d,
    build_cover_2d,
    coarse_to_fine,
    dump_cover_csv,
    interpolate,
    interpolate_function,
    dome_obstacle,
    pu_eval_1d,
    shape_eval,
)
from plate_obstacle.exceptions import ParameterError


@pytest.mark.parametrize("level", range(1, 9))
def test_dof_count(level):
    """dim V_h = (3 * 2^l - 4)^2"""
    cover = build_cover_2d(level)
    assert cover.dof_count == (3 * 2 ** level - 4) ** 2
    assert cover.x_cover.n_nodes == 3 * 2 ** level - 4


def test_dof_count_endpoints():
    assert build_cover_2d(1).dof_count == 4
    assert build_cover_2d(2).dof_count == 64
    assert build_cover_1d(8).n_nodes == 764
    assert build_cover_2d(8).dof_count == 583696
    print("✓ dof counts run from 4 to 583696")


def test_cover_1d_level_1():
    cover = build_cover_1d(1, (-0.5, 0.5), 0.25)
    assert cover.n_patches == 2
    assert [p.boundary for p in cover.patches] == ['left', 'right']
    assert cover.n_nodes == 2
    # single node at the flat-top endpoint away from the boundary
    assert_allclose(cover.node_coords, [-0.125, 0.125])


def test_cover_1d_level_3():
    cover = build_cover_1d(3)
    assert cover.n_patches == 8
    assert [len(p.nodes) for p in cover.patches] == [1] + [3] * 6 + [1]
    assert cover.n_nodes == 20


def test_cover_1d_invariants():
    cover = build_cover_1d(4, (-0.5, 0.5), 0.25)
    h, d = cover.cell_width, cover.half_band
    assert np.all(np.diff(cover.node_coords) > 0), "node coordinates must strictly increase"
    for i, patch in enumerate(cover.patches):
        lo, hi = -0.5 + i * h, -0.5 + (i + 1) * h
        assert_allclose(patch.support, (max(-0.5, lo - d), min(0.5, hi + d)))
        assert_allclose(patch.flat_top, (lo + d, hi - d))
        assert patch.support[0] <= patch.flat_top[0] < patch.flat_top[1] <= patch.support[1]
        for q in patch.nodes:
            assert patch.flat_top[0] <= q <= patch.flat_top[1]
    for left, right in zip(cover.patches, cover.patches[1:]):
        assert left.flat_top[1] < right.flat_top[0], "flat-tops must be disjoint"


@pytest.mark.parametrize("kwargs", [
    {'level': 0},
    {'level': -2},
    {'level': 2.5},
    {'level': 2, 'transition_ratio': 0.0},
    {'level': 2, 'transition_ratio': 0.5},
    {'level': 2, 'interval': (1.0, 0.0)},
])
def test_cover_1d_rejects_bad_parameters(kwargs):
    with pytest.raises(ParameterError):
        build_cover_1d(**kwargs)


def test_pu_flat_top_and_support():
    cover = build_cover_1d(3)
    for i, patch in enumerate(cover.patches):
        mid = 0.5 * (patch.flat_top[0] + patch.flat_top[1])
        assert pu_eval_1d(cover, i, mid, 0) == pytest.approx(1.0)
        assert pu_eval_1d(cover, i, mid, 1) == pytest.approx(0.0)
        assert pu_eval_1d(cover, i, mid, 2) == pytest.approx(0.0)

    # far outside the support of patch 0
    for order in (0, 1, 2):
        assert pu_eval_1d(cover, 0, 0.4, order) == 0.0

    with pytest.raises(ParameterError):
        pu_eval_1d(cover, cover.n_patches, 0.0)
    with pytest.raises(ParameterError):
        pu_eval_1d(cover, 0, 0.75)


def test_partition_of_unity(rng):
    cover = build_cover_1d(4)
    x = rng.uniform(-0.5, 0.5, 10_000)
    values = np.array([cover.pu_values(i, x, 0) for i in range(cover.n_patches)])
    first = np.array([cover.pu_values(i, x, 1) for i in range(cover.n_patches)])
    second = np.array([cover.pu_values(i, x, 2) for i in range(cover.n_patches)])

    assert np.max(np.abs(values.sum(axis=0) - 1.0)) <= 1e-12
    assert np.max(np.abs(first.sum(axis=0))) <= 1e-10
    assert np.max(np.abs(second.sum(axis=0))) <= 1e-6 * cover.cell_width ** -2
    assert values.min() >= 0.0
    print(f"✓ partition of unity on {x.size} random points")


def test_disjoint_flat_tops():
    cover = build_cover_2d(3)
    xc, yc = cover.x_cover, cover.y_cover
    for g in range(0, cover.dof_count, 7):
        node = cover.node_of_dof(g)
        px = np.array([xc.pu_values(i, np.array([node.x]))[0] for i in range(xc.n_patches)])
        py = np.array([yc.pu_values(j, np.array([node.y]))[0] for j in range(yc.n_patches)])
        tensor = np.outer(px, py)
        assert tensor[node.patch] == pytest.approx(1.0)
        assert np.count_nonzero(np.abs(tensor) > 1e-14) == 1


@pytest.mark.parametrize("level", [1, 2, 3])
def test_nodal_basis(level):
    """shape_eval(g, p) = delta_gp, exhaustively"""
    cover = build_cover_2d(level)
    x, y = cover.coords[:, 0], cover.coords[:, 1]
    values = np.array([shape_eval(cover, g, (x, y)) for g in range(cover.dof_count)])
    assert_allclose(values, np.eye(cover.dof_count), atol=1e-13)


def test_node_ids_and_patches():
    cover = build_cover_2d(2)
    for g in range(cover.dof_count):
        node = cover.node_of_dof(g)
        assert node.id == g
        ix, iy = cover.split_dof(g)
        assert cover.dof_index(ix, iy) == g
        i, j = node.patch
        fx, fy = cover.x_cover.patches[i].flat_top, cover.y_cover.patches[j].flat_top
        assert fx[0] <= node.x <= fx[1] and fy[0] <= node.y <= fy[1]
    with pytest.raises(ParameterError):
        cover.node_of_dof(cover.dof_count)


def test_boundary_conformity(rng):
    """Value and gradient of every basis function vanish on the boundary."""
    cover = build_cover_2d(2)
    t = rng.uniform(-0.5, 0.5, 25)
    edges = [
        (np.full_like(t, -0.5), t), (np.full_like(t, 0.5), t),
        (t, np.full_like(t, -0.5)), (t, np.full_like(t, 0.5)),
    ]
    for g in range(cover.dof_count):
        for point in edges:
            for deriv in ((0, 0), (1, 0), (0, 1)):
                assert np.max(np.abs(shape_eval(cover, g, point, deriv))) <= 1e-12


def test_shape_eval_rejects_third_derivatives():
    cover = build_cover_2d(1)
    with pytest.raises(ParameterError):
        shape_eval(cover, 0, (0.0, 0.0), (2, 1))


def test_interpolate_nodal_values():
    cover = build_cover_2d(2)
    values = {node: float(dome_obstacle(node.x, node.y)) for node in cover.nodes}
    coeffs = interpolate(cover, values)
    assert_allclose(coeffs, dome_obstacle(cover.coords[:, 0], cover.coords[:, 1]))
    assert_allclose(interpolate_function(cover, dome_obstacle), coeffs)

    zero = interpolate(cover, {g: 0.0 for g in range(cover.dof_count)})
    assert_array_equal(zero, np.zeros(cover.dof_count))


def test_interpolate_missing_value():
    cover = build_cover_2d(1)
    with pytest.raises(ParameterError):
        interpolate(cover, {0: 1.0, 1: 2.0})
    with pytest.raises(ParameterError):
        interpolate(cover, np.zeros(cover.dof_count + 1))


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_interpolation_reproduces_discrete_functions(level, rng):
    """Pi_h v = v: sample v at the nodes through the basis, interpolate back."""
    cover = build_cover_2d(level)
    bx = cover.x_cover.basis_matrix(cover.x_cover.node_coords)
    by = cover.y_cover.basis_matrix(cover.y_cover.node_coords)
    nx, ny = cover.x_cover.n_nodes, cover.y_cover.n_nodes
    for _ in range(20):
        v = rng.standard_normal(cover.dof_count)
        point_values = (bx @ v.reshape(nx, ny) @ by.T).ravel()
        assert_allclose(interpolate(cover, point_values), v, atol=1e-12)


def test_coarse_to_fine_identity_and_empty():
    cover = build_cover_2d(2)
    identity = coarse_to_fine(cover, cover)
    assert_allclose(identity.toarray(), np.eye(cover.dof_count), atol=1e-13)

    empty = coarse_to_fine(cover, cover, keep=[])
    assert empty.nnz == 0
    assert empty.shape == (cover.dof_count, cover.dof_count)


def test_coarse_to_fine_reproduces_coarse_functions(rng):
    coarse, fine = build_cover_2d(2), build_cover_2d(3)
    vc = rng.standard_normal(coarse.dof_count)
    x, y = fine.coords[:, 0], fine.coords[:, 1]
    direct = sum(vc[c] * shape_eval(coarse, c, (x, y)) for c in range(coarse.dof_count))
    assert_allclose(coarse_to_fine(coarse, fine) @ vc, direct, atol=1e-12)

    keep = np.arange(0, fine.dof_count, 3)
    truncated = coarse_to_fine(coarse, fine, keep=keep) @ vc
    expected = np.zeros(fine.dof_count)
    expected[keep] = direct[keep]
    assert_allclose(truncated, expected, atol=1e-12)


def test_coarse_to_fine_rejects_finer_coarse_cover():
    with pytest.raises(ParameterError):
        coarse_to_fine(build_cover_2d(3), build_cover_2d(2))


def test_l2_norm_equivalence(rng):
    """||v||_L2^2 against h^2 * sum v(p)^2 stays in a fixed bracket."""
    cover = build_cover_2d(3)
    mass = assemble_mass(cover)
    h = cover.x_cover.cell_width
    ratios = []
    for _ in range(20):
        v = rng.standard_normal(cover.dof_count)
        ratios.append((v @ (mass @ v)) / (h ** 2 * (v @ v)))
    assert 1e-2 <= min(ratios) and max(ratios) <= 1e2
    print(f"✓ L2 ratio range [{min(ratios):.3f}, {max(ratios):.3f}]")


def test_dump_cover_csv(tmp_path):
    cover = build_cover_2d(2)
    dump_cover_csv(cover, tmp_path / "patches.csv", tmp_path / "nodes.csv")
    patches = pd.read_csv(tmp_path / "patches.csv")
    nodes = pd.read_csv(tmp_path / "nodes.csv")
    assert len(patches) == 2 * cover.x_cover.n_patches
    assert len(nodes) == cover.dof_count
    assert set(patches['boundary']) == {'left', 'right', 'none'}
