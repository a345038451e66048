"""
Flat-top Partition of Unity Cover

Tensor-product patch covers of an axis-aligned rectangle, the flat-top partition of unity
over them, the nodal degrees of freedom living on the flat-tops, and the global shape
functions phi_i * (local quadratic) built on top.

Indices are 0-based throughout: patch i of a 1D cover occupies the grid cell
[a + i*h, a + (i+1)*h], and its transition bands of half-width beta*h are centred on the
interior grid points.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd
import scipy.sparse as sp
from numpy.polynomial import Polynomial

from plate_obstacle.config import settings
from plate_obstacle.exceptions import ParameterError

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]
Domain = Tuple[Interval, Interval]

DEFAULT_DOMAIN: Domain = ((-0.5, 0.5), (-0.5, 0.5))


@dataclass(frozen=True)
class Patch1D:
    """One 1D patch: support, flat-top, boundary flag and node coordinates."""
    index: int
    support: Interval
    flat_top: Interval
    boundary: str  # 'left', 'right' or 'none'
    nodes: Tuple[float, ...]


def _smoothstep(x: np.ndarray, left: float, width: float, order: int) -> np.ndarray:
    """Cubic blend s(t) = 3t^2 - 2t^3 rising from 0 at `left` to 1 at `left + width`."""
    t = np.clip((x - left) / width, 0.0, 1.0)
    if order == 0:
        return t * t * (3.0 - 2.0 * t)
    inside = (x > left) & (x < left + width)
    if order == 1:
        return np.where(inside, 6.0 * t * (1.0 - t) / width, 0.0)
    return np.where(inside, (6.0 - 12.0 * t) / width ** 2, 0.0)


@dataclass(frozen=True)
class Cover1D:
    level: int
    interval: Interval
    transition_ratio: float
    patches: Tuple[Patch1D, ...]

    @property
    def n_patches(self) -> int:
        return len(self.patches)

    @property
    def cell_width(self) -> float:
        a, b = self.interval
        return (b - a) / self.n_patches

    @property
    def half_band(self) -> float:
        return self.transition_ratio * self.cell_width

    @cached_property
    def node_coords(self) -> np.ndarray:
        return np.array([q for patch in self.patches for q in patch.nodes])

    @cached_property
    def node_patch(self) -> np.ndarray:
        return np.array([patch.index for patch in self.patches for _ in patch.nodes], dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """Patch-support and flat-top edges; every PU piece is a polynomial between them."""
        a, b = self.interval
        h, d = self.cell_width, self.half_band
        interior = a + h * np.arange(1, self.n_patches)
        points = np.concatenate([[a, b], interior - d, interior + d])
        return np.unique(points)

    @cached_property
    def _local_polynomials(self) -> List[Polynomial]:
        """Local 1D factor of every node: Lagrange quadratic or boundary square."""
        polys = []
        a, b = self.interval
        for patch in self.patches:
            if patch.boundary == 'none':
                q = patch.nodes
                for k in range(3):
                    others = [q[m] for m in range(3) if m != k]
                    denom = np.prod([q[k] - r for r in others])
                    polys.append(Polynomial.fromroots(others) / denom)
            else:
                x_b = a if patch.boundary == 'left' else b
                q = patch.nodes[0]
                polys.append(Polynomial.fromroots([x_b, x_b]) / (q - x_b) ** 2)
        return polys

    def pu_values(self, patch: int, x: np.ndarray, order: int = 0) -> np.ndarray:
        """order-th derivative of the flat-top function of `patch` at the points x."""
        if not 0 <= patch < self.n_patches:
            raise ParameterError(f"patch {patch} out of range [0, {self.n_patches})")
        if order not in (0, 1, 2):
            raise ParameterError(f"derivative order must be 0, 1 or 2, got {order}")
        x = np.asarray(x, dtype=float)
        a = self.interval[0]
        h, d = self.cell_width, self.half_band

        # rising factor on the left band, falling factor on the right band
        if patch > 0:
            rise = [_smoothstep(x, a + patch * h - d, 2 * d, m) for m in range(order + 1)]
        else:
            rise = [np.ones_like(x)] + [np.zeros_like(x)] * order
        if patch < self.n_patches - 1:
            fall = [_smoothstep(x, a + (patch + 1) * h - d, 2 * d, m) for m in range(order + 1)]
            fall = [1.0 - fall[0]] + [-f for f in fall[1:]]
        else:
            fall = [np.ones_like(x)] + [np.zeros_like(x)] * order

        if order == 0:
            return rise[0] * fall[0]
        if order == 1:
            return rise[1] * fall[0] + rise[0] * fall[1]
        return rise[2] * fall[0] + 2.0 * rise[1] * fall[1] + rise[0] * fall[2]

    def basis_function(self, node: int, x: np.ndarray, order: int = 0) -> np.ndarray:
        """order-th derivative of the global 1D factor phi_i * P_node."""
        x = np.asarray(x, dtype=float)
        patch = int(self.node_patch[node])
        poly = self._local_polynomials[node]
        phi = [self.pu_values(patch, x, m) for m in range(order + 1)]
        local = [poly.deriv(m)(x) if m else poly(x) for m in range(order + 1)]
        if order == 0:
            return phi[0] * local[0]
        if order == 1:
            return phi[1] * local[0] + phi[0] * local[1]
        return phi[2] * local[0] + 2.0 * phi[1] * local[1] + phi[0] * local[2]

    def basis_matrix(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        """Dense (len(x), n_nodes) matrix of all global 1D factors at the points x."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((x.size, self.n_nodes))
        for node in range(self.n_nodes):
            lo, hi = self.patches[self.node_patch[node]].support
            mask = (x >= lo) & (x <= hi)
            if mask.any():
                out[mask, node] = self.basis_function(node, x[mask], order)
        return out

    def quadrature(self, points_per_cell: Optional[int] = None, refine: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        """Breakpoint-aligned composite Gauss-Legendre rule (points, weights)."""
        n_gauss = points_per_cell or settings.gauss_points
        ref_x, ref_w = np.polynomial.legendre.leggauss(n_gauss)
        edges = self.breakpoints
        if refine > 1:
            edges = np.unique(np.concatenate([
                np.linspace(lo, hi, refine + 1) for lo, hi in zip(edges[:-1], edges[1:])
            ]))
        lo, hi = edges[:-1, None], edges[1:, None]
        points = 0.5 * (hi - lo) * ref_x[None, :] + 0.5 * (hi + lo)
        weights = 0.5 * (hi - lo) * ref_w[None, :]
        return points.ravel(), weights.ravel()


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    patch: Tuple[int, int]


@dataclass(frozen=True)
class Cover2D:
    x_cover: Cover1D
    y_cover: Cover1D

    @property
    def level(self) -> int:
        return self.x_cover.level

    @property
    def domain(self) -> Domain:
        return (self.x_cover.interval, self.y_cover.interval)

    @property
    def dof_count(self) -> int:
        return self.x_cover.n_nodes * self.y_cover.n_nodes

    @property
    def patch_grid(self) -> Tuple[int, int]:
        return (self.x_cover.n_patches, self.y_cover.n_patches)

    def dof_index(self, ix: int, iy: int) -> int:
        """dof id of the tensor node (ix, iy); x varies slowest."""
        return ix * self.y_cover.n_nodes + iy

    @cached_property
    def coords(self) -> np.ndarray:
        """(dof_count, 2) node coordinates in dof order."""
        gx, gy = np.meshgrid(self.x_cover.node_coords, self.y_cover.node_coords, indexing='ij')
        return np.column_stack([gx.ravel(), gy.ravel()])

    @cached_property
    def node_patches(self) -> np.ndarray:
        """(dof_count, 2) patch indices (i, j) in dof order."""
        px, py = np.meshgrid(self.x_cover.node_patch, self.y_cover.node_patch, indexing='ij')
        return np.column_stack([px.ravel(), py.ravel()])

    @cached_property
    def nodes(self) -> Tuple[Node, ...]:
        coords, patches = self.coords, self.node_patches
        return tuple(
            Node(g, float(coords[g, 0]), float(coords[g, 1]), (int(patches[g, 0]), int(patches[g, 1])))
            for g in range(self.dof_count)
        )

    def node_of_dof(self, dof: int) -> Node:
        self._check_dof(dof)
        return self.nodes[dof]

    def split_dof(self, dof: int) -> Tuple[int, int]:
        self._check_dof(dof)
        return divmod(dof, self.y_cover.n_nodes)

    def _check_dof(self, dof: int):
        if not 0 <= dof < self.dof_count:
            raise ParameterError(f"dof {dof} out of range [0, {self.dof_count})")


def _check_level(level) -> int:
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)) or level < 1:
        raise ParameterError(f"level must be an integer >= 1, got {level!r}")
    return int(level)


def build_cover_1d(level: int, interval: Interval = (-0.5, 0.5),
                   transition_ratio: Optional[float] = None) -> Cover1D:
    """
    Build the 1D flat-top cover with 2^level patches.

    Interior patches carry three nodes (flat-top endpoints and midpoint); the two boundary
    patches carry one node at the flat-top endpoint away from the boundary.
    """
    level = _check_level(level)
    beta = settings.transition_ratio if transition_ratio is None else transition_ratio
    if not 0.0 < beta < 0.5:
        raise ParameterError(f"transition_ratio must lie in (0, 1/2), got {beta}")
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ParameterError(f"interval must satisfy a < b, got {interval}")

    n = 2 ** level
    h = (b - a) / n
    d = beta * h
    patches = []
    for i in range(n):
        lo, hi = a + i * h, a + (i + 1) * h
        support = (max(a, lo - d), min(b, hi + d))
        flat = (lo + d, hi - d)
        if i == 0:
            boundary, nodes = 'left', (flat[1],)
        elif i == n - 1:
            boundary, nodes = 'right', (flat[0],)
        else:
            boundary, nodes = 'none', (flat[0], 0.5 * (lo + hi), flat[1])
        patches.append(Patch1D(i, support, flat, boundary, nodes))
    return Cover1D(level, (a, b), beta, tuple(patches))


def pu_eval_1d(cover: Cover1D, patch: int, x: float, order: int = 0) -> float:
    """order-th derivative of the flat-top function of `patch` at x."""
    a, b = cover.interval
    if not a <= x <= b:
        raise ParameterError(f"x = {x} outside [{a}, {b}]")
    return float(cover.pu_values(patch, np.array([x]), order)[0])


def build_cover_2d(level: int, domain: Domain = DEFAULT_DOMAIN,
                   transition_ratio: Optional[float] = None) -> Cover2D:
    """Tensor product of two 1D covers at the same level; dof_count = (3*2^level - 4)^2 on a square."""
    x_cover = build_cover_1d(level, domain[0], transition_ratio)
    y_cover = build_cover_1d(level, domain[1], transition_ratio)
    cover = Cover2D(x_cover, y_cover)
    logger.debug(f"Built level-{level} cover with {cover.dof_count} dofs")
    return cover


def shape_eval(cover: Cover2D, dof: int, point, deriv: Tuple[int, int] = (0, 0)):
    """
    Evaluate d^alpha of the global basis function of `dof`.

    Args:
        cover: 2D cover
        dof: dof id
        point: (x, y); either component may be an array
        deriv: multi-index (alpha_x, alpha_y) with alpha_x + alpha_y <= 2

    Returns:
        float for scalar points, otherwise an array
    """
    ax, ay = deriv
    if ax < 0 or ay < 0 or ax + ay > 2:
        raise ParameterError(f"derivative multi-index must satisfy |alpha| <= 2, got {deriv}")
    ix, iy = cover.split_dof(dof)
    x, y = np.asarray(point[0], dtype=float), np.asarray(point[1], dtype=float)
    value = cover.x_cover.basis_function(ix, x, ax) * cover.y_cover.basis_function(iy, y, ay)
    return float(value) if value.ndim == 0 else value


def interpolate(cover: Cover2D, values_at_nodes: Union[Mapping, Sequence[float], np.ndarray]) -> np.ndarray:
    """
    Coefficient vector of Pi_h zeta from nodal values.

    The global basis is nodal, so the coefficient at dof p is zeta(p). `values_at_nodes` may be
    a mapping keyed by Node or dof id, or an array in dof order.
    """
    if isinstance(values_at_nodes, Mapping):
        lookup: Dict[int, float] = {
            (k.id if isinstance(k, Node) else int(k)): float(v) for k, v in values_at_nodes.items()
        }
        missing = [g for g in range(cover.dof_count) if g not in lookup]
        if missing:
            raise ParameterError(f"missing values for {len(missing)} nodes, first dof {missing[0]}")
        return np.array([lookup[g] for g in range(cover.dof_count)])

    coeffs = np.asarray(values_at_nodes, dtype=float)
    if coeffs.shape != (cover.dof_count,):
        raise ParameterError(f"expected {cover.dof_count} nodal values, got shape {coeffs.shape}")
    return coeffs.copy()


def interpolate_function(cover: Cover2D, func) -> np.ndarray:
    """Pi_h of a vectorized callable func(x, y)."""
    coords = cover.coords
    return interpolate(cover, np.broadcast_to(func(coords[:, 0], coords[:, 1]), (cover.dof_count,)))


def coarse_to_fine(coarse: Cover2D, fine: Cover2D, keep: Optional[Iterable[int]] = None) -> sp.csr_matrix:
    """
    Truncated prolongation: P[p, c] = coarse basis c at fine node p, rows outside `keep` zeroed.

    `keep=None` keeps every fine dof.
    """
    if coarse.level > fine.level:
        raise ParameterError(f"coarse level {coarse.level} exceeds fine level {fine.level}")
    if not np.allclose(np.array(coarse.domain), np.array(fine.domain)):
        raise ParameterError("coarse and fine covers must share the domain")

    ex = coarse.x_cover.basis_matrix(fine.x_cover.node_coords)
    ey = coarse.y_cover.basis_matrix(fine.y_cover.node_coords)
    ex[np.abs(ex) < 1e-15] = 0.0
    ey[np.abs(ey) < 1e-15] = 0.0
    prolongation = sp.kron(sp.csr_matrix(ex), sp.csr_matrix(ey), format='csr')

    if keep is not None:
        mask = np.zeros(fine.dof_count)
        mask[np.fromiter(keep, dtype=np.int64)] = 1.0
        prolongation = (sp.diags(mask) @ prolongation).tocsr()
        prolongation.eliminate_zeros()
    return prolongation


def cover_frames(cover: Cover2D) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Patch and node tables for plotting."""
    patch_rows = []
    for axis, c in (('x', cover.x_cover), ('y', cover.y_cover)):
        for patch in c.patches:
            patch_rows.append({
                'axis': axis,
                'patch': patch.index,
                'support_lo': patch.support[0],
                'support_hi': patch.support[1],
                'flat_lo': patch.flat_top[0],
                'flat_hi': patch.flat_top[1],
                'boundary': patch.boundary,
                'n_nodes': len(patch.nodes),
            })
    coords, patches = cover.coords, cover.node_patches
    nodes = pd.DataFrame({
        'dof': np.arange(cover.dof_count),
        'x': coords[:, 0],
        'y': coords[:, 1],
        'patch_i': patches[:, 0],
        'patch_j': patches[:, 1],
    })
    return pd.DataFrame(patch_rows), nodes


def dump_cover_csv(cover: Cover2D, patches_path, nodes_path):
    """Write the cover diagnostic dump (patch intervals, flat-tops, node coordinates)."""
    patches, nodes = cover_frames(cover)
    patches.to_csv(patches_path, index=False)
    nodes.to_csv(nodes_path, index=False)
    logger.info(f"Wrote cover dump: {patches_path}, {nodes_path}")
