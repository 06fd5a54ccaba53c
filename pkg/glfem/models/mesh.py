"""Nested structured triangulations of the unit square and quadrature rules.

Nodes are numbered lexicographically by ``(iy, ix)``: node ``iy*(n+1) + ix``
sits at ``(ix/n, iy/n)``. Every grid square is split along the diagonal from
its lower-left to its upper-right corner, the lower triangle first, so
triangle ``2*(iy*n + ix) + s`` is the lower (``s=0``) or upper (``s=1``) half
of square ``(ix, iy)``. With this ordering ``refine(build_uniform(n))`` and
``build_uniform(2n)`` coincide entry by entry.
"""

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
from scipy import sparse

from glfem.core.exceptions import MeshError, MeshMismatchError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Rule on the reference triangle with vertices (0,0), (1,0), (0,1).

    ``points`` holds barycentric coordinates ``(Q, 3)``; these double as the
    values of the three P1 shape functions at the quadrature points.
    ``weights`` sum to the reference area 1/2.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)

    def reference_points(self) -> np.ndarray:
        """Cartesian (x, y) coordinates on the reference triangle."""
        return self.points[:, 1:]


def _permutations(a: float, b: float) -> list:
    return [(a, b, b), (b, a, b), (b, b, a)]


def _rule_degree_5():
    sqrt15 = np.sqrt(15.0)
    a1 = (6.0 - sqrt15) / 21.0
    a2 = (6.0 + sqrt15) / 21.0
    w1 = (155.0 - sqrt15) / 2400.0
    w2 = (155.0 + sqrt15) / 2400.0
    points = [(1 / 3, 1 / 3, 1 / 3)]
    points += _permutations(1.0 - 2.0 * a1, a1)
    points += _permutations(1.0 - 2.0 * a2, a2)
    weights = [9.0 / 80.0] + [w1] * 3 + [w2] * 3
    return points, weights


_RULES = {
    1: lambda: ([(1 / 3, 1 / 3, 1 / 3)], [0.5]),
    2: lambda: (_permutations(2 / 3, 1 / 6), [1 / 6] * 3),
    5: _rule_degree_5,
}

SUPPORTED_DEGREES = tuple(sorted(_RULES))


@lru_cache(maxsize=None)
def quadrature(degree: int = 5) -> QuadratureRule:
    if degree not in _RULES:
        raise MeshError(f"Unsupported quadrature degree {degree}. Supported: {SUPPORTED_DEGREES}")
    points, weights = _RULES[degree]()
    return QuadratureRule(
        degree=degree,
        points=_frozen(np.asarray(points, dtype=float)),
        weights=_frozen(np.asarray(weights, dtype=float)),
    )


@dataclass(frozen=True, eq=False)
class Mesh2D:
    n: int
    level: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    parent_map: Optional[np.ndarray] = field(default=None)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def vertex_coords(self) -> np.ndarray:
        """Coordinates per triangle, shape ``(T, 3, 2)``."""
        return _frozen(self.nodes[self.triangles])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertex_coords
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return _frozen(0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]))

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (sorted node pairs) and their multiplicity.

        Returns an ``(E, 3)`` array ``[a, b, count]``; interior edges have
        count 2 and boundary edges count 1 on a conforming mesh.
        """
        local = self.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
        local = np.sort(local, axis=1)
        unique, counts = np.unique(local, axis=0, return_counts=True)
        return _frozen(np.column_stack([unique, counts]))

    def node_index(self, ix, iy):
        return np.asarray(iy) * (self.n + 1) + np.asarray(ix)

    def is_ancestor_of(self, other: "Mesh2D") -> bool:
        if other.n % self.n:
            return False
        ratio = other.n // self.n
        return ratio & (ratio - 1) == 0


def build_uniform(n: int) -> Mesh2D:
    if n < 1:
        raise MeshError(f"Mesh needs at least one cell per side, got n={n}")

    grid = np.arange(n + 1) / n
    xs, ys = np.meshgrid(grid, grid)
    nodes = np.column_stack([xs.ravel(), ys.ravel()])

    iy, ix = np.divmod(np.arange(n * n), n)
    v00 = iy * (n + 1) + ix
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    on_boundary = (
        np.isclose(nodes[:, 0], 0.0)
        | np.isclose(nodes[:, 0], 1.0)
        | np.isclose(nodes[:, 1], 0.0)
        | np.isclose(nodes[:, 1], 1.0)
    )

    return Mesh2D(
        n=n,
        level=0,
        nodes=_frozen(nodes),
        triangles=_frozen(triangles.astype(np.int64)),
        boundary_nodes=_frozen(np.flatnonzero(on_boundary)),
    )


def _parent_triangles(n_fine: int) -> np.ndarray:
    """Parent of every triangle of the ``n_fine`` mesh in the ``n_fine/2`` mesh."""
    n_coarse = n_fine // 2
    t = np.arange(2 * n_fine * n_fine)
    square, s = np.divmod(t, 2)
    iy, ix = np.divmod(square, n_fine)
    dx, dy = ix % 2, iy % 2
    parent_square = (iy // 2) * n_coarse + ix // 2

    # A lower parent owns three lower children and the upper child of its
    # (1, 0) sub-square; an upper parent mirrors this with sub-square (0, 1).
    parent_s = s.copy()
    parent_s[(s == 0) & (dx == 0) & (dy == 1)] = 1
    parent_s[(s == 1) & (dx == 1) & (dy == 0)] = 0
    return 2 * parent_square + parent_s


def refine(mesh: Mesh2D) -> Mesh2D:
    fine = build_uniform(2 * mesh.n)
    return Mesh2D(
        n=fine.n,
        level=mesh.level + 1,
        nodes=fine.nodes,
        triangles=fine.triangles,
        boundary_nodes=fine.boundary_nodes,
        parent_map=_frozen(_parent_triangles(fine.n)),
    )


def _check_nested(coarse: Mesh2D, fine: Mesh2D) -> int:
    if not coarse.is_ancestor_of(fine):
        raise MeshMismatchError(
            f"Mesh with n={fine.n} is not a uniform refinement of the mesh with n={coarse.n}"
        )
    return fine.n // coarse.n


def restriction_indices(coarse: Mesh2D, fine: Mesh2D) -> np.ndarray:
    """Fine node index of every coarse node."""
    ratio = _check_nested(coarse, fine)
    iy, ix = np.divmod(np.arange(coarse.num_nodes), coarse.n + 1)
    return fine.node_index(ix * ratio, iy * ratio)


@lru_cache(maxsize=32)
def prolongation_matrix(coarse: Mesh2D, fine: Mesh2D) -> sparse.csr_matrix:
    """Exact P1 embedding ``V_coarse -> V_fine`` as an ``N_fine x N_coarse`` matrix."""
    ratio = _check_nested(coarse, fine)
    n_c = coarse.n
    iy_f, ix_f = np.divmod(np.arange(fine.num_nodes), fine.n + 1)

    ix = np.minimum(ix_f // ratio, n_c - 1)
    iy = np.minimum(iy_f // ratio, n_c - 1)
    s = (ix_f - ix * ratio) / ratio
    t = (iy_f - iy * ratio) / ratio

    v00 = iy * (n_c + 1) + ix
    v10 = v00 + 1
    v01 = v00 + n_c + 1
    v11 = v01 + 1

    lower = s >= t
    cols = np.column_stack([v00, np.where(lower, v10, v11), np.where(lower, v11, v01)])
    vals = np.column_stack([
        np.where(lower, 1.0 - s, 1.0 - t),
        np.where(lower, s - t, s),
        np.where(lower, t, t - s),
    ])
    rows = np.repeat(np.arange(fine.num_nodes), 3)

    keep = vals.ravel() != 0.0
    matrix = sparse.coo_matrix(
        (vals.ravel()[keep], (rows[keep], cols.ravel()[keep])),
        shape=(fine.num_nodes, coarse.num_nodes),
    )
    return matrix.tocsr()
