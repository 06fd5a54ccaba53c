"""Per-element P1 data and the scalar integration kernels built on it.

Everything here works on whole meshes at once: quantities are arrays with a
leading triangle axis ``T`` and, where relevant, a quadrature axis ``Q``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from glfem.models.mesh import Mesh2D, QuadratureRule, quadrature

# Gradients of the reference shape functions 1-x-y, x, y.
_REFERENCE_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    areas: np.ndarray  # (T,)
    gradients: np.ndarray  # (T, 3, 2) constant shape-function gradients
    basis: np.ndarray  # (Q, 3) shape-function values at quadrature points
    weights: np.ndarray  # (T, Q) physical quadrature weights
    points: np.ndarray  # (T, Q, 2) physical quadrature points


@lru_cache(maxsize=32)
def element_geometry(mesh: Mesh2D, rule: QuadratureRule) -> ElementGeometry:
    p = mesh.vertex_coords
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.linalg.inv(jac).transpose(0, 2, 1)
    gradients = np.einsum("tij,aj->tai", inv_t, _REFERENCE_GRADIENTS)

    geometry = ElementGeometry(
        areas=0.5 * det,
        gradients=gradients,
        basis=rule.points,
        weights=np.abs(det)[:, None] * rule.weights[None, :],
        points=np.einsum("qa,tad->tqd", rule.points, p),
    )
    for array in (geometry.areas, geometry.gradients, geometry.weights, geometry.points):
        array.setflags(write=False)
    return geometry


def default_geometry(mesh: Mesh2D) -> ElementGeometry:
    return element_geometry(mesh, quadrature(5))


def at_quadrature(geometry: ElementGeometry, mesh: Mesh2D, values: np.ndarray) -> np.ndarray:
    """Evaluate a nodal P1 function at every quadrature point, shape ``(T, Q)``."""
    return np.einsum("qa,ta->tq", geometry.basis, values[mesh.triangles])


def assemble_local(mesh: Mesh2D, local: np.ndarray, symmetric: bool = True) -> sparse.csr_matrix:
    """Sum ``(T, 3, 3)`` element matrices into a global CSR matrix.

    Duplicates are summed in element order; ``symmetric`` averages the result
    with its transpose so the stored matrix is symmetric bit for bit.
    """
    tri = mesh.triangles
    rows = np.broadcast_to(tri[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(tri[:, None, :], local.shape).ravel()
    size = mesh.num_nodes
    matrix = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    if symmetric:
        matrix = (0.5 * (matrix + matrix.T)).tocsr()
    matrix.sort_indices()
    return matrix


def assemble_load(mesh: Mesh2D, local: np.ndarray) -> np.ndarray:
    """Sum ``(T, 3)`` element vectors into a nodal vector."""
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.num_nodes)


def weighted_mass_local(geometry: ElementGeometry, weight: np.ndarray) -> np.ndarray:
    """Element matrices of ``∫ w φ_k φ_j`` for ``w`` given at quadrature points."""
    return np.einsum("tq,qa,qb->tab", geometry.weights * weight, geometry.basis, geometry.basis)


def stiffness_local(geometry: ElementGeometry) -> np.ndarray:
    return geometry.areas[:, None, None] * np.einsum("tad,tbd->tab", geometry.gradients, geometry.gradients)


def mass(mesh: Mesh2D, rule: QuadratureRule = None) -> sparse.csr_matrix:
    geometry = element_geometry(mesh, rule or quadrature(5))
    ones = np.ones_like(geometry.weights)
    return assemble_local(mesh, weighted_mass_local(geometry, ones))


def stiffness(mesh: Mesh2D) -> sparse.csr_matrix:
    return assemble_local(mesh, stiffness_local(default_geometry(mesh)))


def weighted_mass(mesh: Mesh2D, weight: np.ndarray, rule: QuadratureRule = None) -> sparse.csr_matrix:
    geometry = element_geometry(mesh, rule or quadrature(5))
    return assemble_local(mesh, weighted_mass_local(geometry, weight))


@lru_cache(maxsize=32)
def cached_mass(mesh: Mesh2D) -> sparse.csr_matrix:
    return mass(mesh)


@lru_cache(maxsize=32)
def cached_stiffness(mesh: Mesh2D) -> sparse.csr_matrix:
    return stiffness(mesh)
