"""Matrices, functionals and derivatives of the Ginzburg-Landau energy.

All integrals share the problem's quadrature rule, so the energy, its
residual and its Hessian form an exactly consistent derivative chain and every
assembled block matrix is symmetric to the last bit. Homogeneous Neumann
conditions are natural: no boundary terms, no eliminated DOFs.
"""

import logging
from functools import lru_cache

import numpy as np
from scipy import sparse

from glfem.models import geometry
from glfem.models.block import BlockOperator
from glfem.models.field import ComplexField
from glfem.models.mesh import Mesh2D
from glfem.models.problem import Problem

logger = logging.getLogger(__name__)


def mass_matrix(mesh: Mesh2D) -> sparse.csr_matrix:
    return geometry.mass(mesh)


def stiffness_matrix(mesh: Mesh2D) -> sparse.csr_matrix:
    return geometry.stiffness(mesh)


def weighted_mass(weight_field: ComplexField, mesh: Mesh2D) -> sparse.csr_matrix:
    """``W_jk = ∫ |u|² φ_k φ_j`` for the density of ``weight_field``."""
    geo = geometry.default_geometry(mesh)
    density = _density(geo, weight_field)
    return geometry.weighted_mass(mesh, density)


def _geometry(mesh: Mesh2D, problem: Problem) -> geometry.ElementGeometry:
    return geometry.element_geometry(mesh, problem.quad)


def _density(geo: geometry.ElementGeometry, u: ComplexField) -> np.ndarray:
    ur, ui = _values(geo, u)
    return ur ** 2 + ui ** 2


def _values(geo: geometry.ElementGeometry, u: ComplexField):
    return (
        geometry.at_quadrature(geo, u.mesh, u.re),
        geometry.at_quadrature(geo, u.mesh, u.im),
    )


@lru_cache(maxsize=32)
def _potential_at_quadrature(mesh: Mesh2D, problem: Problem) -> np.ndarray:
    points = _geometry(mesh, problem).points
    return problem.potential(points[..., 0], points[..., 1])


@lru_cache(maxsize=32)
def block_mass(mesh: Mesh2D, problem: Problem) -> BlockOperator:
    return BlockOperator.diagonal(geometry.mass(mesh, problem.quad))


@lru_cache(maxsize=16)
def assemble_aA(problem: Problem, mesh: Mesh2D) -> BlockOperator:
    """Block form of ``a_A(u, φ) = Re ∫ (∇u + iκAu)·conj(∇φ + iκAφ)``."""
    geo = _geometry(mesh, problem)
    kappa = problem.kappa
    potential = _potential_at_quadrature(mesh, problem)

    real_local = geometry.stiffness_local(geo)
    real_local = real_local + kappa ** 2 * geometry.weighted_mass_local(geo, np.sum(potential ** 2, axis=-1))
    real = geometry.assemble_local(mesh, real_local)

    # transport[t, a, b] = ∫ φ_a A·∇φ_b over triangle t
    a_dot_grad = np.einsum("tqd,tbd->tqb", potential, geo.gradients)
    transport = np.einsum("tq,qa,tqb->tab", geo.weights, geo.basis, a_dot_grad)
    coupling_local = kappa * (transport - transport.transpose(0, 2, 1))
    coupling = geometry.assemble_local(mesh, coupling_local, symmetric=False)

    return BlockOperator.complex_linear(real, coupling)


@lru_cache(maxsize=16)
def assemble_ahat(problem: Problem, mesh: Mesh2D) -> BlockOperator:
    """Stabilized form ``â_κ = a_A + β² m``, coercive in the H_κ¹ norm."""
    return assemble_aA(problem, mesh) + block_mass(mesh, problem).scaled(problem.beta_sq)


def energy(u: ComplexField, problem: Problem) -> float:
    geo = _geometry(u.mesh, problem)
    x = u.coefficients
    kinetic = 0.5 * assemble_aA(problem, u.mesh).quadratic_form(x)
    condensation = 0.25 * problem.kappa ** 2 * float(np.sum(geo.weights * (1.0 - _density(geo, u)) ** 2))
    return kinetic + condensation


def residual(u: ComplexField, problem: Problem) -> np.ndarray:
    """Coefficients ``⟨E'(u), φ_j⟩`` followed by ``⟨E'(u), iφ_j⟩``."""
    geo = _geometry(u.mesh, problem)
    ur, ui = _values(geo, u)
    factor = problem.kappa ** 2 * geo.weights * (ur ** 2 + ui ** 2 - 1.0)
    nonlinear = np.concatenate([
        geometry.assemble_load(u.mesh, np.einsum("tq,qa->ta", factor * ur, geo.basis)),
        geometry.assemble_load(u.mesh, np.einsum("tq,qa->ta", factor * ui, geo.basis)),
    ])
    return assemble_aA(problem, u.mesh).matvec(u.coefficients) + nonlinear


def hessian(u: ComplexField, problem: Problem) -> BlockOperator:
    """Block matrix of ``⟨E''(u) v, w⟩``."""
    mesh = u.mesh
    geo = _geometry(mesh, problem)
    ur, ui = _values(geo, u)
    k2 = problem.kappa ** 2

    def weighted(weight):
        return geometry.assemble_local(mesh, geometry.weighted_mass_local(geo, k2 * weight))

    base = assemble_aA(problem, mesh)
    rr = (base.RR + weighted(3.0 * ur ** 2 + ui ** 2 - 1.0)).tocsr()
    ii = (base.II + weighted(ur ** 2 + 3.0 * ui ** 2 - 1.0)).tocsr()
    ir = (base.IR + weighted(2.0 * ur * ui)).tocsr()
    return BlockOperator(RR=rr, RI=ir.T.tocsr(), IR=ir, II=ii)


def density_weighted_mass(u: ComplexField, problem: Problem) -> sparse.csr_matrix:
    geo = _geometry(u.mesh, problem)
    return geometry.assemble_local(u.mesh, geometry.weighted_mass_local(geo, _density(geo, u)))


def gauge_direction(u: ComplexField) -> np.ndarray:
    """Coefficient vector of ``iu``."""
    return np.concatenate([-u.im, u.re])


def coercivity_ratio(problem: Problem, u: ComplexField) -> float:
    """``â_κ(u, u) / ‖u‖²_{H_κ¹}`` for a test field ``u``."""
    x = u.coefficients
    mesh = u.mesh
    m = block_mass(mesh, problem)
    k = BlockOperator.diagonal(geometry.cached_stiffness(mesh))
    hk1_sq = k.quadratic_form(x) + problem.kappa ** 2 * m.quadratic_form(x)
    if hk1_sq == 0.0:
        raise ValueError("Coercivity ratio undefined for a field with vanishing H_κ¹ norm")
    return assemble_ahat(problem, mesh).quadratic_form(x) / hk1_sq
