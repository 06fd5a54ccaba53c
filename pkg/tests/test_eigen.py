import numpy as np
import pytest
import scipy.linalg
from scipy import sparse

from glfem.core.exceptions import EigenSolverError
from glfem.models import field as fields
from glfem.models.field import ComplexField
from glfem.models.mesh import build_uniform
from glfem.models.problem import Potential, PotentialKind, Problem
from glfem.schemas.eigen import Verdict
from glfem.schemas.solver import SolverConfig
from glfem.services import assembly
from glfem.services.eigen import gauge_angle, smallest_eigs, verify_local_uniqueness
from glfem.services.minimize import minimize

from conftest import random_field

ZERO = Potential(PotentialKind.ZERO)


def block_mass(n: int) -> np.ndarray:
    mesh = build_uniform(n)
    return assembly.block_mass(mesh, Problem.create(1.0)).matrix.toarray()


def assert_m_orthonormal(vectors: np.ndarray, m: np.ndarray) -> None:
    gram = vectors.T @ m @ vectors
    assert np.allclose(gram, np.eye(gram.shape[0]), atol=1e-10)


def test_identity_pencil_has_unit_eigenvalues():
    m = block_mass(2)
    result = smallest_eigs(m, m, k=4)

    assert np.allclose(result.eigenvalues, 1.0, atol=1e-12)
    assert_m_orthonormal(result.vectors, m)


def test_random_pencil_matches_the_dense_oracle(rng):
    m = block_mass(2)
    q = rng.standard_normal(m.shape)
    a = 0.5 * (q + q.T)
    expected = scipy.linalg.eigh(a, m, eigvals_only=True)
    result = smallest_eigs(a, m, k=5, tol=1e-10, shift=1.0 - expected[0])

    assert np.allclose(result.eigenvalues, expected[:5], rtol=0.0, atol=1e-9)
    assert max(result.residual_norms) <= 1e-10
    assert_m_orthonormal(result.vectors, m)
    assert [value for value, _ in result.pairs] == result.eigenvalues


def test_degenerate_pair_matches_the_dense_oracle(rng):
    m = block_mass(4)
    size = m.shape[0]
    spectrum = np.concatenate([[0.5, 2.65, 2.65, 7.54, 7.71], np.linspace(10.0, 60.0, size - 5)])
    lower = np.linalg.cholesky(m)
    rotation, _ = np.linalg.qr(rng.standard_normal((size, size)))
    a = lower @ rotation @ np.diag(spectrum) @ rotation.T @ lower.T
    a = 0.5 * (a + a.T)
    result = smallest_eigs(sparse.csr_matrix(a), sparse.csr_matrix(m), k=5, tol=1e-10)

    assert np.allclose(result.eigenvalues, spectrum[:5], rtol=0.0, atol=1e-9)
    assert_m_orthonormal(result.vectors, m)


def test_neumann_stiffness_has_a_constant_kernel():
    mesh = build_uniform(4)
    problem = Problem.create(0.0, ZERO)
    hess = assembly.hessian(ComplexField.zeros(mesh), problem)
    result = smallest_eigs(hess, assembly.block_mass(mesh, problem), k=3)

    assert abs(result.eigenvalues[0]) <= 1e-10
    assert abs(result.eigenvalues[1]) <= 1e-10
    assert result.eigenvalues[2] > 1.0
    # the kernel is spanned by the constant real and imaginary fields
    kernel = result.vectors[:, :2]
    n = mesh.num_nodes
    for column in kernel.T:
        assert np.allclose(column[:n], column[0], atol=1e-8)
        assert np.allclose(column[n:], column[n], atol=1e-8)


def test_indefinite_pencil_triggers_a_larger_shift():
    a = sparse.diags(np.concatenate([[-0.05], np.arange(1.0, 12.0)]))
    result = smallest_eigs(a, sparse.identity(12), k=3)

    assert result.shift > 0.05
    assert np.allclose(result.eigenvalues, [-0.05, 1.0, 2.0], atol=1e-10)


def test_hopeless_shift_raises():
    a = sparse.diags(np.concatenate([[-100.0], np.arange(1.0, 12.0)]))

    with pytest.raises(EigenSolverError):
        smallest_eigs(a, sparse.identity(12), k=3)


def test_iteration_cap_raises(rng):
    m = block_mass(2)
    q = rng.standard_normal(m.shape)
    a = q @ q.T

    with pytest.raises(EigenSolverError):
        smallest_eigs(a, m, k=5, tol=1e-14, max_iter=1)


def test_too_many_pairs_are_rejected():
    with pytest.raises(ValueError):
        smallest_eigs(np.eye(3), np.eye(3), k=4)


def test_unit_constant_is_locally_unique():
    mesh = build_uniform(8)
    problem = Problem.create(2.0, ZERO)
    u = fields.constant(0.8 + 0.6j, mesh)
    result, report = verify_local_uniqueness(u, problem)

    assert report.verdict is Verdict.LOCALLY_UNIQUE
    assert abs(report.eigenvalues[0]) <= 1e-10
    # radial mode 2κ² = 8 lies below the first tangential Neumann mode π²
    assert report.eigenvalues[1] == pytest.approx(8.0, rel=1e-8)
    assert report.gauge_angle <= 1e-6
    assert result.gauge_angle == report.gauge_angle
    assert len(report.eigenvalues) == 5


def test_gauge_angle_of_the_gauge_direction_is_zero(mesh8):
    problem = Problem.create(2.0)
    u = random_field(mesh8, seed=13)

    assert gauge_angle(assembly.gauge_direction(u), u, problem) == pytest.approx(0.0, abs=1e-7)
    assert gauge_angle(-assembly.gauge_direction(u), u, problem) == pytest.approx(0.0, abs=1e-7)
    assert gauge_angle(u.coefficients, u, problem) == pytest.approx(np.pi / 2, abs=1e-7)


def test_minimizer_has_the_gauge_kernel(mesh8):
    problem = Problem.create(4.0)
    report = minimize(fields.constant(0.8 + 0.6j, mesh8), problem, SolverConfig(delta_gf=1e-8))
    _, uniqueness = verify_local_uniqueness(report.field, problem)

    assert abs(uniqueness.eigenvalues[0]) <= 1e-6 * problem.energy_scale
    assert uniqueness.gauge_angle <= 1e-3
    assert uniqueness.eigenvalues == sorted(uniqueness.eigenvalues)


def test_non_minimizer_is_not_certified(mesh8):
    problem = Problem.create(2.0, ZERO)
    _, report = verify_local_uniqueness(fields.constant(0.3, mesh8), problem)

    assert report.verdict is Verdict.NOT_CERTIFIED
