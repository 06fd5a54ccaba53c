"""Smallest eigenpairs of the pencil (E''(u_h), M) and the local uniqueness test."""

import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from glfem.core.config import settings
from glfem.core.exceptions import EigenSolverError
from glfem.models.field import ComplexField
from glfem.models.problem import Problem
from glfem.schemas.eigen import EigenResult, UniquenessReport, Verdict
from glfem.services import assembly
from glfem.services.linalg import FactorizationError, Operator, as_sparse, factorize_spd

logger = logging.getLogger(__name__)


def _m_project_out(block: np.ndarray, basis: np.ndarray, m) -> np.ndarray:
    if basis.shape[1] == 0:
        return block
    for _ in range(2):
        block = block - basis @ (basis.T @ (m @ block))
    return block


def _subspace_iteration(a, m, lu, k, block_size, tol, max_iter, rng):
    n = a.shape[0]
    locked = np.empty((n, 0))
    locked_values, locked_residuals = [], []
    x = rng.standard_normal((n, block_size))

    for iteration in range(1, max_iter + 1):
        y = lu.solve(m @ x)
        y = _m_project_out(y, locked, m)
        y = y / np.sqrt(np.einsum("ij,ij->j", y, m @ y))[None, :]

        ay, my = a @ y, m @ y
        reduced_a = y.T @ ay
        reduced_m = y.T @ my
        theta, z = scipy.linalg.eigh(0.5 * (reduced_a + reduced_a.T), 0.5 * (reduced_m + reduced_m.T))

        x, ax, mx = y @ z, ay @ z, my @ z
        residuals = np.linalg.norm(ax - mx * theta[None, :], axis=0) / np.linalg.norm(mx, axis=0)

        # Lock the leading run of converged pairs; equal Ritz values need no
        # special care since only residuals decide.
        wanted = k - locked.shape[1]
        count = 0
        while count < wanted and residuals[count] <= tol:
            count += 1
        if count:
            locked = np.hstack([locked, x[:, :count]])
            locked_values.extend(theta[:count])
            locked_residuals.extend(residuals[:count])
            x = np.hstack([x[:, count:], rng.standard_normal((n, count))])
            logger.debug("iteration %d: locked %d pairs (%d/%d)", iteration, count, locked.shape[1], k)
        if locked.shape[1] >= k:
            return np.array(locked_values), locked, np.array(locked_residuals), iteration

    raise EigenSolverError(
        f"Inverse iteration did not converge within {max_iter} iterations "
        f"({locked.shape[1]} of {k} pairs converged)"
    )


def smallest_eigs(
    A: Operator,
    M: Operator,
    k: int = 5,
    tol: Optional[float] = None,
    shift: Optional[float] = None,
    max_iter: Optional[int] = None,
    seed: int = 0,
) -> EigenResult:
    """The ``k`` smallest eigenpairs of ``A v = λ M v`` by shift-inverted block iteration.

    ``A + σM`` must be positive definite; when the factorization or the
    computed spectrum shows it is not, σ grows tenfold and the solve restarts.
    """
    a = as_sparse(A)
    m = as_sparse(M)
    n = a.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"Requested {k} eigenpairs of a problem of size {n}")

    tol = tol or settings.EIGEN_TOL
    max_iter = max_iter or settings.EIGEN_MAX_ITER
    sigma = settings.EIGEN_SHIFT_FACTOR if shift is None else shift
    block_size = min(n, k + settings.EIGEN_GUARD_VECTORS)

    for attempt in range(settings.EIGEN_SHIFT_RETRIES + 1):
        try:
            lu = factorize_spd(a + sigma * m)
        except FactorizationError as exc:
            logger.warning("shift %.3e rejected: %s", sigma, exc)
            sigma = 10.0 * sigma if sigma > 0 else 1e-6
            continue

        rng = np.random.default_rng(seed)
        values, vectors, residuals, iterations = _subspace_iteration(a, m, lu, k, block_size, tol, max_iter, rng)
        if values.min() + sigma <= 0.0:
            logger.warning("shift %.3e leaves eigenvalue %.3e below -shift, increasing", sigma, values.min())
            sigma = 10.0 * max(sigma, abs(values.min()))
            continue

        order = np.argsort(values, kind="stable")
        logger.debug("eigenvalues %s after %d iterations (shift %.3e)", values[order], iterations, sigma)
        return EigenResult(
            eigenvalues=[float(v) for v in values[order]],
            vectors=vectors[:, order],
            residual_norms=[float(r) for r in residuals[order]],
            shift=float(sigma),
            iterations=iterations,
        )

    raise EigenSolverError(f"No admissible shift found after {settings.EIGEN_SHIFT_RETRIES + 1} attempts")


def gauge_angle(vector: np.ndarray, u: ComplexField, problem: Problem) -> float:
    """Angle between ``vector`` and the coefficients of ``iu`` in the M inner product."""
    m = assembly.block_mass(u.mesh, problem)
    g = assembly.gauge_direction(u)
    g = g / np.sqrt(m.quadratic_form(g))
    v = vector / np.sqrt(m.quadratic_form(vector))
    cos = abs(v @ m.matvec(g))
    w = v - np.sign(v @ m.matvec(g)) * cos * g
    sin = np.sqrt(max(m.quadratic_form(w), 0.0))
    return float(np.arctan2(sin, cos))


def verify_local_uniqueness(
    u_h: ComplexField,
    problem: Problem,
    k: int = 5,
    tol: Optional[float] = None,
) -> Tuple[EigenResult, UniquenessReport]:
    """Certify local uniqueness up to gauge from the spectrum of E''(u_h).

    Locally unique iff λ₁ is numerically zero with eigenvector along iu_h and
    λ₂ is bounded away from zero.
    """
    hess = assembly.hessian(u_h, problem)
    mass = assembly.block_mass(u_h.mesh, problem)
    result = smallest_eigs(hess, mass, k=k, tol=tol, shift=settings.EIGEN_SHIFT_FACTOR * problem.energy_scale)
    angle = gauge_angle(result.vectors[:, 0], u_h, problem)
    result.gauge_angle = angle

    eps_zero = settings.EPS_ZERO_FACTOR * problem.energy_scale
    values = result.eigenvalues
    unique = (
        abs(values[0]) <= eps_zero
        and len(values) > 1
        and values[1] >= settings.GAP_MIN
        and angle <= settings.ANGLE_TOL
    )
    report = UniquenessReport(
        kappa=problem.kappa,
        eigenvalues=values,
        residual_norms=result.residual_norms,
        gauge_angle=angle,
        eps_zero=eps_zero,
        gap_min=settings.GAP_MIN,
        angle_tol=settings.ANGLE_TOL,
        verdict=Verdict.LOCALLY_UNIQUE if unique else Verdict.NOT_CERTIFIED,
    )
    if unique:
        logger.info("kappa=%g: locally unique up to gauge, eigenvalues %s", problem.kappa, np.round(values, 6))
    else:
        logger.warning(
            "kappa=%g: local uniqueness NOT certified (eigenvalues %s, gauge angle %.3e)",
            problem.kappa, np.round(values, 6), angle,
        )
    return result, report
