"""Sparse linear solves shared by the flow, Newton, projection and eigen code."""

import logging
from typing import Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from glfem.core.exceptions import SolverError
from glfem.models.block import BlockOperator

logger = logging.getLogger(__name__)

Operator = Union[BlockOperator, sparse.spmatrix, np.ndarray]

DEFAULT_LINEAR_TOL = 1e-12


class FactorizationError(SolverError):
    pass


def as_sparse(op: Operator) -> sparse.csc_matrix:
    if isinstance(op, BlockOperator):
        return op.matrix
    return sparse.csc_matrix(op)


def backward_error(matrix: sparse.spmatrix, x: np.ndarray, rhs: np.ndarray) -> float:
    """Normwise backward error ``‖Ax - b‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)``."""
    denominator = splinalg.norm(matrix, np.inf) * np.max(np.abs(x)) + np.max(np.abs(rhs))
    if denominator == 0.0:
        return 0.0
    return float(np.max(np.abs(matrix @ x - rhs)) / denominator)


def relative_residual(matrix: sparse.spmatrix, x: np.ndarray, rhs: np.ndarray) -> float:
    """``‖Ax - b‖₂ / ‖b‖₂``; the absolute residual when ``b = 0``."""
    residual = float(np.linalg.norm(matrix @ x - rhs))
    norm = float(np.linalg.norm(rhs))
    return residual / norm if norm > 0.0 else residual


def factorize(matrix: sparse.spmatrix) -> splinalg.SuperLU:
    try:
        return splinalg.splu(sparse.csc_matrix(matrix))
    except RuntimeError as exc:
        raise FactorizationError(f"Sparse factorization failed: {exc}", phase="factorize") from exc


def factorize_spd(matrix: sparse.spmatrix) -> splinalg.SuperLU:
    """Factor a symmetric matrix that must be positive definite.

    The factorization runs with symmetric ordering and diagonal pivoting only,
    which makes it an LDLᵀ in disguise: the matrix is positive definite iff all
    pivots on the diagonal of U are positive.
    """
    try:
        lu = splinalg.splu(
            sparse.csc_matrix(matrix),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise FactorizationError(f"Matrix is singular: {exc}", phase="factorize") from exc

    if np.array_equal(lu.perm_r, lu.perm_c):
        pivots = lu.U.diagonal()
        if np.any(pivots <= 0.0):
            raise FactorizationError(
                f"Matrix is not positive definite (smallest pivot {pivots.min():.3e})", phase="factorize"
            )
    else:
        logger.debug("off-diagonal pivoting occurred; positive definiteness not certified by pivots")
    return lu


def linear_solve(
    op: Operator,
    rhs: np.ndarray,
    tol: float = DEFAULT_LINEAR_TOL,
    method: str = "direct",
    refinement_steps: int = 2,
) -> np.ndarray:
    """Solve a symmetric system to relative residual ``tol``.

    Ill-conditioned systems whose relative residual stalls above ``tol`` at
    round-off are accepted when their normwise backward error is below it.

    ``direct`` uses a sparse LU with iterative refinement and falls back to
    MINRES for singular positive semidefinite systems with compatible
    right-hand side; ``cg`` is meant for the SPD â_κ systems only.
    """
    matrix = as_sparse(op)
    rhs = np.asarray(rhs, dtype=float)

    if method == "cg":
        x, info = splinalg.cg(matrix, rhs, rtol=tol, atol=0.0, maxiter=10 * matrix.shape[0])
        if info != 0:
            raise SolverError(f"CG did not converge (info={info})", phase="linear_solve")
    elif method == "direct":
        try:
            lu = factorize(matrix)
        except FactorizationError:
            logger.debug("direct factorization failed, retrying with MINRES")
            x, info = splinalg.minres(matrix, rhs, rtol=tol, maxiter=10 * matrix.shape[0])
            if info != 0:
                raise SolverError(f"MINRES did not converge (info={info})", phase="linear_solve")
        else:
            x = lu.solve(rhs)
            for _ in range(refinement_steps):
                if relative_residual(matrix, x, rhs) <= tol:
                    break
                x = x + lu.solve(rhs - matrix @ x)
    else:
        raise ValueError(f"Unknown linear solver method {method!r}")

    if not np.all(np.isfinite(x)):
        raise SolverError("Linear solve produced non-finite values", phase="linear_solve")
    residual = relative_residual(matrix, x, rhs)
    if residual <= tol:
        return x
    error = backward_error(matrix, x, rhs)
    if error > tol:
        raise SolverError(
            f"Linear solve relative residual {residual:.3e} and backward error {error:.3e} exceed {tol:.1e}",
            phase="linear_solve",
        )
    logger.debug("relative residual %.3e above %.1e, accepted by backward error %.3e", residual, tol, error)
    return x
