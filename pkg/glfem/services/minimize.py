"""Discrete minimizers: linearized implicit Euler gradient flow, then Newton."""

import logging
from typing import Iterable, Optional

import numpy as np
from scipy import sparse

from glfem.core.config import settings
from glfem.core.exceptions import NewtonDivergedError, SolverError
from glfem.models.block import BlockOperator
from glfem.models.field import ComplexField
from glfem.models.problem import Problem
from glfem.schemas.solver import MinimizeReport, SolverConfig
from glfem.services import assembly
from glfem.services.linalg import DEFAULT_LINEAR_TOL, linear_solve

logger = logging.getLogger(__name__)


def gradient_flow_operator(u_n: ComplexField, problem: Problem, tau: float) -> BlockOperator:
    """``M + τ a_A + τκ² (W(|u_n|²) - M)`` in block form.

    The linearized nonlinearity is complex-linear, so it only touches the
    diagonal blocks.
    """
    mesh = u_n.mesh
    mass = assembly.block_mass(mesh, problem)
    weighted = BlockOperator.diagonal(assembly.density_weighted_mass(u_n, problem))
    k2 = problem.kappa ** 2
    return (
        mass.scaled(1.0 - tau * k2)
        + assembly.assemble_aA(problem, mesh).scaled(tau)
        + weighted.scaled(tau * k2)
    )


def gradient_flow_step(
    u_n: ComplexField,
    problem: Problem,
    tau: float,
    linear_tol: float = DEFAULT_LINEAR_TOL,
) -> ComplexField:
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    system = gradient_flow_operator(u_n, problem, tau)
    rhs = assembly.block_mass(u_n.mesh, problem).matvec(u_n.coefficients)
    x = linear_solve(system, rhs, tol=linear_tol)
    return ComplexField.from_coefficients(u_n.mesh, x)


def gauge_constraint(u: ComplexField, problem: Problem) -> np.ndarray:
    """``g = M (iu)`` so that ``gᵀδ = m(δ, iu)``."""
    return assembly.block_mass(u.mesh, problem).matvec(assembly.gauge_direction(u))


def newton_step(
    u: ComplexField,
    problem: Problem,
    linear_tol: float = DEFAULT_LINEAR_TOL,
) -> ComplexField:
    """One Newton step on ``E'(u) = 0`` with the gauge direction pinned.

    Solves the bordered system ``[[E''(u), g], [gᵀ, 0]] [δ; μ] = [-E'(u); 0]``.
    """
    r = assembly.residual(u, problem)
    g = gauge_constraint(u, problem)
    hess = assembly.hessian(u, problem).matrix
    column = sparse.csc_matrix(g[:, None])
    bordered = sparse.bmat([[hess, column], [column.T, None]], format="csc")
    rhs = np.concatenate([-r, [0.0]])

    solution = linear_solve(bordered, rhs, tol=linear_tol)
    updated = ComplexField.from_coefficients(u.mesh, u.coefficients + solution[:-1])

    before = float(np.linalg.norm(r))
    after = float(np.linalg.norm(assembly.residual(updated, problem)))
    if after > settings.NEWTON_DIVERGENCE_FACTOR * max(before, _residual_floor(u, problem)):
        raise NewtonDivergedError(
            f"Newton step increased the residual norm from {before:.3e} to {after:.3e}",
            phase="newton",
        )
    return updated


def _residual_floor(u: ComplexField, problem: Problem) -> float:
    return settings.NEWTON_RESIDUAL_FLOOR * problem.energy_scale * max(float(np.linalg.norm(u.coefficients)), 1.0)


def _residual_threshold(u: ComplexField, problem: Problem) -> float:
    return settings.FINAL_RESIDUAL_TOL * problem.energy_scale * float(np.linalg.norm(u.coefficients))


def minimize(
    initial: ComplexField,
    problem: Problem,
    config: Optional[SolverConfig] = None,
) -> MinimizeReport:
    config = config or SolverConfig()
    tau = config.resolve_tau(problem.kappa)
    scale = problem.energy_scale
    mesh = initial.mesh

    logger.info(
        "minimizing: kappa=%g n=%d tau=%.3e delta_gf=%.1e delta_newton=%.1e",
        problem.kappa, mesh.n, tau, config.delta_gf, config.delta_newton,
    )

    u = initial
    history = [assembly.energy(u, problem)]
    flow_converged = False
    for iteration in range(1, config.max_gf_iters + 1):
        try:
            u = gradient_flow_step(u, problem, tau, config.linear_tol)
        except SolverError as exc:
            raise SolverError(f"Gradient flow step failed: {exc}", phase="gradient_flow", iteration=iteration) from exc
        history.append(assembly.energy(u, problem))
        change = abs(history[-1] - history[-2]) / scale
        logger.debug("gf %d: E=%.15e |dE|/k^2=%.3e", iteration, history[-1], change)
        if iteration > 3 and history[-1] > history[-2]:
            logger.warning("energy increased at gradient flow iteration %d by %.3e", iteration, history[-1] - history[-2])
        if change < config.delta_gf:
            flow_converged = True
            break

    gf_iters = len(history) - 1
    if not flow_converged:
        logger.warning("gradient flow hit the iteration cap (%d) without meeting delta_gf", config.max_gf_iters)
        final_residual = float(np.linalg.norm(assembly.residual(u, problem)))
        return MinimizeReport(
            field=u,
            energy_history=history,
            gf_iters=gf_iters,
            final_energy=history[-1],
            final_residual_norm=final_residual,
            tau=tau,
            converged=False,
        )

    logger.info("gradient flow converged after %d iterations, E/k^2=%.6e", gf_iters, history[-1] / scale)

    energy_now = history[-1]
    residual_history = [float(np.linalg.norm(assembly.residual(u, problem)))]
    newton_converged = False
    newton_iters = 0
    for iteration in range(1, config.max_newton_iters + 1):
        if residual_history[-1] <= _residual_floor(u, problem):
            newton_converged = True
            break
        try:
            u = newton_step(u, problem, config.linear_tol)
        except NewtonDivergedError as exc:
            raise NewtonDivergedError(str(exc), phase="newton", iteration=iteration) from exc
        except SolverError as exc:
            raise SolverError(f"Newton step failed: {exc}", phase="newton", iteration=iteration) from exc
        newton_iters = iteration
        energy_next = assembly.energy(u, problem)
        residual_history.append(float(np.linalg.norm(assembly.residual(u, problem))))
        change = abs(energy_next - energy_now) / scale
        logger.debug("newton %d: E=%.15e |r|=%.3e |dE|/k^2=%.3e", iteration, energy_next, residual_history[-1], change)
        energy_now = energy_next
        if change < config.delta_newton and residual_history[-1] <= _residual_threshold(u, problem):
            newton_converged = True
            break

    if not newton_converged:
        logger.warning("Newton hit the iteration cap (%d) without meeting delta_newton", config.max_newton_iters)
    threshold = _residual_threshold(u, problem)
    residual_converged = residual_history[-1] <= threshold
    if not residual_converged:
        logger.warning("final residual %.3e above %.3e", residual_history[-1], threshold)

    report = MinimizeReport(
        field=u,
        energy_history=history,
        gf_iters=gf_iters,
        newton_iters=newton_iters,
        newton_residual_history=residual_history,
        final_energy=energy_now,
        final_residual_norm=residual_history[-1],
        tau=tau,
        residual_converged=residual_converged,
        converged=newton_converged and residual_converged,
    )
    if u.modulus.max() > 1.0 + settings.MAX_MODULUS_SLACK:
        logger.warning("discrete maximum modulus %.4f exceeds 1", u.modulus.max())
    logger.info(
        "minimizer: E/k^2=%.6e, %d gradient flow + %d Newton iterations, |r|=%.3e",
        energy_now / scale, gf_iters, newton_iters, report.final_residual_norm,
    )
    return report


def minimize_best_of(
    initials: Iterable[ComplexField],
    problem: Problem,
    config: Optional[SolverConfig] = None,
) -> MinimizeReport:
    """Run ``minimize`` from every initial value and keep the lowest energy.

    Steepest descent may stop at local minimizers; comparing energy levels
    discards them.
    """
    best = None
    for index, initial in enumerate(initials):
        report = minimize(initial, problem, config)
        logger.info("initial value %d: E=%.12e converged=%s", index, report.final_energy, report.converged)
        if best is None or (report.converged, -report.final_energy) > (best.converged, -best.final_energy):
            best = report
    if best is None:
        raise ValueError("At least one initial value is required")
    return best
