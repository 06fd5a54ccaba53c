"""Reference-solution convergence studies, best approximations and bound checks."""

import logging
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import sparse

from glfem.core.exceptions import AlignmentUndefined, BoundViolationError, EigenSolverError, SolverError
from glfem.models import field as fields
from glfem.models.field import ComplexField
from glfem.models.mesh import Mesh2D, build_uniform, prolongation_matrix
from glfem.models.problem import Potential, Problem
from glfem.schemas.eigen import Verdict
from glfem.schemas.solver import SolverConfig
from glfem.schemas.study import (
    BoundsReport,
    ConvergenceRecord,
    ConvergenceStudy,
    RateSummary,
    ReferenceSolution,
)
from glfem.services import assembly
from glfem.services.eigen import verify_local_uniqueness
from glfem.services.linalg import DEFAULT_LINEAR_TOL, linear_solve
from glfem.services.minimize import minimize, minimize_best_of

logger = logging.getLogger(__name__)

DEFAULT_INITIAL = 0.8 + 0.6j


def block_prolongation(coarse: Mesh2D, fine: Mesh2D) -> sparse.csr_matrix:
    """Prolongation acting on stacked ``[re; im]`` coefficient vectors."""
    p = prolongation_matrix(coarse, fine)
    return sparse.block_diag((p, p), format="csr")


def reference_solution(
    kappa: float,
    n_ref: int,
    config: Optional[SolverConfig] = None,
    *,
    potential: Potential = Potential(),
    quad_degree: int = 5,
    initials: Optional[Sequence[Union[complex, ComplexField]]] = None,
    certify: bool = True,
) -> ReferenceSolution:
    """Minimizer on the reference mesh, optionally certified as locally unique.

    Each initial value is a constant or a field on a mesh nested with the
    reference mesh; the lowest-energy result is kept.
    """
    problem = Problem.create(kappa, potential, quad_degree)
    mesh = build_uniform(n_ref)
    starts = [transfer(value, mesh) for value in (initials or [DEFAULT_INITIAL])]
    report = minimize_best_of(starts, problem, config)
    if not report.converged:
        raise SolverError(f"Reference solution on n={n_ref} did not converge", phase="reference")

    result = ReferenceSolution(report=report)
    if certify:
        try:
            _, uniqueness = verify_local_uniqueness(report.field, problem)
        except EigenSolverError as exc:
            result.warnings.append(f"local uniqueness test failed: {exc}")
            logger.warning("reference solution not certified: %s", exc)
        else:
            result.uniqueness = uniqueness
            if uniqueness.verdict is not Verdict.LOCALLY_UNIQUE:
                result.warnings.append(
                    f"reference solution is not certified locally unique (eigenvalues {uniqueness.eigenvalues})"
                )
    return result


def transfer(value: Union[complex, ComplexField], mesh: Mesh2D) -> ComplexField:
    """Constant or nested-mesh field as a field on ``mesh``."""
    if not isinstance(value, ComplexField):
        return fields.constant(value, mesh)
    if value.mesh.n <= mesh.n:
        return fields.prolong(value, mesh)
    return fields.restrict_interpolate(value, mesh)


def _ritz(ahat: sparse.spmatrix, p: sparse.spmatrix, target: np.ndarray, linear_tol: float) -> np.ndarray:
    reduced = (p.T @ ahat @ p).tocsc()
    return linear_solve(reduced, p.T @ (ahat @ target), tol=linear_tol)


def best_approx(
    u_ref: ComplexField,
    coarse: Mesh2D,
    problem: Problem,
    *,
    gauge_reference: Optional[ComplexField] = None,
    linear_tol: float = DEFAULT_LINEAR_TOL,
) -> ComplexField:
    """â_κ Ritz projection of a fine-mesh field onto the P1 space of ``coarse``.

    With ``gauge_reference`` the projection targets V_H ∩ (iu)^⊥ for
    u = gauge_reference through a rank-one correction with R(iu).
    """
    fine = u_ref.mesh
    p = block_prolongation(coarse, fine)
    ahat = assembly.assemble_ahat(problem, fine).matrix
    r = _ritz(ahat, p, u_ref.coefficients, linear_tol)

    if gauge_reference is not None:
        m = assembly.block_mass(fine, problem)
        iu = assembly.gauge_direction(gauge_reference)
        r_iu = _ritz(ahat, p, iu, linear_tol)
        denominator = m.matvec(p @ r_iu) @ iu
        if abs(denominator) <= 1e-14 * np.sqrt(m.quadratic_form(iu) * m.quadratic_form(p @ r_iu)):
            raise SolverError("Gauge direction is invisible to the coarse space", phase="best_approx")
        r = r - (m.matvec(p @ r) @ iu) / denominator * r_iu

    return ComplexField.from_coefficients(coarse, r)


def bounds_report(u_h: ComplexField, problem: Problem) -> BoundsReport:
    """A-priori bounds of a discrete minimizer; the energy and L² bounds are hard."""
    kappa = problem.kappa
    scale = problem.energy_scale
    e = assembly.energy(u_h, problem)
    report = fields.norms(u_h, kappa)
    energy_bound = 0.25 * kappa ** 2

    bounds = BoundsReport(
        kappa=kappa,
        energy=e,
        scaled_energy=e / scale,
        l2=report.l2,
        hk1_scaled=report.hk1 / kappa if kappa > 0 else report.hk1,
        h1_scaled=report.h1_semi / kappa if kappa > 0 else None,
        max_modulus=float(u_h.modulus.max()),
        energy_bound=energy_bound,
    )
    if e > energy_bound + 1e-12 * scale:
        raise BoundViolationError(f"E(u_h) = {e:.12e} exceeds E(0) = {energy_bound:.12e}")
    if report.l2 > bounds.l2_bound * (1.0 + 1e-12):
        raise BoundViolationError(f"||u_h||_L2 = {report.l2:.12e} exceeds {bounds.l2_bound}")
    logger.debug(
        "bounds: E/k^2=%.6e |u|_Hk1/k=%.6e |u|_L2=%.6e max|u|=%.6f",
        bounds.scaled_energy, bounds.hk1_scaled, bounds.l2, bounds.max_modulus,
    )
    return bounds


def _order(e_prev: Optional[float], e: Optional[float], h_prev: float, h: float) -> Optional[float]:
    if e_prev is None or e is None or e_prev <= 0.0 or e <= 0.0:
        return None
    return float(np.log(e_prev / e) / np.log(h_prev / h))


def with_orders(records: List[ConvergenceRecord]) -> List[ConvergenceRecord]:
    """Fill observed orders between consecutive levels and flag growing errors."""
    for previous, record in zip(records, records[1:]):
        record.order_l2 = _order(previous.err_l2, record.err_l2, previous.h, record.h)
        record.order_hk1 = _order(previous.err_hk1, record.err_hk1, previous.h, record.h)
        record.order_energy = _order(previous.err_energy, record.err_energy, previous.h, record.h)
        asymptotic = not (previous.preasymptotic_flag or record.preasymptotic_flag)
        if asymptotic and record.err_hk1 > previous.err_hk1:
            record.flagged = True
            logger.warning(
                "kappa=%g n=%d: H_k^1 error grew from %.3e to %.3e in the asymptotic regime "
                "(possibly a rotated vortex configuration)",
                record.kappa, record.n, previous.err_hk1, record.err_hk1,
            )
    return records


def _median(values: List[Optional[float]]) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.median(values)) if values else None


def _max_min_ratio(values: List[float]) -> Optional[float]:
    values = [v for v in values if v > 0]
    return max(values) / min(values) if values else None


def fit_rates(records: Sequence[ConvergenceRecord]) -> RateSummary:
    """Median observed orders over the asymptotic (κh < 1), unflagged levels."""
    if not records:
        raise ValueError("No records to fit")
    kappa = records[0].kappa
    used = [r for r in records if not r.preasymptotic_flag and not r.flagged and r.order_hk1 is not None]
    best_orders = [
        _order(previous.bestapprox_hk1, record.bestapprox_hk1, previous.h, record.h)
        for previous, record in zip(records, records[1:])
        if not record.preasymptotic_flag
    ]
    scale = kappa if kappa > 0 else 1.0
    return RateSummary(
        kappa=kappa,
        method=records[0].method,
        order_l2=_median([r.order_l2 for r in used]),
        order_hk1=_median([r.order_hk1 for r in used]),
        order_energy=_median([r.order_energy for r in used]),
        bestapprox_order_hk1=_median(best_orders),
        levels_used=[r.n for r in used],
        hk1_ratio=_max_min_ratio([r.norm_hk1 / scale for r in records]),
        energy_ratio=_max_min_ratio([r.energy / scale ** 2 for r in records]),
    )


def compare_to_reference(
    u_h: ComplexField,
    u_ref: ComplexField,
    problem: Problem,
    reference_energy: float,
) -> dict:
    """Errors of a coarse field against the reference, measured on the reference mesh."""
    u_fine = fields.prolong(u_h, u_ref.mesh)
    try:
        _, aligned = fields.align_phase(u_fine, u_ref)
    except AlignmentUndefined:
        logger.warning("n=%d: phase alignment undefined, comparing unaligned fields", u_h.mesh.n)
        aligned = u_fine
    error = fields.norms(u_ref - aligned, problem.kappa)
    return {
        "err_l2": error.l2,
        "err_hk1": error.hk1,
        "err_energy": assembly.energy(u_fine, problem) - reference_energy,
    }


def convergence_study(
    kappa: float,
    levels: Sequence[int],
    n_ref: int,
    config: Optional[SolverConfig] = None,
    *,
    potential: Potential = Potential(),
    quad_degree: int = 5,
    reference: Optional[ReferenceSolution] = None,
    certify: bool = True,
) -> ConvergenceStudy:
    """Minimize on every level from the restricted reference and measure errors.

    Records carry errors on the reference mesh after exact prolongation and
    phase alignment, their κ-scaled counterparts, best-approximation errors
    and observed orders between consecutive levels.
    """
    problem = Problem.create(kappa, potential, quad_degree)
    if reference is None:
        reference = reference_solution(
            kappa, n_ref, config, potential=potential, quad_degree=quad_degree, certify=certify
        )
    u_ref = reference.field
    if u_ref.mesh.n != n_ref:
        raise ValueError(f"Reference lives on n={u_ref.mesh.n}, expected n={n_ref}")
    reference_energy = assembly.energy(u_ref, problem)
    scale = problem.energy_scale
    linear_tol = (config or SolverConfig()).linear_tol

    records, bounds, level_fields = [], [], []
    for n in levels:
        coarse = build_uniform(n)
        logger.info("kappa=%g: level n=%d of %s (reference n=%d)", kappa, n, list(levels), n_ref)
        initial = fields.restrict_interpolate(u_ref, coarse)
        report = minimize(initial, problem, config)
        if not report.converged:
            logger.warning("kappa=%g n=%d: minimizer did not converge", kappa, n)

        errors = compare_to_reference(report.field, u_ref, problem, reference_energy)
        best = best_approx(u_ref, coarse, problem, linear_tol=linear_tol)
        best_fine = fields.prolong(best, u_ref.mesh)
        best_error = fields.norms(u_ref - best_fine, kappa)
        level_bounds = bounds_report(report.field, problem)

        records.append(ConvergenceRecord(
            kappa=kappa,
            n=n,
            h=coarse.h,
            scaled_l2=errors["err_l2"] / scale,
            scaled_hk1=errors["err_hk1"] / scale,
            scaled_energy=errors["err_energy"] / scale ** 2,
            bestapprox_hk1=best_error.hk1,
            bestapprox_l2=best_error.l2,
            bestapprox_energy=assembly.energy(best_fine, problem),
            energy=report.final_energy,
            norm_hk1=fields.norms(report.field, kappa).hk1,
            converged=report.converged,
            preasymptotic_flag=kappa * coarse.h >= 1.0,
            **errors,
        ))
        bounds.append(level_bounds)
        level_fields.append(report.field)
        logger.info(
            "kappa=%g n=%d: err_L2=%.3e err_Hk1=%.3e err_E=%.3e best_Hk1=%.3e",
            kappa, n, errors["err_l2"], errors["err_hk1"], errors["err_energy"], best_error.hk1,
        )

    with_orders(records)
    return ConvergenceStudy(
        reference=reference,
        records=records,
        bounds=bounds,
        rates=fit_rates(records) if records else None,
        fields=level_fields,
    )
