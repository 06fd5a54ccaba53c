"""Idealized two-grid LOD space: basis, Ritz projection, minimization and study.

The basis function of coarse node j is b_j = Â_κ⁻¹ φ_j^H, the fine-grid
solution of ``â_κ(b_j, φ) = m(φ_j^H, φ)`` for every fine test function φ.
Â_κ⁻¹ is complex-linear, so the image of iφ_j^H is i·b_j and one complex
solve per coarse node suffices.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import linalg as splinalg

from glfem.core.config import settings
from glfem.core.exceptions import AlignmentUndefined, LodError, MeshMismatchError, NewtonDivergedError
from glfem.models import field as fields
from glfem.models.block import BlockOperator
from glfem.models.field import ComplexField
from glfem.models.mesh import Mesh2D, build_uniform, prolongation_matrix
from glfem.models.problem import Potential, Problem
from glfem.schemas.solver import MinimizeReport, SolverConfig
from glfem.schemas.study import ConvergenceRecord, LodStudy, ReferenceSolution
from glfem.services import assembly
from glfem.services.linalg import DEFAULT_LINEAR_TOL, linear_solve
from glfem.services.study import DEFAULT_INITIAL, convergence_study, fit_rates, reference_solution, with_orders

logger = logging.getLogger(__name__)

COMPLEX_LINEARITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LodBasis:
    coarse: Mesh2D
    fine: Mesh2D
    problem: Problem
    re: np.ndarray  # (N_h, N_H)
    im: np.ndarray  # (N_h, N_H)

    @property
    def dimension(self) -> int:
        """Complex dimension, one basis function per coarse node."""
        return self.re.shape[1]

    def _columns(self, start: int, stop: int) -> np.ndarray:
        return self.re[:, start:stop] + 1j * self.im[:, start:stop]

    def _chunks(self):
        step = settings.LOD_CHUNK
        for start in range(0, self.dimension, step):
            yield start, min(start + step, self.dimension)

    def combine(self, c: np.ndarray) -> ComplexField:
        """Fine-mesh field ``Σ c_j b_j`` for complex coefficients ``c``."""
        c = np.asarray(c, dtype=complex)
        return ComplexField(
            self.fine,
            self.re @ c.real - self.im @ c.imag,
            self.re @ c.imag + self.im @ c.real,
        )

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """``Bᴴ y`` for complex fine vectors ``y`` (vector or matrix)."""
        return self.re.T @ y - 1j * (self.im.T @ y)

    def reduce_complex(self, matrix: sparse.spmatrix) -> np.ndarray:
        """Hermitian Galerkin matrix ``Bᴴ Z B`` of a complex fine matrix ``Z``."""
        reduced = np.empty((self.dimension, self.dimension), dtype=complex)
        for start, stop in self._chunks():
            reduced[:, start:stop] = self.adjoint(matrix @ self._columns(start, stop))
        return 0.5 * (reduced + reduced.conj().T)

    def reduce_operator(self, op: BlockOperator) -> np.ndarray:
        """Real ``2m x 2m`` Galerkin matrix of a block operator in ``[Re c; Im c]`` coordinates."""
        m = self.dimension
        full = op.matrix
        reduced = np.empty((2 * m, 2 * m))
        for start, stop in self._chunks():
            real_columns = np.vstack([self.re[:, start:stop], self.im[:, start:stop]])
            imag_columns = np.vstack([-self.im[:, start:stop], self.re[:, start:stop]])
            reduced[:, start:stop] = self.reduce_vector(full @ real_columns)
            reduced[:, m + start:m + stop] = self.reduce_vector(full @ imag_columns)
        return 0.5 * (reduced + reduced.T)

    def reduce_vector(self, x: np.ndarray) -> np.ndarray:
        """Transpose of the real coordinate map applied to fine block vectors ``x``."""
        n = self.fine.num_nodes
        xr, xi = x[:n], x[n:]
        return np.concatenate([self.re.T @ xr + self.im.T @ xi, self.re.T @ xi - self.im.T @ xr])

    @cached_property
    def load(self) -> sparse.csc_matrix:
        """``M_h P`` whose columns are the right-hand sides of the basis problems."""
        return _load_matrix(self.coarse, self.fine, self.problem)

    def gram(self) -> np.ndarray:
        """``G_jk = â_κ(b_k, b_j)``, equal to ``(Bᴴ M P)_jk`` by the defining equation."""
        gram = np.empty((self.dimension, self.dimension), dtype=complex)
        for start, stop in self._chunks():
            gram[:, start:stop] = self.adjoint(self.load[:, start:stop].toarray())
        return 0.5 * (gram + gram.conj().T)

    def defining_residual(self) -> float:
        """Largest relative residual ``‖Â b_j - M P e_j‖ / ‖M P e_j‖`` over all columns."""
        z = assembly.assemble_ahat(self.problem, self.fine).to_complex()
        load = self.load
        worst = 0.0
        for start, stop in self._chunks():
            rhs = load[:, start:stop].toarray()
            residual = z @ self._columns(start, stop) - rhs
            ratio = np.linalg.norm(residual, axis=0) / np.linalg.norm(rhs, axis=0)
            worst = max(worst, float(ratio.max()))
        return worst


def _load_matrix(coarse: Mesh2D, fine: Mesh2D, problem: Problem) -> sparse.csc_matrix:
    return (assembly.block_mass(fine, problem).RR @ prolongation_matrix(coarse, fine)).tocsc()


def _complex_solver(z: sparse.spmatrix):
    try:
        lu = splinalg.splu(sparse.csc_matrix(z))
    except RuntimeError as exc:
        raise LodError(f"Factorization of the fine â_κ operator failed: {exc}") from exc

    def solve(rhs: np.ndarray) -> np.ndarray:
        x = lu.solve(rhs)
        return x + lu.solve(rhs - z @ x)

    return solve


def _check_complex_linearity(basis: LodBasis, ahat: BlockOperator, column: int, linear_tol: float) -> float:
    """Solve the real block system for iφ_j^H and compare with i·b_j."""
    n = basis.fine.num_nodes
    rhs = np.concatenate([np.zeros(n), basis.load[:, column].toarray().ravel()])
    direct = linear_solve(ahat, rhs, tol=linear_tol)
    expected = np.concatenate([-basis.im[:, column], basis.re[:, column]])
    error = float(np.linalg.norm(direct - expected) / np.linalg.norm(expected))
    if error > COMPLEX_LINEARITY_TOL:
        raise LodError(f"Solution operator is not complex-linear on column {column} (relative error {error:.3e})")
    logger.debug("complex-linearity check on column %d: relative error %.3e", column, error)
    return error


def build_lod_basis(n_H: int, n_h: int, problem: Problem, linear_tol: float = DEFAULT_LINEAR_TOL) -> LodBasis:
    if problem.beta_sq == 0.0:
        raise LodError("â_κ is singular for β² = 0 (kappa = 0); the LOD space needs kappa > 0")
    coarse, fine = build_uniform(n_H), build_uniform(n_h)
    if not coarse.is_ancestor_of(fine):
        raise MeshMismatchError(f"n_h={n_h} is not a power-of-two multiple of n_H={n_H}")
    if n_h < settings.LOD_MIN_RATIO * n_H:
        logger.warning(
            "n_h=%d is below %d*n_H=%d; the fine space is a poor proxy for H^1",
            n_h, settings.LOD_MIN_RATIO, settings.LOD_MIN_RATIO * n_H,
        )

    ahat = assembly.assemble_ahat(problem, fine)
    solve = _complex_solver(ahat.to_complex())

    load = _load_matrix(coarse, fine, problem)
    columns = np.empty((fine.num_nodes, coarse.num_nodes), dtype=complex)
    step = settings.LOD_CHUNK
    for start in range(0, coarse.num_nodes, step):
        stop = min(start + step, coarse.num_nodes)
        columns[:, start:stop] = solve(load[:, start:stop].toarray().astype(complex))

    basis = LodBasis(
        coarse=coarse,
        fine=fine,
        problem=problem,
        re=np.ascontiguousarray(columns.real),
        im=np.ascontiguousarray(columns.imag),
    )
    del columns
    _check_complex_linearity(basis, ahat, coarse.num_nodes // 2, linear_tol)
    logger.info("LOD basis: n_H=%d n_h=%d, %d complex basis functions", n_H, n_h, basis.dimension)
    return basis


def _project_coefficients(basis: LodBasis, u: ComplexField, factor) -> np.ndarray:
    # â_κ(u, b_j) = m(u, φ_j^H) since b_j solves its defining equation
    rhs = basis.load.T @ u.values
    return scipy.linalg.cho_solve(factor, rhs)


def lod_ritz_project(
    u_fine: ComplexField,
    basis: LodBasis,
    gauge_reference: Optional[ComplexField] = None,
) -> Tuple[np.ndarray, ComplexField]:
    """â_κ Ritz projection onto span(basis): complex coefficients and representative.

    With ``gauge_reference`` u the result is the projection onto
    V^LOD ∩ (iu)^⊥.
    """
    if u_fine.mesh.n != basis.fine.n:
        raise MeshMismatchError(f"Field lives on n={u_fine.mesh.n}, basis on n={basis.fine.n}")
    try:
        factor = scipy.linalg.cho_factor(basis.gram())
    except np.linalg.LinAlgError as exc:
        raise LodError(f"LOD Gram matrix is not positive definite: {exc}") from exc

    c = _project_coefficients(basis, u_fine, factor)
    if gauge_reference is not None:
        iu = gauge_reference.times_i()
        c_iu = _project_coefficients(basis, iu, factor)
        denominator = fields.real_inner(basis.combine(c_iu), iu)
        if denominator == 0.0:
            raise LodError("Gauge direction is invisible to the LOD space")
        c = c - fields.real_inner(basis.combine(c), iu) / denominator * c_iu
    return c, basis.combine(c)


def decomposition_check(u_fine: ComplexField, basis: LodBasis, representative: ComplexField) -> float:
    """Relative coarse L² projection of ``u - representative``.

    The â_κ-orthogonal complement of the LOD space is the kernel of the coarse
    L² projection, so this vanishes up to solver accuracy for the Ritz
    projection.
    """
    difference = (u_fine - representative).values
    coarse_mass = assembly.block_mass(basis.coarse, basis.problem).RR
    lu = splinalg.splu(sparse.csc_matrix(coarse_mass, dtype=complex))
    projected = lu.solve(basis.load.T @ difference)
    p = prolongation_matrix(basis.coarse, basis.fine)
    numerator = fields.norms(ComplexField.from_complex(basis.fine, p @ projected), 0.0).l2
    denominator = fields.norms(u_fine, 0.0).l2
    return numerator / denominator if denominator > 0 else numerator


def _from_real(y: np.ndarray) -> np.ndarray:
    m = y.size // 2
    return y[:m] + 1j * y[m:]


def _to_real(c: np.ndarray) -> np.ndarray:
    return np.concatenate([c.real, c.imag])


def _reduced_residual(basis: LodBasis, u: ComplexField) -> np.ndarray:
    return basis.reduce_vector(assembly.residual(u, basis.problem))


def minimize_lod(
    problem: Problem,
    basis: LodBasis,
    config: Optional[SolverConfig] = None,
    initial: Optional[ComplexField] = None,
) -> MinimizeReport:
    """Minimize E over span(basis): reduced gradient flow, then reduced Newton.

    Nonlinear terms are assembled on the fine grid at every step and projected
    through the basis.
    """
    config = config or SolverConfig()
    tau = config.resolve_tau(problem.kappa)
    scale = problem.energy_scale
    k2 = problem.kappa ** 2
    fine = basis.fine

    if initial is None:
        initial = fields.constant(DEFAULT_INITIAL, fine)
    c, u = lod_ritz_project(initial, basis)

    mass = assembly.block_mass(fine, problem)
    static = mass.scaled(1.0 - tau * k2) + assembly.assemble_aA(problem, fine).scaled(tau)
    reduced_static = basis.reduce_complex(static.to_complex())
    reduced_mass = basis.reduce_complex(mass.RR.astype(complex))

    logger.info("LOD minimization: kappa=%g n_H=%d n_h=%d tau=%.3e", problem.kappa, basis.coarse.n, fine.n, tau)

    history = [assembly.energy(u, problem)]
    flow_converged = False
    for iteration in range(1, config.max_gf_iters + 1):
        weighted = basis.reduce_complex(assembly.density_weighted_mass(u, problem).astype(complex))
        system = reduced_static + tau * k2 * weighted
        try:
            c = scipy.linalg.solve(system, reduced_mass @ c, assume_a="her")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise LodError(f"Reduced gradient flow solve failed at iteration {iteration}: {exc}") from exc
        u = basis.combine(c)
        history.append(assembly.energy(u, problem))
        change = abs(history[-1] - history[-2]) / scale
        logger.debug("lod gf %d: E=%.15e |dE|/k^2=%.3e", iteration, history[-1], change)
        if change < config.delta_gf:
            flow_converged = True
            break

    gf_iters = len(history) - 1
    if not flow_converged:
        logger.warning("LOD gradient flow hit the iteration cap (%d)", config.max_gf_iters)
        return MinimizeReport(
            field=u,
            energy_history=history,
            gf_iters=gf_iters,
            final_energy=history[-1],
            final_residual_norm=float(np.linalg.norm(_reduced_residual(basis, u))),
            tau=tau,
            converged=False,
        )

    y = _to_real(c)
    energy_now = history[-1]
    residual = _reduced_residual(basis, u)
    residual_history = [float(np.linalg.norm(residual))]
    floor = settings.NEWTON_RESIDUAL_FLOOR * scale * max(float(np.linalg.norm(u.coefficients)), 1.0)
    newton_converged = False
    newton_iters = 0
    for iteration in range(1, config.max_newton_iters + 1):
        if residual_history[-1] <= floor:
            newton_converged = True
            break
        hess = basis.reduce_operator(assembly.hessian(u, problem))
        g = basis.reduce_vector(mass.matvec(assembly.gauge_direction(u)))
        bordered = np.block([[hess, g[:, None]], [g[None, :], np.zeros((1, 1))]])
        try:
            step = scipy.linalg.solve(bordered, np.concatenate([-residual, [0.0]]), assume_a="sym")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise LodError(f"Reduced Newton solve failed at iteration {iteration}: {exc}") from exc

        y = y + step[:-1]
        u = basis.combine(_from_real(y))
        residual = _reduced_residual(basis, u)
        residual_history.append(float(np.linalg.norm(residual)))
        if residual_history[-1] > settings.NEWTON_DIVERGENCE_FACTOR * max(residual_history[-2], floor):
            raise NewtonDivergedError(
                f"Reduced Newton step increased the residual norm from {residual_history[-2]:.3e} "
                f"to {residual_history[-1]:.3e}",
                phase="lod_newton",
                iteration=iteration,
            )
        newton_iters = iteration
        energy_next = assembly.energy(u, problem)
        change = abs(energy_next - energy_now) / scale
        energy_now = energy_next
        logger.debug("lod newton %d: E=%.15e |r|=%.3e", iteration, energy_now, residual_history[-1])
        if change < config.delta_newton:
            newton_converged = True
            break

    logger.info(
        "LOD minimizer: E/k^2=%.6e, %d gradient flow + %d Newton iterations",
        energy_now / scale, gf_iters, newton_iters,
    )
    return MinimizeReport(
        field=u,
        energy_history=history,
        gf_iters=gf_iters,
        newton_iters=newton_iters,
        newton_residual_history=residual_history,
        final_energy=energy_now,
        final_residual_norm=residual_history[-1],
        tau=tau,
        converged=newton_converged,
    )


def _lod_record(
    kappa: float,
    basis: LodBasis,
    report: MinimizeReport,
    projection: ComplexField,
    u_ref: ComplexField,
    reference_energy: float,
    problem: Problem,
) -> ConvergenceRecord:
    scale = problem.energy_scale
    try:
        _, aligned = fields.align_phase(report.field, u_ref)
    except AlignmentUndefined:
        aligned = report.field
    error = fields.norms(u_ref - aligned, kappa)
    projection_error = fields.norms(u_ref - projection, kappa)
    err_energy = report.final_energy - reference_energy
    h = basis.coarse.h
    return ConvergenceRecord(
        kappa=kappa,
        n=basis.coarse.n,
        h=h,
        method="lod",
        err_l2=error.l2,
        err_hk1=error.hk1,
        err_energy=err_energy,
        scaled_l2=error.l2 / scale,
        scaled_hk1=error.hk1 / scale,
        scaled_energy=err_energy / scale ** 2,
        bestapprox_hk1=projection_error.hk1,
        bestapprox_l2=projection_error.l2,
        bestapprox_energy=assembly.energy(projection, problem),
        energy=report.final_energy,
        norm_hk1=fields.norms(report.field, kappa).hk1,
        converged=report.converged,
        preasymptotic_flag=kappa * h >= 1.0,
    )


def lod_study(
    kappa: float,
    coarse_levels: Sequence[int],
    n_h: int,
    config: Optional[SolverConfig] = None,
    *,
    potential: Potential = Potential(),
    quad_degree: int = 5,
    initials: Optional[Sequence[Union[complex, ComplexField]]] = None,
    reference: Optional[ReferenceSolution] = None,
    certify: bool = True,
    include_p1: bool = True,
) -> LodStudy:
    """LOD minimizers and Ritz projections per coarse level against the fine minimizer.

    The P1 study on the same levels and reference is run alongside so both
    methods share one CSV.
    """
    problem = Problem.create(kappa, potential, quad_degree)
    if reference is None:
        reference = reference_solution(
            kappa, n_h, config, potential=potential, quad_degree=quad_degree, initials=initials, certify=certify
        )
    u_ref = reference.field
    if u_ref.mesh.n != n_h:
        raise ValueError(f"Reference lives on n={u_ref.mesh.n}, expected n={n_h}")
    reference_energy = assembly.energy(u_ref, problem)
    linear_tol = (config or SolverConfig()).linear_tol

    records: List[ConvergenceRecord] = []
    decomposition: List[float] = []
    for n_H in coarse_levels:
        basis = build_lod_basis(n_H, n_h, problem, linear_tol)
        _, projection = lod_ritz_project(u_ref, basis)
        if settings.LOD_DECOMPOSITION_CHECK:
            value = decomposition_check(u_ref, basis, projection)
            decomposition.append(value)
            logger.info("n_H=%d: coarse projection of the LOD remainder %.3e", n_H, value)
        report = minimize_lod(problem, basis, config, initial=u_ref)
        record = _lod_record(kappa, basis, report, projection, u_ref, reference_energy, problem)
        records.append(record)
        logger.info(
            "kappa=%g n_H=%d: LOD err_Hk1=%.3e projection err_Hk1=%.3e err_E=%.3e",
            kappa, n_H, record.err_hk1, record.bestapprox_hk1, record.err_energy,
        )
        del basis

    with_orders(records)
    study = LodStudy(
        reference=reference,
        lod_records=records,
        lod_rates=fit_rates(records) if records else None,
        decomposition_residuals=decomposition,
    )
    if include_p1:
        p1 = convergence_study(
            kappa, coarse_levels, n_h, config, potential=potential, quad_degree=quad_degree, reference=reference
        )
        study.p1_records = p1.records
        study.p1_rates = p1.rates
    return study
