import numpy as np
import pytest

from glfem.core.exceptions import BoundViolationError, SolverError
from glfem.models import field as fields
from glfem.models.field import ComplexField
from glfem.models.mesh import build_uniform
from glfem.models.problem import Potential, PotentialKind, Problem
from glfem.schemas.eigen import Verdict
from glfem.schemas.solver import SolverConfig
from glfem.schemas.study import ConvergenceRecord
from glfem.services import assembly
from glfem.services.study import (
    best_approx,
    block_prolongation,
    bounds_report,
    compare_to_reference,
    convergence_study,
    fit_rates,
    reference_solution,
    transfer,
    with_orders,
)

from conftest import random_field

ZERO = Potential(PotentialKind.ZERO)


@pytest.fixture(scope="module")
def small_study():
    return convergence_study(4.0, [4, 8], 16, SolverConfig(delta_gf=1e-10), certify=False)


def smooth_field(mesh):
    return fields.interpolate(lambda x, y: np.exp(1j * np.pi * x) * (1.0 + x * y) * np.cos(np.pi * y), mesh)


def make_record(n: int, err: float, kappa: float = 2.0, **overrides) -> ConvergenceRecord:
    values = dict(
        kappa=kappa,
        n=n,
        h=1.0 / n,
        err_l2=err ** 2,
        err_hk1=err,
        err_energy=err ** 2,
        scaled_l2=err ** 2 / kappa ** 2,
        scaled_hk1=err / kappa ** 2,
        scaled_energy=err ** 2 / kappa ** 4,
        bestapprox_hk1=0.5 * err,
        energy=0.4,
        norm_hk1=1.5,
        preasymptotic_flag=kappa / n >= 1.0,
    )
    values.update(overrides)
    return ConvergenceRecord(**values)


def test_best_approximation_of_a_coarse_field_is_itself(vortex_problem):
    coarse, fine = build_uniform(4), build_uniform(16)
    u = random_field(coarse, seed=17)
    projected = best_approx(fields.prolong(u, fine), coarse, vortex_problem)

    assert np.allclose(projected.coefficients, u.coefficients, atol=1e-9 * np.abs(u.coefficients).max())


def test_best_approximation_is_galerkin_orthogonal(vortex_problem):
    coarse, fine = build_uniform(4), build_uniform(16)
    u_ref = random_field(fine, seed=18)
    projected = best_approx(u_ref, coarse, vortex_problem)
    p = block_prolongation(coarse, fine)
    ahat = assembly.assemble_ahat(vortex_problem, fine).matrix

    defect = p.T @ (ahat @ (u_ref.coefficients - p @ projected.coefficients))
    assert np.linalg.norm(defect) <= 1e-9 * np.linalg.norm(ahat @ u_ref.coefficients)


def test_gauge_constrained_best_approximation_is_orthogonal_to_iu(vortex_problem):
    coarse, fine = build_uniform(4), build_uniform(16)
    u_ref = random_field(fine, seed=19)
    projected = best_approx(u_ref, coarse, vortex_problem, gauge_reference=u_ref)
    m = assembly.block_mass(fine, vortex_problem)
    iu = assembly.gauge_direction(u_ref)
    pr = block_prolongation(coarse, fine) @ projected.coefficients

    assert abs(m.matvec(pr) @ iu) <= 1e-10 * np.sqrt(m.quadratic_form(pr) * m.quadratic_form(iu))


def test_orders_between_consecutive_levels():
    records = with_orders([make_record(n, 1.0 / n) for n in (4, 8, 16)])

    assert records[0].order_hk1 is None
    assert records[1].order_hk1 == pytest.approx(1.0, rel=1e-12)
    assert records[2].order_l2 == pytest.approx(2.0, rel=1e-12)
    assert records[2].order_energy == pytest.approx(2.0, rel=1e-12)
    assert not any(r.flagged for r in records)


def test_growing_error_in_the_asymptotic_regime_is_flagged(caplog):
    records = with_orders([make_record(4, 0.1), make_record(8, 0.2), make_record(16, 0.05)])

    assert records[1].flagged
    assert not records[2].flagged
    assert "grew" in caplog.text


def test_growing_error_from_a_preasymptotic_level_is_not_flagged():
    records = with_orders([make_record(1, 0.1), make_record(4, 0.2)])

    assert records[0].preasymptotic_flag
    assert not records[1].flagged


def test_zero_error_has_no_order():
    records = with_orders([make_record(4, 0.1), make_record(8, 0.1, err_energy=0.0)])

    assert records[1].order_energy is None


def test_rates_skip_preasymptotic_and_flagged_levels():
    records = with_orders([
        make_record(1, 1.0),
        make_record(4, 1.0 / 4),
        make_record(8, 1.0 / 8),
        make_record(16, 1.0 / 16),
        make_record(32, 1.0 / 16),
        make_record(64, 1.0 / 32),
    ])
    records[4].flagged = True
    rates = fit_rates(records)

    assert rates.levels_used == [4, 8, 16, 64]
    assert rates.order_hk1 == pytest.approx(1.0, rel=1e-12)
    assert rates.order_l2 == pytest.approx(2.0, rel=1e-12)
    assert rates.bestapprox_order_hk1 == pytest.approx(1.0, rel=1e-12)
    assert rates.hk1_ratio == pytest.approx(1.0)


def test_rates_need_records():
    with pytest.raises(ValueError):
        fit_rates([])


def test_bounds_of_the_normal_state(mesh8, vortex_problem):
    report = bounds_report(ComplexField.zeros(mesh8), vortex_problem)

    assert report.scaled_energy == pytest.approx(0.25, rel=1e-12)
    assert report.l2 == 0.0
    assert report.max_modulus == 0.0


def test_bounds_of_the_unit_constant(mesh8, zero_problem):
    report = bounds_report(fields.constant(0.8 + 0.6j, mesh8), zero_problem)

    assert report.energy == pytest.approx(0.0, abs=1e-12)
    assert report.l2 == pytest.approx(1.0, rel=1e-12)
    assert report.hk1_scaled == pytest.approx(1.0, rel=1e-6)


def test_energy_above_the_normal_state_violates_the_bounds(mesh8, vortex_problem):
    with pytest.raises(BoundViolationError):
        bounds_report(fields.constant(3.0, mesh8), vortex_problem)


def test_rotated_reference_gives_zero_errors(vortex_problem):
    coarse, fine = build_uniform(4), build_uniform(16)
    u_h = random_field(coarse, seed=23)
    u_ref = fields.prolong(u_h, fine).rotate(0.9)
    errors = compare_to_reference(u_h, u_ref, vortex_problem, assembly.energy(u_ref, vortex_problem))

    assert errors["err_l2"] <= 1e-12
    assert errors["err_hk1"] <= 1e-11
    assert errors["err_energy"] == pytest.approx(0.0, abs=1e-12 * vortex_problem.energy_scale)


def test_transfer_of_constants_and_nested_fields():
    coarse, fine = build_uniform(2), build_uniform(8)
    u = random_field(coarse, seed=29)

    assert np.allclose(transfer(0.8 + 0.6j, fine).values, 0.8 + 0.6j)
    assert transfer(u, fine).mesh.n == 8
    assert np.array_equal(transfer(transfer(u, fine), coarse).values, u.values)


def test_reference_solution_is_certified_for_the_unit_constant():
    reference = reference_solution(2.0, 8, potential=ZERO)

    assert reference.report.converged
    assert reference.field.mesh.n == 8
    assert reference.uniqueness.verdict is Verdict.LOCALLY_UNIQUE
    assert reference.warnings == []


def test_unconverged_reference_raises():
    with pytest.raises(SolverError):
        reference_solution(4.0, 4, SolverConfig(max_gf_iters=1), certify=False)


def test_small_convergence_study(small_study):
    kappa = 4.0
    study = small_study
    first, second = study.records

    assert study.converged
    assert [r.n for r in study.records] == [4, 8]
    assert first.preasymptotic_flag and not second.preasymptotic_flag
    assert second.order_hk1 is not None
    for record in study.records:
        assert record.err_energy >= -1e-8 * kappa ** 2
        assert record.err_hk1 > 0.0
    for bounds in study.bounds:
        assert bounds.energy <= bounds.energy_bound
    assert len(study.fields) == 2
    assert study.rates is not None


@pytest.mark.parametrize("n", [4, 8, 16])
def test_best_approximation_is_within_twice_the_nodal_interpolation_error(vortex_problem, n):
    fine, coarse = build_uniform(32), build_uniform(n)
    u_ref = smooth_field(fine)
    best = fields.prolong(best_approx(u_ref, coarse, vortex_problem), fine)
    nodal = fields.prolong(fields.restrict_interpolate(u_ref, coarse), fine)
    kappa = vortex_problem.kappa

    assert fields.norms(u_ref - best, kappa).hk1 <= 2.0 * fields.norms(u_ref - nodal, kappa).hk1


def test_errors_do_not_change_on_a_finer_evaluation_mesh(zero_problem):
    u_h = random_field(build_uniform(4), seed=31)
    u_ref = random_field(build_uniform(8), seed=32)
    u_finer = fields.prolong(u_ref, build_uniform(16))
    errors = compare_to_reference(u_h, u_ref, zero_problem, assembly.energy(u_ref, zero_problem))
    finer = compare_to_reference(u_h, u_finer, zero_problem, assembly.energy(u_finer, zero_problem))

    for key, value in errors.items():
        assert finer[key] == pytest.approx(value, rel=1e-9, abs=1e-12)


def test_best_approximation_beats_the_aligned_minimizer_in_the_energy_norm(small_study):
    problem = Problem.create(4.0)
    u_ref = small_study.reference.field
    ahat = assembly.assemble_ahat(problem, u_ref.mesh)

    for u_h in small_study.fields:
        best = fields.prolong(best_approx(u_ref, u_h.mesh, problem), u_ref.mesh)
        _, aligned = fields.align_phase(fields.prolong(u_h, u_ref.mesh), u_ref)
        best_error = ahat.quadratic_form((u_ref - best).coefficients)
        assert best_error <= ahat.quadratic_form((u_ref - aligned).coefficients) * (1.0 + 1e-9)
