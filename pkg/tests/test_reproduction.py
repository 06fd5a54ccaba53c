"""Reproduction runs on fine meshes. Run with ``pytest -m slow``."""

import numpy as np
import pytest

from glfem.models import field as fields
from glfem.models.mesh import build_uniform
from glfem.models.problem import Problem
from glfem.schemas.eigen import Verdict
from glfem.services.eigen import verify_local_uniqueness
from glfem.services.lod import lod_study
from glfem.services.minimize import minimize
from glfem.services.study import convergence_study

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def kappa8_study():
    return convergence_study(8.0, [16, 32, 64, 128], 256)


def test_hessian_spectrum_at_kappa_8():
    problem = Problem.create(8.0)
    report = minimize(fields.constant(0.8 + 0.6j, build_uniform(128)), problem)
    _, uniqueness = verify_local_uniqueness(report.field, problem)
    lam = uniqueness.eigenvalues

    assert report.converged
    assert abs(lam[0]) <= 1e-6 * problem.energy_scale
    assert lam[1] == pytest.approx(2.65, rel=0.10)
    assert lam[2] == pytest.approx(2.65, rel=0.10)
    assert lam[3] == pytest.approx(7.54, rel=0.10)
    assert lam[4] == pytest.approx(7.71, rel=0.10)
    assert uniqueness.gauge_angle <= 1e-3
    assert uniqueness.verdict is Verdict.LOCALLY_UNIQUE


@pytest.mark.parametrize("kappa, expected", [(8.0, 0.129), (10.0, 0.105)])
def test_scaled_minimal_energy(kappa, expected):
    problem = Problem.create(kappa)
    report = minimize(fields.constant(0.8 + 0.6j, build_uniform(256)), problem)

    assert report.converged
    assert report.final_energy / problem.energy_scale == pytest.approx(expected, rel=0.05)


def test_kappa_8_reference_energy(kappa8_study):
    reference = kappa8_study.reference

    assert reference.uniqueness.verdict is Verdict.LOCALLY_UNIQUE
    assert reference.report.final_energy / 64.0 == pytest.approx(0.129, rel=0.05)


def test_kappa_8_convergence_orders(kappa8_study):
    rates = kappa8_study.rates

    assert kappa8_study.converged
    assert not any(r.flagged for r in kappa8_study.records)
    assert rates.order_hk1 == pytest.approx(1.0, abs=0.15)
    assert rates.order_l2 == pytest.approx(2.0, abs=0.2)
    assert rates.order_energy == pytest.approx(2.0, abs=0.2)


def test_energy_error_is_one_sided(kappa8_study):
    for record in kappa8_study.records:
        assert record.err_energy >= -1e-8 * record.kappa ** 2


def test_a_priori_bounds_across_levels(kappa8_study):
    for bounds in kappa8_study.bounds:
        assert bounds.energy <= bounds.energy_bound
        assert bounds.l2 <= bounds.l2_bound
    assert kappa8_study.rates.hk1_ratio <= 1.2


def test_minimizer_error_tracks_the_best_approximation(kappa8_study):
    for record in kappa8_study.records[-2:]:
        assert 1.0 <= record.err_hk1 / record.bestapprox_hk1 <= 2.0


def test_lod_superapproximation():
    study = lod_study(4.0, [4, 8, 16], 256)
    projection_order = study.lod_rates.bestapprox_order_hk1

    assert study.converged
    assert projection_order >= 2.5
    assert projection_order > study.p1_rates.order_hk1
    for record in study.lod_records:
        assert record.err_hk1 <= 3.0 * record.bestapprox_hk1
    assert np.all(np.diff([r.bestapprox_hk1 for r in study.lod_records]) < 0)
