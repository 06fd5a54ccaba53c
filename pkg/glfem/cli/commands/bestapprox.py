import logging

from glfem.cli.deps import get_reference
from glfem.cli.routing import CommandRouter
from glfem.models import field as fields
from glfem.models.mesh import build_uniform
from glfem.schemas.run import CommandOutcome, RunConfig
from glfem.services import assembly, storage
from glfem.services.study import best_approx

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("bestapprox")
def run_bestapprox(config: RunConfig) -> CommandOutcome:
    """â_κ best approximations of the reference solution on every level."""
    problem = config.problem()
    reference = get_reference(config, config.n_ref)
    u_ref = reference.field
    scale = problem.energy_scale
    gauge = u_ref if config.gauge_constrained else None

    rows = []
    for n in config.levels:
        coarse = build_uniform(n)
        best = best_approx(u_ref, coarse, problem, gauge_reference=gauge, linear_tol=config.linear_tol)
        best_fine = fields.prolong(best, u_ref.mesh)
        error = fields.norms(u_ref - best_fine, config.kappa)
        rows.append({
            "kappa": config.kappa,
            "n": n,
            "h": coarse.h,
            "bestapprox_l2": error.l2,
            "bestapprox_hk1": error.hk1,
            "bestapprox_scaled_energy": assembly.energy(best_fine, problem) / scale,
        })
        logger.info("n=%d: best approximation error L2=%.3e Hk1=%.3e", n, error.l2, error.hk1)

    csv_file = storage.write_csv(config.output_dir / "bestapprox.csv", storage.BESTAPPROX_COLUMNS, rows)
    return CommandOutcome(
        converged=reference.report.converged,
        outputs=[str(csv_file)],
        results={"reference_energy": reference.report.final_energy, "rows": rows},
        warnings=list(reference.warnings),
    )
