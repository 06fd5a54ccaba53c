import logging

from glfem.cli.deps import get_initial_fields
from glfem.cli.routing import CommandRouter
from glfem.models import field as fields
from glfem.models.mesh import build_uniform
from glfem.schemas.run import CommandOutcome, RunConfig
from glfem.services import assembly, storage
from glfem.services.minimize import minimize_best_of
from glfem.services.study import bounds_report

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("minimize")
def run_minimize(config: RunConfig) -> CommandOutcome:
    """Discrete minimizer on the ``n`` mesh from every initial value, lowest energy kept."""
    problem = config.problem()
    mesh = build_uniform(config.n)
    report = minimize_best_of(get_initial_fields(config, mesh), problem, config.solver_config())
    u = report.field
    scale = problem.energy_scale
    norms = fields.norms(u, config.kappa)

    results = {
        "energy": report.final_energy,
        "scaled_energy": report.final_energy / scale,
        "gf_iters": report.gf_iters,
        "newton_iters": report.newton_iters,
        "residual_norm": report.final_residual_norm,
        "norms": norms.model_dump(),
    }
    if report.converged:
        results["bounds"] = bounds_report(u, problem).model_dump()
    if norms.hk1 > 0:
        results["coercivity_ratio"] = assembly.coercivity_ratio(problem, u)

    field_file = storage.write_field(storage.field_path(config.output_dir, config.kappa, config.n), u, config.kappa)
    row = {
        "kappa": config.kappa,
        "n": config.n,
        "energy": report.final_energy,
        "scaled_energy": report.final_energy / scale,
        "gf_iters": report.gf_iters,
        "newton_iters": report.newton_iters,
        "residual_norm": report.final_residual_norm,
        "converged": report.converged,
    }
    csv_file = storage.write_csv(config.output_dir / "minimize.csv", storage.MINIMIZE_COLUMNS, [row])

    return CommandOutcome(
        converged=report.converged,
        outputs=[str(field_file), str(csv_file)],
        results=results,
    )
