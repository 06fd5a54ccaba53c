import logging

from glfem.cli.deps import get_initial_fields, get_initial_values
from glfem.cli.routing import CommandRouter
from glfem.models.mesh import build_uniform
from glfem.schemas.eigen import Verdict
from glfem.schemas.run import CommandOutcome, RunConfig
from glfem.services import storage
from glfem.services.eigen import verify_local_uniqueness
from glfem.services.minimize import minimize_best_of

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("eigs")
def run_eigs(config: RunConfig) -> CommandOutcome:
    """Smallest Hessian eigenvalues of a stored minimizer (on its own mesh) or of a fresh one on the ``n`` mesh."""
    problem = config.problem()
    outputs, warnings = [], []

    if config.initial_file is not None:
        # stored fields are taken as minimizers
        u = get_initial_values(config)[0]
        converged = True
    else:
        mesh = build_uniform(config.n)
        report = minimize_best_of(get_initial_fields(config, mesh), problem, config.solver_config())
        u, converged = report.field, report.converged
        outputs.append(str(storage.write_field(
            storage.field_path(config.output_dir, config.kappa, config.n), u, config.kappa
        )))

    result, verdict = verify_local_uniqueness(u, problem, k=config.eig_count)
    if verdict.verdict is not Verdict.LOCALLY_UNIQUE:
        warnings.append("local uniqueness up to gauge not certified")

    row = {"kappa": config.kappa, "gauge_angle": verdict.gauge_angle, "verdict": verdict.verdict}
    row.update({f"lambda_{i}": value for i, value in enumerate(result.eigenvalues, start=1)})
    outputs.append(str(storage.write_csv(
        config.output_dir / "eigs.csv", storage.eigs_columns(config.eig_count), [row]
    )))

    return CommandOutcome(
        converged=converged,
        outputs=outputs,
        results={
            "uniqueness": verdict.model_dump(mode="json"),
            "shift": result.shift,
            "iterations": result.iterations,
        },
        warnings=warnings,
    )
