import logging

from glfem.cli.deps import get_reference
from glfem.cli.routing import CommandRouter
from glfem.schemas.run import CommandOutcome, RunConfig
from glfem.services import storage
from glfem.services.study import convergence_study

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("converge")
def run_converge(config: RunConfig) -> CommandOutcome:
    """Convergence table of the minimizers on ``levels`` against the ``n_ref`` reference."""
    reference = get_reference(config, config.n_ref)
    study = convergence_study(
        config.kappa,
        config.levels,
        config.n_ref,
        config.solver_config(),
        potential=config.potential_model(),
        quad_degree=config.quad_degree,
        reference=reference,
    )

    outputs = [str(storage.write_field(
        storage.field_path(config.output_dir, config.kappa, config.n_ref, prefix="reference"),
        reference.field,
        config.kappa,
    ))]
    for u in study.fields:
        outputs.append(str(storage.write_field(
            storage.field_path(config.output_dir, config.kappa, u.mesh.n), u, config.kappa
        )))
    outputs.append(str(storage.write_csv(config.output_dir / "converge.csv", storage.CONVERGE_COLUMNS, study.records)))

    return CommandOutcome(
        converged=study.converged,
        outputs=outputs,
        results={
            "reference_energy": reference.report.final_energy,
            "uniqueness": reference.uniqueness.model_dump(mode="json") if reference.uniqueness else None,
            "rates": study.rates.model_dump() if study.rates else None,
            "bounds": [b.model_dump() for b in study.bounds],
            "bestapprox_energy": {r.n: r.bestapprox_energy for r in study.records},
            "flagged_levels": [r.n for r in study.records if r.flagged],
        },
        warnings=list(reference.warnings),
    )
