import logging

from glfem.cli.deps import get_reference
from glfem.cli.routing import CommandRouter
from glfem.schemas.run import CommandOutcome, RunConfig
from glfem.services import storage
from glfem.services.lod import lod_study

logger = logging.getLogger(__name__)

router = CommandRouter()


@router.command("lod")
def run_lod(config: RunConfig) -> CommandOutcome:
    """LOD minimizers on the ``n_H`` levels against the ``n_h`` fine minimizer, with P1 rows alongside."""
    reference = get_reference(config, config.n_h)
    study = lod_study(
        config.kappa,
        config.n_H,
        config.n_h,
        config.solver_config(),
        potential=config.potential_model(),
        quad_degree=config.quad_degree,
        reference=reference,
    )
    csv_file = storage.write_csv(config.output_dir / "lod.csv", storage.LOD_COLUMNS, study.records)
    return CommandOutcome(
        converged=study.converged,
        outputs=[str(csv_file)],
        results={
            "reference_energy": reference.report.final_energy,
            "uniqueness": reference.uniqueness.model_dump(mode="json") if reference.uniqueness else None,
            "lod_rates": study.lod_rates.model_dump() if study.lod_rates else None,
            "p1_rates": study.p1_rates.model_dump() if study.p1_rates else None,
            "decomposition_residuals": study.decomposition_residuals,
        },
        warnings=list(reference.warnings),
    )
