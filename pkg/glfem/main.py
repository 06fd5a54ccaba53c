"""Command-line entry point.

Example::

    glfem minimize --kappa 8 --n 64
    glfem converge --config runs/kappa8.cfg --levels 16,32,64 --n_ref 128

Exit codes: 0 converged, 2 ran but hit an iteration cap, 1 error.
"""

import logging
import sys
import time
from typing import Iterable, Optional

from glfem.cli.config import parse_config
from glfem.cli.router import command_router
from glfem.core.config import settings
from glfem.core.exceptions import GLFEMError
from glfem.core.logging import configure_logging
from glfem.schemas.run import RunConfig, RunSummary
from glfem.services import storage

logger = logging.getLogger("glfem.main")

EXIT_CONVERGED = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def run(config: RunConfig) -> int:
    started = time.perf_counter()
    logger.info("%s: kappa=%g potential=%s tau=%.6g", config.command, config.kappa, config.potential, config.resolved_tau)

    outcome = command_router.dispatch(config)
    exit_code = EXIT_CONVERGED if outcome.converged else EXIT_NOT_CONVERGED
    for warning in outcome.warnings:
        logger.warning(warning)

    summary = RunSummary(
        command=config.command,
        kappa=config.kappa,
        potential=config.potential,
        tau=config.resolved_tau,
        delta_gf=config.delta_gf,
        delta_newton=config.delta_newton,
        quad_degree=config.quad_degree,
        config=config.model_dump(mode="json"),
        converged=outcome.converged,
        exit_code=exit_code,
        wall_time=time.perf_counter() - started,
        outputs=outcome.outputs,
        results=outcome.results,
        warnings=outcome.warnings,
    )
    storage.write_summary(config.output_dir / f"{config.command}_summary.json", summary)
    if exit_code == EXIT_NOT_CONVERGED:
        logger.warning("%s finished without converging", config.command)
    return exit_code


def main(argv: Optional[Iterable[str]] = None) -> int:
    configure_logging(settings.LOG_LEVEL, settings.LOGGING_CONFIG)
    try:
        config = parse_config(argv)
        return run(config)
    except (GLFEMError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
