"""Shared inputs of the command handlers."""

import logging
from typing import List, Union

from glfem.core.exceptions import ConfigError, MeshMismatchError
from glfem.models.field import ComplexField
from glfem.models.mesh import Mesh2D
from glfem.schemas.run import RunConfig
from glfem.schemas.study import ReferenceSolution
from glfem.services import storage
from glfem.services.study import reference_solution, transfer

logger = logging.getLogger(__name__)


def get_initial_values(config: RunConfig) -> List[Union[complex, ComplexField]]:
    """Constants from ``initial`` or the field stored in the ``initial`` file."""
    if config.initial_file is None:
        return list(config.initial_constants)
    u, kappa = storage.read_field(config.initial_file)
    if kappa != config.kappa:
        logger.warning("initial field was stored for kappa=%g, running kappa=%g", kappa, config.kappa)
    return [u]


def get_initial_fields(config: RunConfig, mesh: Mesh2D) -> List[ComplexField]:
    try:
        return [transfer(value, mesh) for value in get_initial_values(config)]
    except MeshMismatchError as exc:
        raise ConfigError("initial", str(exc)) from exc


def get_reference(config: RunConfig, n_ref: int) -> ReferenceSolution:
    try:
        return reference_solution(
            config.kappa,
            n_ref,
            config.solver_config(),
            potential=config.potential_model(),
            quad_degree=config.quad_degree,
            initials=get_initial_values(config),
            certify=config.certify,
        )
    except MeshMismatchError as exc:
        raise ConfigError("initial", str(exc)) from exc
