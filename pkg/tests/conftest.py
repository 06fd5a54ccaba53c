import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure the package is importable when running tests without installation
ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from glfem.models.field import ComplexField  # noqa: E402
from glfem.models.mesh import build_uniform  # noqa: E402
from glfem.models.problem import Potential, PotentialKind, Problem  # noqa: E402


def random_field(mesh, seed: int = 0, scale: float = 1.0) -> ComplexField:
    rng = np.random.default_rng(seed)
    return ComplexField(
        mesh,
        scale * rng.standard_normal(mesh.num_nodes),
        scale * rng.standard_normal(mesh.num_nodes),
    )


@pytest.fixture
def mesh4():
    return build_uniform(4)


@pytest.fixture
def mesh8():
    return build_uniform(8)


@pytest.fixture
def vortex_problem():
    return Problem.create(2.0)


@pytest.fixture
def zero_problem():
    return Problem.create(2.0, Potential(PotentialKind.ZERO))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
