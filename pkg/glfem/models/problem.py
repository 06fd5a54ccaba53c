from dataclasses import dataclass
from enum import Enum

import numpy as np

from glfem.models.mesh import QuadratureRule, quadrature


class PotentialKind(str, Enum):
    PAPER = "paper"
    ZERO = "zero"


@dataclass(frozen=True)
class Potential:
    """Magnetic vector potential A, evaluated pointwise.

    ``paper`` is A(x, y) = √2 (sin πx cos πy, -cos πx sin πy): divergence free,
    tangential on the boundary of the unit square, with sup |A| = √2.
    """

    kind: PotentialKind = PotentialKind.PAPER

    @classmethod
    def from_name(cls, name: str) -> "Potential":
        return cls(PotentialKind(name))

    @property
    def a_inf_sq(self) -> float:
        return 2.0 if self.kind is PotentialKind.PAPER else 0.0

    @property
    def a_inf(self) -> float:
        return float(np.sqrt(self.a_inf_sq))

    def __call__(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.kind is PotentialKind.ZERO:
            return np.zeros(x.shape + (2,))
        sx, cx = np.sin(np.pi * x), np.cos(np.pi * x)
        sy, cy = np.sin(np.pi * y), np.cos(np.pi * y)
        return np.sqrt(2.0) * np.stack([sx * cy, -cx * sy], axis=-1)

    def divergence(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.kind is PotentialKind.ZERO:
            return np.zeros(x.shape)
        # d/dx of A_1 plus d/dy of A_2
        d1 = np.sqrt(2.0) * np.pi * np.cos(np.pi * x) * np.cos(np.pi * y)
        d2 = -np.sqrt(2.0) * np.pi * np.cos(np.pi * x) * np.cos(np.pi * y)
        return d1 + d2


@dataclass(frozen=True)
class Problem:
    kappa: float
    potential: Potential
    beta_sq: float
    quad: QuadratureRule

    @classmethod
    def create(cls, kappa: float, potential: Potential = Potential(), quad_degree: int = 5) -> "Problem":
        if kappa < 0:
            raise ValueError(f"kappa must be non-negative, got {kappa}")
        return cls(
            kappa=float(kappa),
            potential=potential,
            beta_sq=float(kappa) ** 2 * (potential.a_inf_sq + 1.0),
            quad=quadrature(quad_degree),
        )

    @property
    def energy_scale(self) -> float:
        """κ² for κ > 0, else 1; normalises energy differences and residuals."""
        return self.kappa ** 2 if self.kappa > 0 else 1.0
