from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict


class Verdict(str, Enum):
    LOCALLY_UNIQUE = "LocallyUnique"
    NOT_CERTIFIED = "NotCertified"


class EigenResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    eigenvalues: List[float]
    vectors: np.ndarray  # (2N, k), M-orthonormal columns
    residual_norms: List[float]
    shift: float
    iterations: int
    gauge_angle: Optional[float] = None

    @property
    def pairs(self):
        return [(lam, self.vectors[:, i]) for i, lam in enumerate(self.eigenvalues)]


class UniquenessReport(BaseModel):
    kappa: float
    eigenvalues: List[float]
    residual_norms: List[float]
    gauge_angle: float
    eps_zero: float
    gap_min: float
    angle_tol: float
    verdict: Verdict
