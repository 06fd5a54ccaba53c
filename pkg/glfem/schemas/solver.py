from typing import List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from glfem.models.field import ComplexField


class SolverConfig(BaseModel):
    tau: Union[Literal["auto"], float] = "auto"
    delta_gf: float = Field(default=1e-9, gt=0)
    delta_newton: float = Field(default=1e-12, gt=0)
    max_gf_iters: int = Field(default=50_000, ge=1)
    max_newton_iters: int = Field(default=50, ge=0)
    linear_tol: float = Field(default=1e-12, gt=0)

    @field_validator("tau")
    @classmethod
    def validate_tau(cls, v):
        if v != "auto" and v <= 0:
            raise ValueError(f"tau must be positive or 'auto', got {v}")
        return v

    def resolve_tau(self, kappa: float) -> float:
        if self.tau != "auto":
            return float(self.tau)
        return 1.0 / kappa ** 2 if kappa > 0 else 1.0


class MinimizeReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    field: ComplexField
    energy_history: List[float]
    gf_iters: int = 0
    newton_iters: int = 0
    newton_residual_history: List[float] = []
    final_energy: float
    final_residual_norm: float = 0.0
    tau: float
    residual_converged: bool = False
    converged: bool = False
