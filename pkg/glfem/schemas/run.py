from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator

from glfem.core.config import settings
from glfem.models.mesh import SUPPORTED_DEGREES
from glfem.models.problem import Potential, Problem
from glfem.schemas.solver import SolverConfig

Command = Literal["minimize", "eigs", "converge", "bestapprox", "lod"]


def parse_complex(text: str) -> complex:
    """``0.8+0.6i`` style constants; ``j`` is accepted as well."""
    cleaned = text.strip().replace(" ", "").replace("i", "j")
    return complex(cleaned)


def _is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


def _split_ints(v):
    if isinstance(v, str):
        return [int(item) for item in v.split(",") if item.strip()]
    if isinstance(v, int):
        return [v]
    return v


def _check_chain(levels: List[int]) -> List[int]:
    if not levels:
        raise ValueError("at least one level is required")
    if levels[0] < 1:
        raise ValueError(f"levels must be positive, got {levels[0]}")
    for coarse, fine in zip(levels, levels[1:]):
        if fine <= coarse:
            raise ValueError(f"levels must be strictly increasing, got {coarse} then {fine}")
        if fine % coarse or not _is_power_of_two(fine // coarse):
            raise ValueError(f"{fine} is not a power-of-two multiple of {coarse}")
    return levels


def _check_divides(fine: int, coarsest_chain: List[int], name: str) -> int:
    if coarsest_chain:
        top = coarsest_chain[-1]
        if fine % top or not _is_power_of_two(fine // top):
            raise ValueError(f"{name}={fine} is not a power-of-two multiple of the finest level {top}")
    return fine


class RunConfig(BaseModel):
    command: Command
    kappa: float = Field(ge=0)

    # Meshes
    n: int = Field(default=64, ge=1)
    levels: List[int] = [16, 32, 64, 128]
    n_ref: int = Field(default=256, ge=1)
    n_H: List[int] = [4, 8, 16]
    n_h: int = Field(default=256, ge=1)

    # Problem
    potential: Literal["paper", "zero"] = "paper"
    quad_degree: int = 5
    initial: str = "0.8+0.6i"

    # Solver recipe
    tau: Union[Literal["auto"], float] = "auto"
    delta_gf: float = Field(default=1e-9, gt=0)
    delta_newton: float = Field(default=1e-12, gt=0)
    max_gf_iters: int = Field(default=50_000, ge=1)
    max_newton_iters: int = Field(default=50, ge=0)
    linear_tol: float = Field(default=1e-12, gt=0)

    # Outputs and extras
    eig_count: int = Field(default=5, ge=1)
    certify: bool = True
    gauge_constrained: bool = False
    output_dir: Path = Path(settings.OUTPUT_DIR)

    @field_validator("levels", "n_H", mode="before")
    @classmethod
    def split_levels(cls, v):
        return _split_ints(v)

    @field_validator("levels", "n_H")
    @classmethod
    def validate_chain(cls, v: List[int]) -> List[int]:
        return _check_chain(v)

    @field_validator("n_ref")
    @classmethod
    def validate_n_ref(cls, v: int, info) -> int:
        return _check_divides(v, info.data.get("levels", []), "n_ref")

    @field_validator("n_h")
    @classmethod
    def validate_n_h(cls, v: int, info) -> int:
        return _check_divides(v, info.data.get("n_H", []), "n_h")

    @field_validator("quad_degree")
    @classmethod
    def validate_quad_degree(cls, v: int) -> int:
        if v not in SUPPORTED_DEGREES:
            raise ValueError(f"unsupported quadrature degree {v}; use one of {sorted(SUPPORTED_DEGREES)}")
        return v

    @field_validator("tau")
    @classmethod
    def validate_tau(cls, v):
        if v != "auto" and v <= 0:
            raise ValueError(f"tau must be positive or 'auto', got {v}")
        return v

    @field_validator("initial")
    @classmethod
    def validate_initial(cls, v: str) -> str:
        v = v.strip()
        if cls.initial_is_file_value(v):
            if not Path(v).is_file():
                raise ValueError(f"initial field file {v!r} does not exist")
            return v
        for item in v.split(";"):
            try:
                parse_complex(item)
            except ValueError:
                raise ValueError(f"{item!r} is neither a complex constant nor a field file") from None
        return v

    @staticmethod
    def initial_is_file_value(v: str) -> bool:
        try:
            for item in v.split(";"):
                parse_complex(item)
        except ValueError:
            return True
        return False

    @property
    def initial_file(self) -> Optional[Path]:
        return Path(self.initial) if self.initial_is_file_value(self.initial) else None

    @property
    def initial_constants(self) -> List[complex]:
        if self.initial_file is not None:
            return []
        return [parse_complex(item) for item in self.initial.split(";")]

    @property
    def resolved_tau(self) -> float:
        return self.solver_config().resolve_tau(self.kappa)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            tau=self.tau,
            delta_gf=self.delta_gf,
            delta_newton=self.delta_newton,
            max_gf_iters=self.max_gf_iters,
            max_newton_iters=self.max_newton_iters,
            linear_tol=self.linear_tol,
        )

    def potential_model(self) -> Potential:
        return Potential.from_name(self.potential)

    def problem(self) -> Problem:
        return Problem.create(self.kappa, self.potential_model(), self.quad_degree)


class CommandOutcome(BaseModel):
    converged: bool
    outputs: List[str] = []
    results: Dict[str, Any] = {}
    warnings: List[str] = []


class RunSummary(BaseModel):
    version: str = settings.VERSION
    command: Command
    kappa: float
    potential: str
    tau: float
    delta_gf: float
    delta_newton: float
    quad_degree: int
    config: Dict[str, Any]
    converged: bool
    exit_code: int
    wall_time: float
    outputs: List[str] = []
    results: Dict[str, Any] = {}
    warnings: List[str] = []
