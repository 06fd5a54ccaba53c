from pathlib import Path
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

PACKAGE_DIR = Path(__file__).resolve().parents[1]


class Settings(BaseSettings):
    # App Settings
    PROJECT_NAME: str = "gl-minimizers"
    VERSION: str = "0.1.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOGGING_CONFIG: Optional[str] = str(PACKAGE_DIR / "logging.ini")

    # Output
    OUTPUT_DIR: str = "results"

    # Eigen solver
    EIGEN_TOL: float = 1e-8
    EIGEN_MAX_ITER: int = 1000
    EIGEN_SHIFT_FACTOR: float = 1e-3
    EIGEN_SHIFT_RETRIES: int = 3
    EIGEN_GUARD_VECTORS: int = 3

    # Local uniqueness verdict
    EPS_ZERO_FACTOR: float = 1e-6
    GAP_MIN: float = 1e-3
    ANGLE_TOL: float = 1e-3

    # Newton
    NEWTON_DIVERGENCE_FACTOR: float = 10.0
    NEWTON_RESIDUAL_FLOOR: float = 1e-13
    FINAL_RESIDUAL_TOL: float = 1e-8

    # LOD
    LOD_MIN_RATIO: int = 8
    LOD_CHUNK: int = 64
    LOD_DECOMPOSITION_CHECK: bool = False

    # Diagnostics
    MAX_MODULUS_SLACK: float = 0.05

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="GLFEM_",
        case_sensitive=True,
        extra="ignore",
    )

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Invalid LOG_LEVEL {v!r}. Use one of DEBUG, INFO, WARNING, ERROR, CRITICAL")
        return level

    @field_validator(
        "EIGEN_TOL",
        "EIGEN_SHIFT_FACTOR",
        "EPS_ZERO_FACTOR",
        "GAP_MIN",
        "ANGLE_TOL",
        "NEWTON_DIVERGENCE_FACTOR",
        "NEWTON_RESIDUAL_FLOOR",
        "FINAL_RESIDUAL_TOL",
    )
    @classmethod
    def validate_positive(cls, v: float, info) -> float:
        if v <= 0:
            raise ValueError(f"{info.field_name} must be positive, got {v}")
        return v

    @field_validator("EIGEN_MAX_ITER", "LOD_MIN_RATIO", "LOD_CHUNK")
    @classmethod
    def validate_positive_int(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be at least 1, got {v}")
        return v


settings = Settings()
