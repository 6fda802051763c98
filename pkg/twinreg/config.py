"""Configuration settings for the TWIN regression toolkit."""
from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Library and CLI defaults."""

    model_config = SettingsConfigDict(
        env_prefix="TWINREG_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",  # Ignore extra fields in .env file
        case_sensitive=True,
    )

    # Application
    APP_NAME: str = Field(
        default="twinreg",
        description="Name of the application",
    )

    DEBUG: bool = Field(
        default=False,
        description="Enable debug logging",
    )

    LOG_LEVEL: str = Field(
        default="INFO",
        description="Logging level used by the command-line front end",
    )

    # Solver
    MAX_SWEEPS: int = Field(
        default=1000,
        ge=1,
        description="Maximum number of coordinate sweeps per fit",
    )

    TOL: float = Field(
        default=1e-7,
        gt=0,
        lt=1,
        description="Relative max-coordinate-change convergence threshold",
    )

    COORDINATE_ORDER: Literal["cyclic", "random_permutation"] = Field(
        default="random_permutation",
        description="Coordinate visiting order within a sweep",
    )

    LLA_OUTER_ITERS: int = Field(
        default=3,
        ge=1,
        description="Outer local linear approximation iterations for MCLLA",
    )

    KKT_TOL: float = Field(
        default=1e-4,
        gt=0,
        description="Tolerance used when checking KKT conditions of a fit",
    )

    ACTIVE_SET_MIN_P: int = Field(
        default=2000,
        ge=1,
        description="Use active-set cycling when p exceeds this value",
    )

    # Paths
    N_LAMBDA: int = Field(
        default=100,
        ge=1,
        description="Number of lambda values on a regularization path",
    )

    LAMBDA_MIN_RATIO_HIGH_DIM: float = Field(
        default=0.05,
        gt=0,
        lt=1,
        description="Smallest lambda as a fraction of the path start when p > n",
    )

    LAMBDA_MIN_RATIO_LOW_DIM: float = Field(
        default=0.001,
        gt=0,
        lt=1,
        description="Smallest lambda as a fraction of the path start when p <= n",
    )

    # Penalties
    DEFAULT_TAU: float = Field(
        default=0.1,
        gt=0,
        description="Default peak location for TWIN penalties",
    )

    DEFAULT_H: float = Field(
        default=0.5,
        gt=0,
        lt=1,
        description="Default plateau height fraction h for TWIN-b",
    )

    TAU_SCALE: Literal["per_sample", "standardized"] = Field(
        default="per_sample",
        description=(
            "Scale on which user-supplied tau is read: per_sample multiplies by "
            "sqrt(n) to match unit-norm columns"
        ),
    )

    MCP_GAMMA: float = Field(
        default=1.4,
        gt=1,
        description="Default MCP concavity parameter",
    )

    SCAD_A: float = Field(
        default=3.7,
        gt=2,
        description="Default SCAD shape parameter",
    )

    DERIVATIVE_EPS_RATIO: float = Field(
        default=1e-6,
        gt=0,
        description="TWIN-a practical flat-region threshold as a fraction of lambda",
    )

    # Tuning
    CALIBRATION_GRID_POINTS: int = Field(
        default=32,
        ge=2,
        description="Number of tau values scanned by orthogonal calibration",
    )

    CV_FOLDS: int = Field(
        default=10,
        ge=2,
        description="Default number of cross-validation folds",
    )

    # Simulation
    TEST_SIZE: int = Field(
        default=5000,
        ge=1,
        description="Rows in the independent test set drawn per replication",
    )

    CENTER_RESPONSE: bool = Field(
        default=True,
        description="Center the response before fitting",
    )

    SEED: int = Field(
        default=0,
        ge=0,
        description="Default base seed",
    )

    JOBS: int = Field(
        default=1,
        ge=1,
        description="Worker threads for replications and CV folds",
    )


@lru_cache()
def get_settings() -> Settings:
    """Get application settings.

    Returns:
        Settings: Application settings
    """
    return Settings()
