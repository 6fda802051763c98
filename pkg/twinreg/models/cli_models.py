"""Resolved command-line configuration."""
from typing import Any, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from twinreg.models.penalty_models import PenaltyKind
from twinreg.models.solver_models import Algorithm, CoordinateOrder
from twinreg.models.tuning_models import TwinFamily


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class CliConfig(BaseModel):
    """Every option a subcommand can take, after merging config file and flags.

    Unset values fall back to the application settings inside each command.
    """
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    command: Optional[str] = None
    input: Optional[str] = Field(None, description="Response-first CSV")
    output: Optional[str] = Field(None, description="Primary output file")
    coefficients: Optional[str] = Field(None, description="Coefficient file written by cv")

    # penalty
    penalty: PenaltyKind = PenaltyKind.TWIN_A
    lam: Optional[float] = Field(None, gt=0, alias="lambda")
    tau: Optional[float] = Field(None, gt=0)
    h: Optional[float] = Field(None, gt=0, lt=1)
    shape: Optional[float] = Field(None, gt=0)
    tau_scale: Optional[Literal["per_sample", "standardized"]] = None
    algorithm: Algorithm = Algorithm.CD
    center_response: Optional[bool] = None

    # solver
    max_sweeps: Optional[int] = Field(None, ge=1)
    tol: Optional[float] = Field(None, gt=0, lt=1)
    coordinate_order: Optional[CoordinateOrder] = None
    lla_outer_iters: Optional[int] = Field(None, ge=1)
    kkt_tol: Optional[float] = Field(None, gt=0)
    seed: Optional[int] = Field(None, ge=0)

    # paths and resampling
    n_lambda: Optional[int] = Field(None, ge=1)
    lambda_min_ratio: Optional[float] = Field(None, gt=0, lt=1)
    folds: Optional[int] = Field(None, ge=2)
    jobs: Optional[int] = Field(None, ge=1)
    splits: Optional[int] = Field(None, ge=1)
    test_size: Optional[int] = Field(None, ge=1)

    # benchmarks and simulation
    scenario: Optional[str] = Field(None, description="Scenario key=value file")
    model: Optional[int] = Field(None, ge=1, le=4)
    methods: Optional[List[str]] = None
    tau_sweep: Optional[List[float]] = None
    family: TwinFamily = TwinFamily.TWIN_A
    reps: Optional[int] = Field(None, ge=1)
    rep: int = Field(0, ge=0)
    rho: Optional[float] = Field(None, gt=-1, lt=1)
    snr: Optional[float] = Field(None, gt=0)

    # tuning rules
    rule: Literal["universal", "calibrated"] = "universal"
    n: Optional[int] = Field(None, ge=1)
    p: Optional[int] = Field(None, ge=1)
    sigma: Optional[float] = Field(None, gt=0)
    alpha: Optional[float] = Field(None, ge=0, le=1)
    epsilon_prior: Optional[float] = Field(None, gt=0, lt=1)
    high_dim: bool = False

    @field_validator("methods", "tau_sweep", mode="before")
    @classmethod
    def _comma_lists(cls, value: Any) -> Any:
        return _split_list(value)
