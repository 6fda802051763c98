"""Data models for simulation scenarios, generated datasets and benchmark methods."""
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from twinreg.models.penalty_models import PenaltySpec
from twinreg.models.solver_models import Algorithm, Problem


class DesignKind(str, Enum):
    """Distribution of the design rows."""
    AR1 = "ar1"
    IID_GAUSSIAN = "iid"
    ORTHONORMAL = "orthonormal"


class CoefficientScheme(str, Enum):
    """How the nonzero coefficients are drawn."""
    UNIFORM = "uniform"
    GEOMETRIC = "geometric"
    LADDER = "ladder"
    CONSTANT = "constant"


class ActiveLayout(str, Enum):
    """Where the nonzero coefficients sit."""
    RANDOM = "random"
    LEADING = "leading"


class SimScenario(BaseModel):
    """A synthetic regression experiment.

    ``snr`` sets the noise level as ``sqrt(beta' Sigma beta) / snr`` unless
    ``sigma`` is given, in which case it is used as is.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(..., ge=1, description="Training sample size")
    p: int = Field(..., ge=1, description="Number of predictors")
    k: int = Field(..., ge=1, description="Number of nonzero coefficients")
    rho: float = Field(default=0.0, gt=-1, lt=1, description="AR(1) correlation between neighbouring columns")
    scheme: CoefficientScheme = CoefficientScheme.UNIFORM
    decay_c: float = Field(default=0.8, gt=0, lt=1, description="Ratio of the geometric scheme")
    magnitude: float = Field(default=1.0, gt=0, description="Signal size of the constant scheme")
    snr: float = Field(default=10.0, gt=0, description="Signal-to-noise ratio")
    sigma: Optional[float] = Field(default=None, gt=0, description="Fixed noise level, overrides snr")
    seed: int = Field(default=0, ge=0, lt=2**63)
    design_kind: DesignKind = DesignKind.AR1
    active_layout: ActiveLayout = ActiveLayout.RANDOM
    n_reps: int = Field(default=20, ge=1, description="Replications in a benchmark run")
    test_size: int = Field(default=5000, ge=1, description="Rows of the independent test set")

    @model_validator(mode="after")
    def _check_dimensions(self) -> "SimScenario":
        if self.k > self.p:
            raise ValueError(f"k={self.k} exceeds p={self.p}")
        if self.design_kind == DesignKind.ORTHONORMAL and self.p > self.n:
            raise ValueError(f"orthonormal design needs p <= n, got p={self.p}, n={self.n}")
        if self.scheme == CoefficientScheme.GEOMETRIC and self.decay_c ** (self.k - 1) < np.finfo(np.float64).tiny:
            raise ValueError(
                f"geometric scheme with decay_c={self.decay_c} and k={self.k} makes the smallest signal "
                f"decay_c^(k-1) underflow to zero; raise decay_c or lower k"
            )
        return self


class SimDataset(BaseModel):
    """One draw of a scenario, on the scale it was generated."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    problem: Problem
    beta_true: np.ndarray
    active_true: Tuple[int, ...]
    sigma: float = Field(..., ge=0)
    snr_realized: float
    seed: int

    @model_validator(mode="after")
    def _check_truth(self) -> "SimDataset":
        if self.beta_true.shape != (self.problem.p,):
            raise ValueError("beta_true does not match the design")
        if tuple(int(j) for j in np.flatnonzero(self.beta_true)) != tuple(self.active_true):
            raise ValueError("active_true does not match the nonzero pattern of beta_true")
        return self


class MethodSpec(BaseModel):
    """A penalty template paired with a fitting algorithm."""
    model_config = ConfigDict(frozen=True)

    spec: PenaltySpec
    algorithm: Algorithm = Algorithm.CD
    name: Optional[str] = None

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        suffix = "" if self.algorithm == Algorithm.CD else f"/{self.algorithm.value}"
        return f"{self.spec.label()}{suffix}"


class PathSettings(BaseModel):
    """Lambda-grid settings shared by every path in a benchmark."""
    model_config = ConfigDict(frozen=True)

    n_lambda: Optional[int] = Field(None, ge=1)
    lambda_min_ratio: Optional[float] = Field(None, gt=0, lt=1)
