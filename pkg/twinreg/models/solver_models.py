"""Data models for regression problems, solver settings and fits."""
from enum import Enum
from typing import Any, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from twinreg.config import get_settings
from twinreg.models.penalty_models import PenaltySpec

STANDARDIZED_NORM_TOL = 1e-10


def _frozen_array(value: Any, ndim: int, name: str, order: str = "C") -> np.ndarray:
    arr = np.array(value, dtype=np.float64, order=order, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


class Algorithm(str, Enum):
    """Fitting algorithm."""
    CD = "cd"
    MCLLA = "mclla"


class CoordinateOrder(str, Enum):
    """Order in which coordinates are visited during a sweep."""
    CYCLIC = "cyclic"
    RANDOM_PERMUTATION = "random_permutation"


class Problem(BaseModel):
    """Response vector and design matrix of a least-squares problem.

    ``column_norms`` holds the Euclidean norms of the columns before
    standardization and ``y_offset`` the mean removed from the response
    (0 when the response was left as is).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    y: np.ndarray = Field(..., description="Response, length n")
    X: np.ndarray = Field(..., description="Design, n x p, column-major")
    standardized: bool = Field(default=False, description="Columns have unit Euclidean norm")
    column_norms: Optional[np.ndarray] = Field(
        default=None,
        description="Pre-standardization column norms (ones when never standardized)",
    )
    y_offset: float = Field(default=0.0, description="Mean subtracted from the response")

    @field_validator("y", mode="before")
    @classmethod
    def _check_y(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, 1, "y")

    @field_validator("X", mode="before")
    @classmethod
    def _check_x(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, 2, "X", order="F")

    @field_validator("column_norms", mode="before")
    @classmethod
    def _check_norms(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        return _frozen_array(value, 1, "column_norms")

    @model_validator(mode="after")
    def _check_shapes(self) -> "Problem":
        n, p = self.X.shape
        if n < 1 or p < 1:
            raise ValueError(f"design must have n >= 1 and p >= 1, got {self.X.shape}")
        if self.y.shape[0] != n:
            raise ValueError(f"y has length {self.y.shape[0]} but X has {n} rows")
        if self.column_norms is not None and self.column_norms.shape[0] != p:
            raise ValueError(f"column_norms has length {self.column_norms.shape[0]}, expected {p}")
        if self.standardized:
            sq = np.einsum("ij,ij->j", self.X, self.X)
            worst = float(np.max(np.abs(sq - 1.0)))
            if worst > STANDARDIZED_NORM_TOL:
                raise ValueError(f"standardized design has a column with |norm^2 - 1| = {worst:.3g}")
        return self

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def norms(self) -> np.ndarray:
        """Pre-standardization column norms, ones when never standardized."""
        if self.column_norms is None:
            return np.ones(self.p)
        return self.column_norms


class SolverConfig(BaseModel):
    """Settings for a single fit."""
    model_config = ConfigDict(frozen=True)

    max_sweeps: int = Field(default=1000, ge=1)
    tol: float = Field(default=1e-7, gt=0, lt=1)
    coordinate_order: CoordinateOrder = Field(default=CoordinateOrder.RANDOM_PERMUTATION)
    rng_seed: int = Field(default=0, ge=0, lt=2**64)
    lla_outer_iters: int = Field(default=3, ge=1)
    kkt_tol: float = Field(default=1e-4, gt=0)
    active_set_min_p: int = Field(
        default=2000,
        ge=1,
        description="Active-set cycling is used when p exceeds this value",
    )

    @classmethod
    def from_settings(cls, **overrides: Any) -> "SolverConfig":
        """Build a config from the application settings, explicit values winning."""
        settings = get_settings()
        values = {
            "max_sweeps": settings.MAX_SWEEPS,
            "tol": settings.TOL,
            "coordinate_order": settings.COORDINATE_ORDER,
            "rng_seed": settings.SEED,
            "lla_outer_iters": settings.LLA_OUTER_ITERS,
            "kkt_tol": settings.KKT_TOL,
            "active_set_min_p": settings.ACTIVE_SET_MIN_P,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class FitResult(BaseModel):
    """Outcome of one penalized least-squares fit."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    beta: np.ndarray = Field(..., description="Coefficients on the standardized scale")
    active_set: Tuple[int, ...] = Field(..., description="Indices of nonzero coefficients")
    objective: float
    sweeps_used: int = Field(..., ge=0)
    converged: bool
    kkt_max_violation: float
    lam: float = Field(..., description="Penalty level of this fit")
    algorithm: Algorithm = Algorithm.CD

    @model_validator(mode="after")
    def _check_support(self) -> "FitResult":
        support = tuple(int(j) for j in np.flatnonzero(self.beta))
        if support != tuple(self.active_set):
            raise ValueError("active_set does not match the nonzero pattern of beta")
        return self


class PathResult(BaseModel):
    """Fits along a decreasing lambda grid at fixed tau."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lambdas: np.ndarray
    fits: List[FitResult]
    tau: Optional[float] = Field(None, description="Tau held fixed along the path (TWIN only)")
    spec: PenaltySpec
    algorithm: Algorithm = Algorithm.CD

    @model_validator(mode="after")
    def _check_grid(self) -> "PathResult":
        if len(self.fits) != self.lambdas.shape[0]:
            raise ValueError("fits and lambdas differ in length")
        if self.lambdas.shape[0] > 1 and not np.all(np.diff(self.lambdas) < 0):
            raise ValueError("lambdas must be strictly decreasing")
        return self

    def coefficients(self) -> np.ndarray:
        """Coefficients as an ``n_lambda x p`` array."""
        return np.vstack([fit.beta for fit in self.fits])


class KktReport(BaseModel):
    """Result of a KKT check."""
    model_config = ConfigDict(frozen=True)

    max_violation: float
    passed: bool
