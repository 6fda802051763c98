"""Data models for tuning-parameter selection."""
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class TwinFamily(str, Enum):
    """TWIN variant targeted by a tuning rule."""
    TWIN_A = "twin-a"
    TWIN_B = "twin-b"


class UniversalInputs(BaseModel):
    """Sample size, dimension and noise level behind the universal rules."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Number of observations")
    p: int = Field(..., ge=1, description="Number of predictors")
    sigma: float = Field(..., gt=0, description="Noise standard deviation")
    epsilon_prior: Optional[float] = Field(
        None,
        gt=0,
        lt=1,
        description="Upper bound on the sparsity fraction k/p (high-dimensional TWIN-b rule)",
    )

    @property
    def delta(self) -> float:
        return self.n / self.p


class CalibrationTarget(BaseModel):
    """Family-wise error level for the orthogonal-design calibration."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., ge=0, le=1, description="Target FWER level")
    p: int = Field(..., ge=1)
    sigma: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_tail(self) -> "CalibrationTarget":
        if not self.alpha / (2 * self.p) < 0.5:
            raise ValueError(f"alpha/(2p) must be below 1/2, got {self.alpha / (2 * self.p)}")
        return self


class TuningPair(BaseModel):
    """A (lambda, tau) pair produced by a tuning rule."""
    model_config = ConfigDict(frozen=True)

    lam: float = Field(..., gt=0)
    tau: float = Field(..., gt=0)
    family: TwinFamily
    rule: str = Field(..., description="universal, universal-high-dim or calibrated")
    target: Optional[float] = Field(None, description="Calibration gap target sigma * z_(1 - alpha/2p)")
    selections: Optional[int] = Field(None, description="Selections on the supplied data, when scored")

    def as_tuple(self):
        return self.lam, self.tau


class CvResult(BaseModel):
    """K-fold cross-validation curve over a lambda grid."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lambdas: np.ndarray
    cv_curve: np.ndarray = Field(..., description="Mean held-out squared error per lambda")
    cv_se: np.ndarray = Field(..., description="Standard error of the fold errors per lambda")
    best_index: int = Field(..., ge=0)
    folds: int = Field(..., ge=2)

    @property
    def best_lambda(self) -> float:
        return float(self.lambdas[self.best_index])


class SplitRecord(BaseModel):
    """Held-out error and model size of one random train/test split."""
    model_config = ConfigDict(frozen=True)

    split: int
    best_lambda: float
    mspe: float
    model_size: int
    selected: Tuple[int, ...] = ()


class SplitEvaluation(BaseModel):
    """Repeated train/test split evaluation with CV-selected lambda."""
    model_config = ConfigDict(frozen=True)

    method: str
    records: List[SplitRecord]
    mspe_mean: float
    mspe_se: Optional[float] = Field(None, description="Absent with a single split")
    size_mean: float

    def selection_counts(self) -> Dict[int, int]:
        """How many splits selected each predictor."""
        counts: Dict[int, int] = {}
        for record in self.records:
            for j in record.selected:
                counts[j] = counts.get(j, 0) + 1
        return dict(sorted(counts.items(), key=lambda item: (-item[1], item[0])))
