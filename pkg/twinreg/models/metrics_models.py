"""Data models for selection outcomes and benchmark reports."""
from typing import FrozenSet, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

REPORT_COLUMNS = (
    "method",
    "grid_index",
    "lambda_mean",
    "fdr_mean",
    "fdr_se",
    "tdr_mean",
    "tdr_se",
    "size_mean",
    "rmse_mean",
    "rmse_se",
)


class SelectionOutcome(BaseModel):
    """Selected and true supports over the predictors ``0..p-1``."""
    model_config = ConfigDict(frozen=True)

    selected: FrozenSet[int]
    truth: FrozenSet[int]
    p: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_range(self) -> "SelectionOutcome":
        for name, indices in (("selected", self.selected), ("truth", self.truth)):
            bad = [j for j in indices if not 0 <= j < self.p]
            if bad:
                raise ValueError(f"{name} has indices outside 0..{self.p - 1}: {sorted(bad)[:5]}")
        return self


class ReplicationCurve(BaseModel):
    """Per-lambda metrics of one method on one replication.

    Cells of a failed fit are NaN.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    method: str
    rep: int = Field(..., ge=0)
    lambdas: np.ndarray
    fdr: np.ndarray
    tdr: np.ndarray
    fwer: np.ndarray
    size: np.ndarray
    rmse: np.ndarray

    @model_validator(mode="after")
    def _check_lengths(self) -> "ReplicationCurve":
        length = self.lambdas.shape[0]
        for name in ("fdr", "tdr", "fwer", "size", "rmse"):
            if getattr(self, name).shape != (length,):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected ({length},)")
        return self


class ReportRow(BaseModel):
    """Mean and standard error of the metrics at one grid index."""
    model_config = ConfigDict(frozen=True)

    method: str
    grid_index: int = Field(..., ge=0)
    lambda_mean: float
    fdr_mean: float
    fdr_se: Optional[float] = None
    tdr_mean: float
    tdr_se: Optional[float] = None
    size_mean: float
    rmse_mean: float
    rmse_se: Optional[float] = None
    fwer_mean: Optional[float] = Field(None, description="Empirical FWER; not part of the CSV layout")
    n_valid: Optional[int] = Field(None, description="Replications with a finite fit at this index")

    @field_validator("fdr_se", "tdr_se", "rmse_se", "fwer_mean", mode="before")
    @classmethod
    def _nan_is_missing(cls, value):
        if value is not None and isinstance(value, float) and np.isnan(value):
            return None
        return value


class SelectionReport(BaseModel):
    """Aggregated curves for every method, ordered by method then grid index."""
    model_config = ConfigDict(frozen=True)

    rows: List[ReportRow]
    n_reps: Optional[int] = Field(None, ge=1, description="Unknown when read back from CSV")

    @property
    def methods(self) -> List[str]:
        seen: List[str] = []
        for row in self.rows:
            if row.method not in seen:
                seen.append(row.method)
        return seen
