"""Selection and prediction metrics and cross-replication aggregation."""
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from twinreg.errors import InputError
from twinreg.models.metrics_models import (
    REPORT_COLUMNS,
    ReplicationCurve,
    ReportRow,
    SelectionOutcome,
    SelectionReport,
)

logger = logging.getLogger(__name__)


def support(beta: np.ndarray) -> FrozenSet[int]:
    return frozenset(int(j) for j in np.flatnonzero(beta))


def model_size(beta: np.ndarray) -> int:
    return int(np.count_nonzero(beta))


def outcome(beta_hat: np.ndarray, truth: Iterable[int]) -> SelectionOutcome:
    """Selection outcome of an estimate against a true support."""
    beta_hat = np.asarray(beta_hat)
    return SelectionOutcome(selected=support(beta_hat), truth=frozenset(truth), p=beta_hat.shape[0])


def fdr(result: SelectionOutcome) -> float:
    """False discovery proportion ``|S \\ T| / max(|S|, 1)``."""
    false = len(result.selected - result.truth)
    return false / max(len(result.selected), 1)


def tdr(result: SelectionOutcome) -> float:
    """True discovery proportion ``|S & T| / max(|T|, 1)``."""
    true = len(result.selected & result.truth)
    return true / max(len(result.truth), 1)


def fwer_indicator(result: SelectionOutcome) -> int:
    return int(bool(result.selected - result.truth))


def _prediction_residual(
    beta_hat: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    intercept: float,
) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] == 0:
        raise InputError("test set is empty")
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[1] != np.shape(beta_hat)[0]:
        raise InputError(
            f"test design {X.shape} does not match response ({y.shape[0]},) and coefficients ({np.shape(beta_hat)[0]},)"
        )
    return y - intercept - X @ beta_hat


def mspe(beta_hat: np.ndarray, X: np.ndarray, y: np.ndarray, intercept: float = 0.0) -> float:
    """Mean squared prediction error on a held-out set."""
    resid = _prediction_residual(beta_hat, X, y, intercept)
    return float(np.mean(resid * resid))


def rmse(beta_hat: np.ndarray, X: np.ndarray, y: np.ndarray, intercept: float = 0.0) -> float:
    """Root mean squared prediction error on a held-out set.

    Raises:
        InputError: If the test set is empty or the shapes disagree
    """
    return math.sqrt(mspe(beta_hat, X, y, intercept))


def _mean_se(block: np.ndarray):
    # column-wise over finite entries; se needs two or more
    finite = np.isfinite(block)
    counts = finite.sum(axis=0)
    filled = np.where(finite, block, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = filled.sum(axis=0) / counts
        dev = np.where(finite, block - means, 0.0)
        var = (dev * dev).sum(axis=0) / (counts - 1)
        se = np.sqrt(var / counts)
    means = np.where(counts > 0, means, np.nan)
    se = np.where(counts > 1, se, np.nan)
    return means, se, counts


def aggregate(curves: Sequence[ReplicationCurve]) -> SelectionReport:
    """Pointwise means and standard errors across replications, aligned by grid index.

    Methods are reported in sorted order and replications are reduced in
    rep order, so the report does not depend on the order of ``curves``.
    NaN cells (failed fits) are left out of both statistics.

    Raises:
        InputError: If no curves are given or one method has curves of different lengths
    """
    if not curves:
        raise InputError("no replication curves to aggregate")
    by_method: Dict[str, List[ReplicationCurve]] = defaultdict(list)
    for curve in curves:
        by_method[curve.method].append(curve)

    rows: List[ReportRow] = []
    n_reps = 0
    for method in sorted(by_method):
        group = sorted(by_method[method], key=lambda c: c.rep)
        lengths = {c.lambdas.shape[0] for c in group}
        if len(lengths) != 1:
            raise InputError(f"curves of {method} have different grid lengths: {sorted(lengths)}")
        n_reps = max(n_reps, len(group))
        stats = {
            name: _mean_se(np.vstack([getattr(c, name) for c in group]))
            for name in ("lambdas", "fdr", "tdr", "fwer", "size", "rmse")
        }
        for i in range(lengths.pop()):
            rows.append(
                ReportRow(
                    method=method,
                    grid_index=i,
                    lambda_mean=float(stats["lambdas"][0][i]),
                    fdr_mean=float(stats["fdr"][0][i]),
                    fdr_se=float(stats["fdr"][1][i]),
                    tdr_mean=float(stats["tdr"][0][i]),
                    tdr_se=float(stats["tdr"][1][i]),
                    size_mean=float(stats["size"][0][i]),
                    rmse_mean=float(stats["rmse"][0][i]),
                    rmse_se=float(stats["rmse"][1][i]),
                    fwer_mean=float(stats["fwer"][0][i]),
                    n_valid=int(stats["fdr"][2][i]),
                )
            )
        missing = int(sum(np.count_nonzero(~np.isfinite(c.fdr)) for c in group))
        if missing:
            logger.warning("%s: %d grid cells missing across %d replications", method, missing, len(group))
    return SelectionReport(rows=rows, n_reps=n_reps)


def report_frame(report: SelectionReport) -> pd.DataFrame:
    """The report as a DataFrame with the CSV columns."""
    records = [row.model_dump(include=set(REPORT_COLUMNS)) for row in report.rows]
    frame = pd.DataFrame.from_records(records, columns=list(REPORT_COLUMNS))
    numeric = list(REPORT_COLUMNS[2:])
    frame[numeric] = frame[numeric].astype(float)
    return frame


def write_report(report: SelectionReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    report_frame(report).to_csv(path, index=False, float_format="%.17g", na_rep="")
    logger.info("Wrote report with %d rows to %s", len(report.rows), path)
    return path


def read_report(path: Union[str, Path]) -> SelectionReport:
    """Load a report written by :func:`write_report`.

    Raises:
        InputError: If the file is missing or lacks report columns
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"report file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip", dtype={"method": str})
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise InputError(f"{path} lacks report columns {missing}")
    rows = [ReportRow(**record) for record in frame[list(REPORT_COLUMNS)].to_dict(orient="records")]
    return SelectionReport(rows=rows)


def curve_for(report: SelectionReport, method: str) -> pd.DataFrame:
    """Rows of one method, ordered by grid index."""
    frame = report_frame(report)
    curve = frame[frame["method"] == method].sort_values("grid_index").reset_index(drop=True)
    if curve.empty:
        raise InputError(f"method {method!r} not in report; have {report.methods}")
    return curve


def first_index_reaching(report: SelectionReport, method: str, tdr_level: float) -> Optional[int]:
    """Smallest grid index whose mean TDR reaches ``tdr_level``, or None."""
    curve = curve_for(report, method)
    hits = curve.index[curve["tdr_mean"] >= tdr_level]
    if len(hits) == 0:
        return None
    return int(curve.loc[hits[0], "grid_index"])
