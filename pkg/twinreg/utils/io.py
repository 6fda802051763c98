"""CSV, JSON and key=value file helpers."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values

from twinreg.errors import InputError
from twinreg.models.solver_models import Problem

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# shortest text that reads back to the same double
FLOAT_FORMAT = "%.17g"


def _existing_file(path: PathLike) -> Path:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    return path


def read_problem_csv(path: PathLike) -> Tuple[Problem, List[str]]:
    """Load a response-first CSV with a header row.

    The first column is the response and the remaining columns are the
    predictors, all numeric and finite.

    Returns:
        The problem on its original scale and the predictor names

    Raises:
        InputError: If the file is missing, has fewer than two columns or
            holds anything other than finite numbers
    """
    path = _existing_file(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot parse {path}: {exc}") from exc
    if frame.shape[1] < 2:
        raise InputError(f"{path} needs a response column and at least one predictor, got {frame.shape[1]} columns")
    if frame.shape[0] < 1:
        raise InputError(f"{path} has no data rows")
    bad = [str(c) for c in frame.columns if not pd.api.types.is_numeric_dtype(frame[c])]
    if bad:
        raise InputError(f"{path} has non-numeric columns: {bad[:5]}")
    values = frame.to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        row, col = np.argwhere(~np.isfinite(values))[0]
        raise InputError(f"{path} has a missing or non-finite value at row {row + 1}, column {frame.columns[col]!r}")
    logger.debug("Read %d rows and %d predictors from %s", values.shape[0], values.shape[1] - 1, path)
    problem = Problem(y=values[:, 0], X=values[:, 1:])
    return problem, [str(c) for c in frame.columns[1:]]


def write_problem_csv(
    path: PathLike,
    y: np.ndarray,
    X: np.ndarray,
    names: Optional[Sequence[str]] = None,
) -> Path:
    """Write ``y`` and ``X`` as ``y,x1..xp`` (or the given predictor names)."""
    path = Path(path)
    X = np.asarray(X)
    if names is None:
        names = [f"x{j + 1}" for j in range(X.shape[1])]
    frame = pd.DataFrame(X, columns=list(names))
    frame.insert(0, "y", np.asarray(y))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def read_frame(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(_existing_file(path), float_precision="round_trip")


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    path = _existing_file(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise InputError(f"{path} must hold a JSON object")
    return data


def read_key_values(path: PathLike) -> Dict[str, str]:
    """Flat ``key=value`` file; blank values and comments are dropped."""
    path = _existing_file(path)
    return {k.lower(): v for k, v in dotenv_values(path).items() if v not in (None, "")}


def read_config_file(path: PathLike) -> Dict[str, Any]:
    """A JSON object (``.json``) or a ``key=value`` file."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return read_json(path)
    return read_key_values(path)


def manifest_path(output: PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")


def sidecar_path(output: PathLike) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".json")
