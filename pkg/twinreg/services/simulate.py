"""Synthetic data generation and Monte Carlo replication of selection studies.

Replication ``r`` of a scenario draws from ``SeedSequence(seed + r)``,
spawned into independent streams for the design, the coefficients, the
noise and the test set, so replications never share random numbers.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import lfilter

from twinreg.config import get_settings
from twinreg.errors import InputError, TwinRegError
from twinreg.models.metrics_models import ReplicationCurve, SelectionReport
from twinreg.models.penalty_models import PenaltySpec
from twinreg.models.simulation_models import (
    ActiveLayout,
    CoefficientScheme,
    DesignKind,
    MethodSpec,
    PathSettings,
    SimDataset,
    SimScenario,
)
from twinreg.models.solver_models import Algorithm, Problem, SolverConfig
from twinreg.models.tuning_models import TwinFamily
from twinreg.services import metrics, penalty
from twinreg.services.solver import destandardize, fit_path, standardize
from twinreg.utils import io

logger = logging.getLogger(__name__)

_DESIGN, _COEFFICIENTS, _NOISE, _TEST = range(4)

# (k, scheme, geometric ratio) per model; all use p = 1000 and an AR(1) design
_MODEL_PRESETS = {
    1: (50, CoefficientScheme.UNIFORM, 0.8),
    2: (50, CoefficientScheme.GEOMETRIC, 0.95),
    3: (25, CoefficientScheme.UNIFORM, 0.8),
    4: (25, CoefficientScheme.GEOMETRIC, 0.8),
}


def streams(scenario: SimScenario, rep: int = 0) -> List[np.random.Generator]:
    """Design, coefficient, noise and test-set generators of replication ``rep``."""
    children = np.random.SeedSequence(scenario.seed + rep).spawn(4)
    return [np.random.default_rng(child) for child in children]


def model_preset(
    model: int,
    n: int = 250,
    rho: float = -0.75,
    snr: float = 10.0,
    seed: int = 0,
    **overrides,
) -> SimScenario:
    """One of the four AR(1) benchmark models with p = 1000.

    Models 1 and 3 draw uniform magnitudes with 50 and 25 signals; models 2
    and 4 use geometric decay with ratios 0.95 and 0.8.
    """
    if model not in _MODEL_PRESETS:
        raise InputError(f"model must be one of {sorted(_MODEL_PRESETS)}, got {model}")
    k, scheme, decay = _MODEL_PRESETS[model]
    values = dict(
        n=n,
        p=1000,
        k=k,
        rho=rho,
        scheme=scheme,
        decay_c=decay,
        snr=snr,
        seed=seed,
        design_kind=DesignKind.AR1,
    )
    values.update(overrides)
    return SimScenario(**values)


def _ar1_rows(rng: np.random.Generator, rows: int, p: int, rho: float) -> np.ndarray:
    # x_1 = e_1, x_j = rho x_{j-1} + sqrt(1 - rho^2) e_j along each row
    shocks = rng.standard_normal((rows, p))
    shocks[:, 1:] *= math.sqrt(1.0 - rho * rho)
    if rho == 0.0:
        return shocks
    return lfilter([1.0], [1.0, -rho], shocks, axis=1)


def gen_design(
    scenario: SimScenario,
    rng: Optional[np.random.Generator] = None,
    rows: Optional[int] = None,
) -> np.ndarray:
    """Draw an ``rows x p`` design (``rows`` defaults to ``n``).

    AR1 rows are N(0, Sigma) with ``Sigma_ij = rho^|i-j|``; IID entries are
    N(0, 1/n); the orthonormal design takes the Q factor of a Gaussian draw.

    Raises:
        InputError: For an orthonormal design with more columns than rows
    """
    rng = rng if rng is not None else streams(scenario)[_DESIGN]
    rows = rows if rows is not None else scenario.n
    p = scenario.p
    if scenario.design_kind == DesignKind.AR1:
        X = _ar1_rows(rng, rows, p, scenario.rho)
    elif scenario.design_kind == DesignKind.IID_GAUSSIAN:
        X = rng.standard_normal((rows, p)) / math.sqrt(scenario.n)
    else:
        if p > rows:
            raise InputError(f"orthonormal design needs p <= rows, got p={p}, rows={rows}")
        q, r = np.linalg.qr(rng.standard_normal((rows, p)))
        # fix column signs so the draw does not depend on the LAPACK sign convention
        X = q * np.sign(np.diag(r))
    return np.asfortranarray(X)


def gen_coefficients(
    scenario: SimScenario,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Sparse true coefficients and their support.

    Signals sit at ``k`` indices drawn without replacement (or the first
    ``k`` for the leading layout) and take values by scheme, in draw order:

    - uniform: magnitude U[0.5, 2] with a random sign
    - geometric: ``(-c)^(j-1)``
    - ladder: ``(-1)^j (j + 2) / 6``
    - constant: ``magnitude`` with a random sign
    """
    rng = rng if rng is not None else streams(scenario)[_COEFFICIENTS]
    k, p = scenario.k, scenario.p
    if scenario.active_layout == ActiveLayout.LEADING:
        indices = np.arange(k)
    else:
        indices = rng.choice(p, size=k, replace=False)
    j = np.arange(1, k + 1)
    if scenario.scheme == CoefficientScheme.UNIFORM:
        values = rng.uniform(0.5, 2.0, size=k) * rng.choice([-1.0, 1.0], size=k)
    elif scenario.scheme == CoefficientScheme.GEOMETRIC:
        values = (-scenario.decay_c) ** (j - 1)
    elif scenario.scheme == CoefficientScheme.LADDER:
        values = (-1.0) ** j * (j + 2) / 6.0
    else:
        values = scenario.magnitude * rng.choice([-1.0, 1.0], size=k)
    beta = np.zeros(p)
    beta[indices] = values
    return beta, tuple(int(i) for i in np.sort(indices))


def signal_variance(scenario: SimScenario, beta: np.ndarray) -> float:
    """``beta' Sigma beta`` for the row covariance of the scenario.

    The AR(1) product is formed in O(p) as forward plus backward
    exponential filters minus the diagonal.
    """
    beta = np.asarray(beta, dtype=np.float64)
    if scenario.design_kind != DesignKind.AR1:
        return float(beta @ beta) / scenario.n
    rho = scenario.rho
    forward = lfilter([1.0], [1.0, -rho], beta)
    backward = lfilter([1.0], [1.0, -rho], beta[::-1])[::-1]
    return float(beta @ (forward + backward - beta))


def gen_response(
    X: np.ndarray,
    beta: np.ndarray,
    scenario: SimScenario,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, float]:
    """``y = X beta + z`` with ``z ~ N(0, sigma^2)`` and ``sigma = sqrt(beta' Sigma beta) / snr``.

    Raises:
        InputError: On mismatched shapes, or a zero signal with no fixed sigma
    """
    rng = rng if rng is not None else streams(scenario)[_NOISE]
    X = np.asarray(X)
    beta = np.asarray(beta, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != beta.shape[0]:
        raise InputError(f"design {X.shape} and coefficients {beta.shape} disagree")
    if scenario.sigma is not None:
        sigma = scenario.sigma
    else:
        quad = signal_variance(scenario, beta)
        if quad <= 0.0:
            raise InputError("signal-to-noise ratio is undefined for a zero signal")
        sigma = math.sqrt(quad) / scenario.snr
    y = X @ beta + sigma * rng.standard_normal(X.shape[0])
    return y, sigma


def generate_dataset(scenario: SimScenario, rep: int = 0) -> SimDataset:
    """Draw replication ``rep`` of a scenario."""
    design_rng, coef_rng, noise_rng, _ = streams(scenario, rep)
    X = gen_design(scenario, design_rng)
    beta, active = gen_coefficients(scenario, coef_rng)
    y, sigma = gen_response(X, beta, scenario, noise_rng)
    signal = X @ beta
    realized = float(np.linalg.norm(signal) / (math.sqrt(scenario.n) * sigma)) if sigma > 0 else math.inf
    return SimDataset(
        problem=Problem(y=y, X=X),
        beta_true=beta,
        active_true=active,
        sigma=sigma,
        snr_realized=realized,
        seed=scenario.seed + rep,
    )


def generate_test_set(
    scenario: SimScenario,
    dataset: SimDataset,
    rep: int = 0,
    size: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Independent test rows from the training row distribution.

    Orthonormal and IID designs both draw N(0, 1/n) entries here, since the
    rows of an orthonormal training design are approximately so distributed.
    """
    rng = streams(scenario, rep)[_TEST]
    size = size if size is not None else scenario.test_size
    if scenario.design_kind == DesignKind.AR1:
        X = _ar1_rows(rng, size, scenario.p, scenario.rho)
    else:
        X = rng.standard_normal((size, scenario.p)) / math.sqrt(scenario.n)
    y = X @ dataset.beta_true + dataset.sigma * rng.standard_normal(size)
    return X, y


def export_dataset(dataset: SimDataset, path: Union[str, Path], scenario: Optional[SimScenario] = None) -> Path:
    """Write ``y,x1..xp`` to ``path`` and the truth to ``<path>.json``."""
    path = io.write_problem_csv(path, dataset.problem.y, dataset.problem.X)
    sidecar = {
        "beta_true": [float(b) for b in dataset.beta_true],
        "active_true": list(dataset.active_true),
        "sigma": dataset.sigma,
        "snr_realized": dataset.snr_realized,
        "seed": dataset.seed,
    }
    if scenario is not None:
        sidecar["scenario"] = scenario.model_dump(mode="json")
    io.write_json(sidecar, io.sidecar_path(path))
    logger.info("Exported dataset with n=%d, p=%d to %s", dataset.problem.n, dataset.problem.p, path)
    return path


def load_dataset(path: Union[str, Path]) -> SimDataset:
    """Read a dataset written by :func:`export_dataset`."""
    problem, _ = io.read_problem_csv(path)
    meta = io.read_json(io.sidecar_path(path))
    try:
        return SimDataset(
            problem=problem,
            beta_true=np.array(meta["beta_true"], dtype=np.float64),
            active_true=tuple(meta["active_true"]),
            sigma=meta["sigma"],
            snr_realized=meta["snr_realized"],
            seed=meta["seed"],
        )
    except KeyError as e:
        raise InputError(f"{io.sidecar_path(path)} lacks {e}") from e


def load_scenario(path: Union[str, Path], **overrides) -> SimScenario:
    """Scenario from a ``key=value`` (or JSON) file; explicit overrides win."""
    values = io.read_config_file(path)
    values = values.get("scenario", values)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SimScenario(**values)


def resolve_tau(spec: PenaltySpec, n: int) -> PenaltySpec:
    """Move a user-scale tau onto unit-norm columns (``tau * sqrt(n)`` for per-sample tau)."""
    if not spec.is_twin or get_settings().TAU_SCALE == "standardized":
        return spec
    return spec.model_copy(update={"tau": spec.tau * math.sqrt(n)})


def tau_sweep_methods(
    taus: Sequence[float],
    family: TwinFamily = TwinFamily.TWIN_A,
    algorithm: Algorithm = Algorithm.CD,
    h: Optional[float] = None,
) -> List[MethodSpec]:
    """One method per tau of a TWIN family (lambda is set by the path)."""
    methods = []
    for tau in taus:
        spec = penalty.twin_a(1.0, tau) if TwinFamily(family) == TwinFamily.TWIN_A else penalty.twin_b(1.0, tau, h)
        methods.append(MethodSpec(spec=spec, algorithm=algorithm))
    return methods


def _missing_curve(method: str, rep: int, length: int) -> ReplicationCurve:
    blank = np.full(length, np.nan)
    return ReplicationCurve(
        method=method, rep=rep, lambdas=blank, fdr=blank, tdr=blank, fwer=blank, size=blank, rmse=blank
    )


def replicate_once(
    scenario: SimScenario,
    methods: Sequence[MethodSpec],
    rep: int,
    path_settings: Optional[PathSettings] = None,
    config: Optional[SolverConfig] = None,
) -> List[ReplicationCurve]:
    """Fit every method's path on replication ``rep`` and score each grid point."""
    settings = get_settings()
    path_settings = path_settings or PathSettings()
    n_lambda = path_settings.n_lambda or settings.N_LAMBDA
    dataset = generate_dataset(scenario, rep)
    problem = standardize(dataset.problem, center_response=settings.CENTER_RESPONSE)
    X_test, y_test = generate_test_set(scenario, dataset, rep)

    curves = []
    for method in methods:
        template = resolve_tau(method.spec, problem.n)
        try:
            path = fit_path(
                problem,
                template,
                n_lambda=n_lambda,
                lambda_min_ratio=path_settings.lambda_min_ratio,
                config=config,
                algorithm=method.algorithm,
            )
        except (TwinRegError, ArithmeticError) as e:
            logger.warning("rep %d, %s: fit failed, cells marked missing: %s", rep, method.label, e)
            curves.append(_missing_curve(method.label, rep, n_lambda))
            continue
        rows = []
        for fit in path.fits:
            beta = destandardize(problem, fit.beta)
            result = metrics.outcome(beta, dataset.active_true)
            rows.append(
                (
                    metrics.fdr(result),
                    metrics.tdr(result),
                    metrics.fwer_indicator(result),
                    metrics.model_size(beta),
                    metrics.rmse(beta, X_test, y_test, intercept=problem.y_offset),
                )
            )
        table = np.array(rows, dtype=np.float64)
        curves.append(
            ReplicationCurve(
                method=method.label,
                rep=rep,
                lambdas=path.lambdas,
                fdr=table[:, 0],
                tdr=table[:, 1],
                fwer=table[:, 2],
                size=table[:, 3],
                rmse=table[:, 4],
            )
        )
    logger.debug("rep %d done (seed %d)", rep, dataset.seed)
    return curves


def run_replications(
    scenario: SimScenario,
    methods: Sequence[MethodSpec],
    n_reps: Optional[int] = None,
    path_settings: Optional[PathSettings] = None,
    config: Optional[SolverConfig] = None,
    jobs: Optional[int] = None,
) -> SelectionReport:
    """Monte Carlo study of selection and prediction along each method's path.

    Replications run on up to ``jobs`` threads; the report is reduced in
    replication order and does not depend on scheduling.

    Raises:
        InputError: If ``n_reps`` is below 1 or there are no methods
    """
    n_reps = n_reps if n_reps is not None else scenario.n_reps
    jobs = jobs if jobs is not None else get_settings().JOBS
    if n_reps < 1:
        raise InputError(f"n_reps must be at least 1, got {n_reps}")
    if not methods:
        raise InputError("no methods to benchmark")
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise InputError(f"method labels must be unique, got {labels}")
    logger.info(
        "Running %d replications of n=%d, p=%d, k=%d for %d methods on %d threads",
        n_reps,
        scenario.n,
        scenario.p,
        scenario.k,
        len(methods),
        jobs,
    )

    def run(rep: int) -> List[ReplicationCurve]:
        return replicate_once(scenario, methods, rep, path_settings, config)

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        per_rep = list(executor.map(run, range(n_reps)))
    return metrics.aggregate([curve for curves in per_rep for curve in curves])
