"""Tuning-parameter rules: universal choices, orthogonal FDR calibration and cross-validation."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from twinreg.config import get_settings
from twinreg.errors import TuningError
from twinreg.models.penalty_models import PenaltySpec, TwinAParams
from twinreg.models.solver_models import Algorithm, FitResult, Problem, SolverConfig
from twinreg.models.tuning_models import (
    CalibrationTarget,
    CvResult,
    SplitEvaluation,
    SplitRecord,
    TuningPair,
    TwinFamily,
    UniversalInputs,
)
from twinreg.services import penalty
from twinreg.services.metrics import mspe
from twinreg.services.solver import (
    default_lambda_min_ratio,
    fit_cd,
    fit_path,
    lambda_grid,
    path_lambda_max,
    standardize,
)

logger = logging.getLogger(__name__)

# leading constant of the universal tau rules
_UNIVERSAL_SLACK = 0.99
_CALIBRATION_SPAN = (0.05, 20.0)


def normal_quantile_upper(q: float) -> float:
    """``Phi^{-1}(1 - q)`` for ``0 < q < 1``."""
    if not 0.0 < q < 1.0:
        raise TuningError(f"upper-tail probability must lie in (0, 1), got {q}")
    return float(norm.isf(q))


def _sqrt_two_log_p(p: int) -> float:
    if p < 2:
        raise TuningError(f"universal rules need p >= 2 so that log p > 0, got p={p}")
    return math.sqrt(2.0 * math.log(p))


def universal_twin_a(inputs: UniversalInputs) -> TuningPair:
    """Universal (lambda, tau) for TWIN-a.

    ``lambda = (1 + delta^-1/2) sigma sqrt(2 log p)`` and
    ``tau = (0.99 - delta^-1/2)^-2 lambda`` with ``delta = n / p``.

    Raises:
        TuningError: If ``0.99 <= delta^-1/2`` or ``p < 2``
    """
    inv_root_delta = 1.0 / math.sqrt(inputs.delta)
    gap = _UNIVERSAL_SLACK - inv_root_delta
    if gap <= 0.0:
        raise TuningError(
            "universal TWIN-a rule requires n sufficiently larger than p: "
            f"need n/p > {1.0 / _UNIVERSAL_SLACK ** 2:.4f}, got n/p = {inputs.delta:.4g}"
        )
    lam = (1.0 + inv_root_delta) * inputs.sigma * _sqrt_two_log_p(inputs.p)
    return TuningPair(lam=lam, tau=lam / gap ** 2, family=TwinFamily.TWIN_A, rule="universal")


def universal_twin_b(inputs: UniversalInputs, high_dim: bool = False) -> TuningPair:
    """Universal (lambda, tau) for TWIN-b.

    ``lambda = sigma sqrt(2 log p)``. The low-dimensional rule scales tau by
    ``(0.99 - delta^-1/2)^-2``; the high-dimensional rule uses the sparsity
    bound ``epsilon_prior`` and ``[0.99 - sqrt((eps/delta + 1) / 2)]^-2``.

    Raises:
        TuningError: On a violated precondition of the chosen branch
    """
    lam = inputs.sigma * _sqrt_two_log_p(inputs.p)
    if high_dim:
        if inputs.epsilon_prior is None:
            raise TuningError("high-dimensional TWIN-b rule requires epsilon_prior")
        ratio = inputs.epsilon_prior / inputs.delta
        gap = _UNIVERSAL_SLACK - math.sqrt((ratio + 1.0) / 2.0)
        if gap <= 0.0:
            raise TuningError(
                "high-dimensional TWIN-b rule requires sqrt((epsilon/delta + 1) / 2) < 0.99, "
                f"got epsilon/delta = {ratio:.4g}"
            )
        rule = "universal-high-dim"
    else:
        gap = _UNIVERSAL_SLACK - 1.0 / math.sqrt(inputs.delta)
        if gap <= 0.0:
            raise TuningError(
                "universal TWIN-b rule requires n sufficiently larger than p: "
                f"need n/p > {1.0 / _UNIVERSAL_SLACK ** 2:.4f}, got n/p = {inputs.delta:.4g}"
            )
        rule = "universal"
    return TuningPair(lam=lam, tau=lam / gap ** 2, family=TwinFamily.TWIN_B, rule=rule)


def _family_spec(family: TwinFamily, lam: float, tau: float, h: Optional[float]) -> PenaltySpec:
    if TwinFamily(family) == TwinFamily.TWIN_A:
        return penalty.twin_a(lam, tau)
    return penalty.twin_b(lam, tau, h)


def _count_selections(spec: PenaltySpec, scores: np.ndarray) -> int:
    return int(np.count_nonzero(penalty.thresholds(spec, scores)))


def calibrate_orthogonal(
    target: CalibrationTarget,
    family: TwinFamily,
    data: Optional[Problem] = None,
    h: Optional[float] = None,
    grid_points: Optional[int] = None,
) -> TuningPair:
    """Choose (lambda, tau) so that the thresholding gap ``min_t t + P'(t)`` equals
    ``sigma * Phi^{-1}(1 - alpha / 2p)``.

    On an orthonormal design this bounds the family-wise error at alpha.
    tau runs over a log grid spanning ``[0.05, 20]`` times the target; for
    each tau the gap rises on ``(0, tau]`` and falls beyond it, so up to two
    lambdas hit the target. With ``data`` the pair selecting the most
    variables by one-shot thresholding of ``X' y`` wins, otherwise the pair
    with the smallest lambda.

    Raises:
        TuningError: If alpha is zero or no candidate solves the equation
    """
    if target.alpha <= 0.0:
        raise TuningError("alpha = 0 puts the calibration target at infinity; use alpha > 0")
    gap_target = target.sigma * normal_quantile_upper(target.alpha / (2.0 * target.p))
    n_points = grid_points or get_settings().CALIBRATION_GRID_POINTS
    taus = np.geomspace(_CALIBRATION_SPAN[0] * gap_target, _CALIBRATION_SPAN[1] * gap_target, n_points)

    candidates: List[Tuple[float, float]] = []
    for tau in taus:
        if tau < gap_target:
            # the gap never exceeds tau
            continue

        def excess(lam: float, tau: float = float(tau)) -> float:
            return penalty.min_gap(_family_spec(family, lam, tau, h)) - gap_target

        unit = _family_spec(family, 1.0, float(tau), h)
        m = unit.m1 if isinstance(unit, TwinAParams) else unit.m2
        # the falling piece m tau + lambda (1 - m) reaches zero here
        upper = tau * m / (m - 1.0)
        for lo, hi in ((gap_target * 1e-12, float(tau)), (float(tau), upper)):
            try:
                lam = brentq(excess, lo, hi, xtol=1e-14 * gap_target, rtol=4 * np.finfo(float).eps)
            except ValueError as exc:
                logger.debug("no root on [%g, %g] for tau=%g: %s", lo, hi, tau, exc)
                continue
            candidates.append((float(lam), float(tau)))

    if not candidates:
        raise TuningError(
            f"calibration found no (lambda, tau) with gap {gap_target:.6g}; "
            f"tau grid [{taus[0]:.4g}, {taus[-1]:.4g}] with {n_points} points"
        )
    logger.debug("calibration for %s: %d candidate pairs", family, len(candidates))

    selections: Optional[int] = None
    if data is None:
        lam, tau = min(candidates)
    else:
        scores = data.X.T @ data.y
        scored = [(-_count_selections(_family_spec(family, l, t, h), scores), l, t) for l, t in candidates]
        best = min(scored)
        selections, lam, tau = -best[0], best[1], best[2]

    return TuningPair(
        lam=lam,
        tau=tau,
        family=TwinFamily(family),
        rule="calibrated",
        target=gap_target,
        selections=selections,
    )


def estimate_sigma(
    problem: Problem,
    iterations: int = 2,
    config: Optional[SolverConfig] = None,
) -> float:
    """Plug-in noise level from repeated Lasso fits.

    Starts from the standard deviation of ``y``, fits the Lasso at
    ``sigma sqrt(2 log p)`` and re-estimates sigma from the residual with
    ``n - |A|`` degrees of freedom.

    Raises:
        TuningError: If the residual vanishes
    """
    y = problem.y
    sigma = float(np.std(y, ddof=1 if problem.n > 1 else 0))
    if sigma == 0.0:
        raise TuningError("response is constant; cannot estimate the noise level")
    factor = math.sqrt(2.0 * math.log(max(problem.p, 2)))
    for step in range(iterations):
        fit = fit_cd(problem, penalty.lasso(sigma * factor), config)
        r = y - problem.X @ fit.beta
        dof = max(problem.n - len(fit.active_set), 1)
        sigma = float(np.linalg.norm(r) / math.sqrt(dof))
        logger.debug("sigma estimate step %d: %.6g with |A|=%d", step + 1, sigma, len(fit.active_set))
        if sigma == 0.0:
            raise TuningError("Lasso residual is zero; cannot estimate the noise level")
    return sigma


def assign_folds(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label for each row from a seeded shuffle of ``0..n-1``."""
    if folds < 2:
        raise TuningError(f"cross-validation needs at least 2 folds, got {folds}")
    if n < folds:
        raise TuningError(f"cannot split n={n} rows into {folds} folds")
    order = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[order] = np.arange(n) % folds
    return labels


def _fold_errors(
    problem: Problem,
    template: PenaltySpec,
    grid: np.ndarray,
    labels: np.ndarray,
    fold: int,
    config: Optional[SolverConfig],
    algorithm: Algorithm,
    center_response: bool,
) -> np.ndarray:
    test = labels == fold
    train = ~test
    y_train = problem.y[train]
    y_test = problem.y[test]
    if np.ptp(y_train) == 0.0:
        logger.warning("fold %d: training response has zero variance", fold)
    # a single held-out row is trivially constant
    if y_test.size > 1 and np.ptp(y_test) == 0.0:
        logger.warning("fold %d: held-out response has zero variance", fold)
    train_problem = standardize(Problem(y=y_train, X=problem.X[train]), center_response=center_response)
    factor = math.sqrt(train_problem.n / problem.n)
    path = fit_path(
        train_problem,
        template.scaled(factor),
        lambdas=grid * factor,
        config=config,
        algorithm=algorithm,
    )
    X_test = problem.X[test]
    coefs = path.coefficients() / train_problem.norms
    predictions = X_test @ coefs.T + train_problem.y_offset
    resid = y_test[:, None] - predictions
    return np.mean(resid * resid, axis=0)


def cross_validate(
    problem: Problem,
    template: PenaltySpec,
    folds: Optional[int] = None,
    config: Optional[SolverConfig] = None,
    algorithm: Algorithm = Algorithm.CD,
    n_lambda: Optional[int] = None,
    lambda_min_ratio: Optional[float] = None,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    center_response: Optional[bool] = None,
) -> CvResult:
    """K-fold cross-validation over the full-data lambda path.

    Each training fold is restandardized and fitted on the full-data grid
    with lambda and tau scaled by ``sqrt(n_train / n)``. The curve is the
    mean held-out squared error; ties resolve to the larger lambda.

    Args:
        problem: Standardized full-data problem
        template: Penalty at the full-data scale (its lambda is ignored)
        folds: Number of folds, default ``CV_FOLDS``
        seed: Fold-assignment seed, default ``SEED``
        jobs: Worker threads for the folds, default ``JOBS``

    Returns:
        The curve, its standard errors and the selected index

    Raises:
        TuningError: If there are fewer than 2 folds or fewer rows than folds
    """
    settings = get_settings()
    folds = folds if folds is not None else settings.CV_FOLDS
    seed = seed if seed is not None else settings.SEED
    jobs = jobs if jobs is not None else settings.JOBS
    if center_response is None:
        center_response = settings.CENTER_RESPONSE
    labels = assign_folds(problem.n, folds, seed)

    start = path_lambda_max(problem, template)
    if start == 0.0:
        raise TuningError("X' y is zero; there is no lambda path to cross-validate")
    grid = lambda_grid(
        start,
        n_lambda if n_lambda is not None else settings.N_LAMBDA,
        lambda_min_ratio if lambda_min_ratio is not None else default_lambda_min_ratio(problem),
    )

    def run(fold: int) -> np.ndarray:
        return _fold_errors(problem, template, grid, labels, fold, config, algorithm, center_response)

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        errors = np.vstack(list(executor.map(run, range(folds))))

    curve = errors.mean(axis=0)
    se = errors.std(axis=0, ddof=1) / math.sqrt(folds)
    best = int(np.argmin(curve))
    logger.info(
        "%d-fold CV for %s: best lambda %g (index %d of %d), error %.6g",
        folds,
        template.label(),
        grid[best],
        best,
        grid.size,
        curve[best],
    )
    return CvResult(lambdas=grid, cv_curve=curve, cv_se=se, best_index=best, folds=folds)


def refit_best(
    problem: Problem,
    template: PenaltySpec,
    cv: CvResult,
    config: Optional[SolverConfig] = None,
    algorithm: Algorithm = Algorithm.CD,
) -> FitResult:
    """Fit on the full data at the CV-selected lambda, warm-started down the grid."""
    path = fit_path(
        problem,
        template,
        lambdas=cv.lambdas[: cv.best_index + 1],
        config=config,
        algorithm=algorithm,
    )
    return path.fits[-1]


def split_evaluate(
    problem: Problem,
    template: PenaltySpec,
    n_splits: int,
    test_size: int,
    folds: Optional[int] = None,
    config: Optional[SolverConfig] = None,
    algorithm: Algorithm = Algorithm.CD,
    n_lambda: Optional[int] = None,
    lambda_min_ratio: Optional[float] = None,
    seed: Optional[int] = None,
    center_response: Optional[bool] = None,
) -> SplitEvaluation:
    """Held-out MSPE over repeated random train/test splits.

    ``problem`` is on its original scale and ``template`` carries tau on the
    scale of the standardized full data; each training split rescales it by
    ``sqrt(n_train / n)``. lambda is chosen by CV inside every training split.

    Raises:
        TuningError: If the splits leave too few training rows for the folds
    """
    settings = get_settings()
    folds = folds if folds is not None else settings.CV_FOLDS
    seed = seed if seed is not None else settings.SEED
    if center_response is None:
        center_response = settings.CENTER_RESPONSE
    if n_splits < 1:
        raise TuningError(f"n_splits must be at least 1, got {n_splits}")
    if not 1 <= test_size <= problem.n - folds:
        raise TuningError(
            f"test_size must lie in [1, n - folds] = [1, {problem.n - folds}], got {test_size}"
        )

    records: List[SplitRecord] = []
    for split in range(n_splits):
        rng = np.random.default_rng([seed, split])
        test = np.zeros(problem.n, dtype=bool)
        test[rng.choice(problem.n, size=test_size, replace=False)] = True
        train = standardize(Problem(y=problem.y[~test], X=problem.X[~test]), center_response=center_response)
        scaled = template.scaled(math.sqrt(train.n / problem.n))
        cv = cross_validate(
            train,
            scaled,
            folds=folds,
            config=config,
            algorithm=algorithm,
            n_lambda=n_lambda,
            lambda_min_ratio=lambda_min_ratio,
            seed=seed + split,
            jobs=1,
            center_response=center_response,
        )
        fit = refit_best(train, scaled, cv, config, algorithm)
        beta = fit.beta / train.norms
        error = mspe(beta, problem.X[test], problem.y[test], intercept=train.y_offset)
        records.append(
            SplitRecord(
                split=split,
                best_lambda=cv.best_lambda,
                mspe=error,
                model_size=len(fit.active_set),
                selected=fit.active_set,
            )
        )
        logger.debug("split %d: mspe %.6g, |A|=%d", split, error, len(fit.active_set))

    errors = np.array([r.mspe for r in records])
    se = float(errors.std(ddof=1) / math.sqrt(len(errors))) if len(errors) > 1 else None
    result = SplitEvaluation(
        method=template.label(),
        records=records,
        mspe_mean=float(errors.mean()),
        mspe_se=se,
        size_mean=float(np.mean([r.model_size for r in records])),
    )
    logger.info(
        "%s over %d splits: MSPE %.4g, mean size %.2f",
        result.method,
        n_splits,
        result.mspe_mean,
        result.size_mean,
    )
    return result
