"""Tests for universal rules, orthogonal calibration and cross-validation."""
import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import norm, spearmanr

from tests.conftest import make_raw_problem
from twinreg.errors import InputError, TuningError
from twinreg.models.solver_models import Problem
from twinreg.models.tuning_models import CalibrationTarget, TwinFamily, UniversalInputs
from twinreg.services import penalty, simulate, solver, tuning


# upper-tail probability -> standard normal quantile, 12 significant digits
NORMAL_QUANTILES = [
    (0.1, 1.28155156554),
    (0.025, 1.95996398454),
    (0.005, 2.57582930355),
    (0.001, 3.09023230617),
    (1e-6, 4.75342430882),
]


@pytest.mark.parametrize("q, expected", NORMAL_QUANTILES)
def test_normal_quantile_reference(q, expected):
    assert tuning.normal_quantile_upper(q) == pytest.approx(expected, rel=1e-10)


def test_normal_quantile_upper():
    assert tuning.normal_quantile_upper(0.025) == pytest.approx(1.959963984540054)
    with pytest.raises(TuningError):
        tuning.normal_quantile_upper(0.0)


def test_universal_twin_a():
    pair = tuning.universal_twin_a(UniversalInputs(n=4000, p=1000, sigma=1.0))
    lam = 1.5 * math.sqrt(2.0 * math.log(1000))
    assert pair.lam == pytest.approx(lam)
    assert pair.lam == pytest.approx(5.575383, abs=1e-6)
    assert pair.tau == pytest.approx(lam / 0.49 ** 2)
    assert pair.family == TwinFamily.TWIN_A
    assert pair.as_tuple() == (pair.lam, pair.tau)


def test_universal_rules_scale_with_sigma():
    base = tuning.universal_twin_a(UniversalInputs(n=4000, p=1000, sigma=1.0))
    scaled = tuning.universal_twin_a(UniversalInputs(n=4000, p=1000, sigma=3.0))
    assert scaled.lam == pytest.approx(3.0 * base.lam)
    assert scaled.tau == pytest.approx(3.0 * base.tau)


def test_universal_twin_a_needs_tall_design():
    with pytest.raises(TuningError, match="sufficiently larger"):
        tuning.universal_twin_a(UniversalInputs(n=1000, p=1000, sigma=1.0))
    with pytest.raises(TuningError, match="p >= 2"):
        tuning.universal_twin_a(UniversalInputs(n=1000, p=1, sigma=1.0))


def test_universal_twin_b_low_dim():
    pair = tuning.universal_twin_b(UniversalInputs(n=4000, p=1000, sigma=2.0))
    lam = 2.0 * math.sqrt(2.0 * math.log(1000))
    assert pair.lam == pytest.approx(lam)
    assert pair.tau == pytest.approx(lam / 0.49 ** 2)
    assert pair.rule == "universal"


def test_universal_twin_b_high_dim():
    inputs = UniversalInputs(n=500, p=1000, sigma=1.0, epsilon_prior=0.1)
    pair = tuning.universal_twin_b(inputs, high_dim=True)
    gap = 0.99 - math.sqrt((0.1 / 0.5 + 1.0) / 2.0)
    assert pair.tau == pytest.approx(pair.lam / gap ** 2)
    assert pair.rule == "universal-high-dim"
    with pytest.raises(TuningError, match="epsilon_prior"):
        tuning.universal_twin_b(UniversalInputs(n=500, p=1000, sigma=1.0), high_dim=True)
    with pytest.raises(TuningError):
        tuning.universal_twin_b(UniversalInputs(n=100, p=1000, sigma=1.0, epsilon_prior=0.9), high_dim=True)


@pytest.mark.parametrize("family", [TwinFamily.TWIN_A, TwinFamily.TWIN_B])
def test_calibration_hits_target(family):
    target = CalibrationTarget(alpha=0.2, p=256, sigma=1.0)
    pair = tuning.calibrate_orthogonal(target, family)
    expected = norm.isf(0.2 / 512)
    assert pair.target == pytest.approx(expected)
    spec = tuning._family_spec(family, pair.lam, pair.tau, None)
    assert penalty.min_gap(spec) == pytest.approx(expected, rel=1e-8)
    assert pair.rule == "calibrated"
    assert pair.selections is None


def test_calibration_scores_candidates_on_data():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.standard_normal((128, 64)))
    beta = np.zeros(64)
    beta[:8] = 10.0
    data = Problem(y=q @ beta + rng.standard_normal(128), X=q, standardized=True)
    target = CalibrationTarget(alpha=0.1, p=64, sigma=1.0)
    pair = tuning.calibrate_orthogonal(target, TwinFamily.TWIN_A, data=data)
    assert pair.selections >= 8
    chosen = tuning._family_spec(TwinFamily.TWIN_A, pair.lam, pair.tau, None)
    assert pair.selections == np.count_nonzero(penalty.thresholds(chosen, q.T @ data.y))


def test_calibration_rejects_zero_alpha():
    with pytest.raises(TuningError, match="alpha"):
        tuning.calibrate_orthogonal(CalibrationTarget(alpha=0.0, p=10, sigma=1.0), TwinFamily.TWIN_A)
    with pytest.raises(ValidationError):
        CalibrationTarget(alpha=1.5, p=10, sigma=1.0)


def test_estimate_sigma():
    raw, _ = make_raw_problem(n=300, p=20, k=3, sigma=1.0, seed=4)
    problem = solver.standardize(raw, center_response=True)
    assert tuning.estimate_sigma(problem) == pytest.approx(1.0, rel=0.25)
    flat = Problem(y=np.ones(5), X=np.eye(5)[:, :2], standardized=True)
    with pytest.raises(TuningError):
        tuning.estimate_sigma(flat)


def test_assign_folds():
    labels = tuning.assign_folds(23, 5, seed=1)
    counts = np.bincount(labels)
    assert counts.max() - counts.min() <= 1
    assert np.array_equal(labels, tuning.assign_folds(23, 5, seed=1))
    assert not np.array_equal(labels, tuning.assign_folds(23, 5, seed=2))
    with pytest.raises(TuningError):
        tuning.assign_folds(10, 1, seed=0)
    with pytest.raises(TuningError):
        tuning.assign_folds(3, 5, seed=0)


def test_tuning_error_is_input_error():
    assert issubclass(TuningError, InputError)


def test_cross_validate(small_problem):
    template = penalty.twin_a(1.0, 0.3)
    cv = tuning.cross_validate(small_problem, template, folds=5, n_lambda=10, lambda_min_ratio=0.05, seed=3)
    assert cv.lambdas.shape == (10,)
    assert cv.cv_curve.shape == cv.cv_se.shape == (10,)
    assert cv.best_index == int(np.argmin(cv.cv_curve))
    assert cv.best_lambda == cv.lambdas[cv.best_index]
    # the empty model at the top of the grid predicts worse than the best fit
    assert cv.cv_curve[cv.best_index] < cv.cv_curve[0]

    again = tuning.cross_validate(
        small_problem, template, folds=5, n_lambda=10, lambda_min_ratio=0.05, seed=3, jobs=3
    )
    assert np.array_equal(cv.cv_curve, again.cv_curve)

    fit = tuning.refit_best(small_problem, template, cv)
    assert fit.lam == pytest.approx(cv.best_lambda)
    assert {0, 1, 2} <= set(fit.active_set)


def test_split_evaluate(raw_problem):
    evaluation = tuning.split_evaluate(
        raw_problem,
        penalty.lasso(1.0),
        n_splits=3,
        test_size=10,
        folds=4,
        n_lambda=8,
        lambda_min_ratio=0.05,
        seed=1,
    )
    assert [r.split for r in evaluation.records] == [0, 1, 2]
    assert all(math.isfinite(r.mspe) for r in evaluation.records)
    assert evaluation.mspe_mean == pytest.approx(np.mean([r.mspe for r in evaluation.records]))
    assert evaluation.mspe_se is not None
    counts = evaluation.selection_counts()
    assert all(counts.get(j, 0) == 3 for j in range(3))

    with pytest.raises(TuningError, match="test_size"):
        tuning.split_evaluate(raw_problem, penalty.lasso(1.0), n_splits=1, test_size=58, folds=4)


def test_universal_lambda_grows_with_p():
    ps = [10, 50, 200, 1000, 5000]
    pairs = [tuning.universal_twin_b(UniversalInputs(n=40_000, p=p, sigma=1.0)) for p in ps]
    assert spearmanr(ps, [pair.lam for pair in pairs]).correlation == pytest.approx(1.0)
    assert all(a.tau <= b.tau for a, b in zip(pairs, pairs[1:]))


def test_cross_validate_noiseless_single_signal():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((40, 5))
    problem = solver.standardize(Problem(y=2.0 * X[:, 0], X=X))
    cv = tuning.cross_validate(
        problem, penalty.lasso(1.0), folds=2, n_lambda=20, lambda_min_ratio=1e-4, seed=0, center_response=False
    )
    assert cv.best_index >= 18
    assert cv.cv_curve[cv.best_index] <= 1e-4 * np.mean(problem.y ** 2)
    assert cv.cv_curve[0] > 0.5 * np.mean(problem.y ** 2)


def test_leave_one_out_curve_shape():
    raw, _ = make_raw_problem(n=20, p=3, k=1, seed=9)
    problem = solver.standardize(raw, center_response=True)
    cv = tuning.cross_validate(problem, penalty.twin_b(1.0, 0.5), folds=20, n_lambda=6, lambda_min_ratio=0.05, jobs=1)
    assert cv.folds == 20
    assert cv.lambdas.shape == cv.cv_curve.shape == cv.cv_se.shape == (6,)
    assert np.all(np.isfinite(cv.cv_curve))


def test_constant_held_out_fold_warns(caplog):
    labels = tuning.assign_folds(12, 3, seed=0)
    rng = np.random.default_rng(1)
    y = rng.standard_normal(12)
    y[labels == 0] = 5.0
    problem = solver.standardize(Problem(y=y, X=rng.standard_normal((12, 4))), center_response=True)
    caplog.set_level(logging.WARNING, logger="twinreg.services.tuning")
    tuning.cross_validate(
        problem, penalty.lasso(1.0), folds=3, n_lambda=4, lambda_min_ratio=0.1, seed=0, jobs=1, center_response=True
    )
    assert "fold 0: held-out response has zero variance" in caplog.text
    assert "training response" not in caplog.text


@pytest.mark.slow
def test_model_three_cv_picks_about_the_right_size():
    scenario = simulate.model_preset(3, test_size=10)
    sizes = []
    for rep in range(20):
        dataset = simulate.generate_dataset(scenario, rep)
        problem = solver.standardize(dataset.problem, center_response=True)
        template = simulate.resolve_tau(penalty.twin_a(1.0, 0.1), problem.n)
        cv = tuning.cross_validate(problem, template, folds=10, n_lambda=40, lambda_min_ratio=0.05, seed=rep, jobs=4)
        sizes.append(len(tuning.refit_best(problem, template, cv).active_set))
    k = scenario.k
    assert sum(k / 2 <= size <= 2 * k for size in sizes) >= 16
