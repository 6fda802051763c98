"""Tests for standardization, coordinate descent, MCLLA and lambda paths."""
import numpy as np
import pytest

from tests.conftest import make_raw_problem
from twinreg.errors import InputError
from twinreg.models.solver_models import Algorithm, Problem, SolverConfig
from twinreg.services import penalty, solver
from twinreg.services.solver import CoordinateDescentSolver, MclaSolver


def test_standardize_unit_norms(raw_problem):
    problem = solver.standardize(raw_problem, center_response=True)
    assert problem.standardized
    assert np.allclose(np.linalg.norm(problem.X, axis=0), 1.0)
    assert problem.y_offset == pytest.approx(raw_problem.y.mean())
    assert problem.y.mean() == pytest.approx(0.0, abs=1e-12)


def test_destandardize_preserves_predictions(raw_problem):
    problem = solver.standardize(raw_problem)
    beta = np.linspace(-1.0, 1.0, problem.p)
    assert np.allclose(raw_problem.X @ solver.destandardize(problem, beta), problem.X @ beta)
    with pytest.raises(InputError):
        solver.destandardize(problem, beta[:-1])


def test_standardize_rejects_zero_column():
    X = np.ones((5, 3))
    X[:, 1] = 0.0
    with pytest.raises(InputError, match="column 1"):
        solver.standardize(Problem(y=np.arange(5.0), X=X))


def test_solver_requires_standardized_problem(raw_problem):
    with pytest.raises(InputError):
        solver.fit_cd(raw_problem, penalty.lasso(1.0))


@pytest.mark.parametrize(
    "spec",
    [
        penalty.lasso(0.5),
        penalty.mcp(0.5),
        penalty.scad(0.5),
        penalty.twin_a(0.5, 1.0),
        penalty.twin_a(2.0, 1.0),
        penalty.twin_b(0.5, 1.0),
        penalty.twin_b(1.5, 0.8, 0.3),
    ],
)
def test_cd_matches_orthogonal_thresholding(orthonormal_problem, cyclic_config, spec):
    expected = solver.fit_orthogonal(orthonormal_problem, spec)
    fit = solver.fit_cd(orthonormal_problem, spec, cyclic_config)
    assert fit.converged
    assert np.allclose(fit.beta, expected.beta, atol=1e-9)
    assert fit.active_set == expected.active_set


def test_fit_orthogonal_rejects_correlated_design(small_problem):
    with pytest.raises(InputError, match="orthonormal"):
        solver.fit_orthogonal(small_problem, penalty.lasso(1.0))


@pytest.mark.parametrize(
    "spec",
    [penalty.lasso(0.3), penalty.mcp(0.3), penalty.twin_a(0.3, 0.2), penalty.twin_b(0.3, 0.2)],
)
def test_objective_never_increases(small_problem, spec):
    cd = CoordinateDescentSolver(SolverConfig.from_settings(tol=1e-10), record_history=True)
    fit = cd.fit(small_problem, spec)
    history = np.array(cd.history.objectives)
    assert history.size == fit.sweeps_used
    assert np.all(np.diff(history) <= 1e-10 * np.abs(history[:-1]) + 1e-14)
    assert fit.objective <= solver.objective(small_problem, spec, np.zeros(small_problem.p))


@pytest.mark.parametrize("spec", [penalty.lasso(0.3), penalty.scad(0.3), penalty.twin_a(0.4, 0.3)])
def test_converged_fit_passes_kkt(small_problem, spec):
    fit = solver.fit_cd(small_problem, spec, SolverConfig.from_settings(tol=1e-10))
    assert fit.converged
    report = solver.kkt_check(small_problem, spec, fit.beta)
    assert report.passed
    assert fit.kkt_max_violation == pytest.approx(report.max_violation)


def test_lasso_recovers_signals(small_problem):
    fit = solver.fit_cd(small_problem, penalty.lasso(0.5 * solver.lambda_max(small_problem)))
    assert set(fit.active_set) <= set(range(small_problem.p))
    assert {0, 1, 2} <= set(fit.active_set)
    assert not fit.beta.flags.writeable


def test_same_seed_same_fit(small_problem):
    spec = penalty.twin_b(0.4, 0.3)
    config = SolverConfig.from_settings(coordinate_order="random_permutation", rng_seed=5)
    first = solver.fit_cd(small_problem, spec, config)
    second = solver.fit_cd(small_problem, spec, config)
    assert np.array_equal(first.beta, second.beta)


def test_active_set_cycling_matches_full_sweeps(small_problem):
    spec = penalty.lasso(0.2)
    full = solver.fit_cd(small_problem, spec, SolverConfig.from_settings(tol=1e-12, active_set_min_p=10_000))
    cycled = solver.fit_cd(small_problem, spec, SolverConfig.from_settings(tol=1e-12, active_set_min_p=5))
    assert np.allclose(full.beta, cycled.beta, atol=1e-8)


def test_warm_start_validation(small_problem):
    with pytest.raises(InputError, match="shape"):
        solver.fit_cd(small_problem, penalty.lasso(0.5), warm_start=np.zeros(3))
    bad = np.zeros(small_problem.p)
    bad[0] = np.nan
    with pytest.raises(InputError, match="non-finite"):
        solver.fit_cd(small_problem, penalty.lasso(0.5), warm_start=bad)


def test_mclla_rejects_comparators(small_problem):
    with pytest.raises(InputError, match="TWIN"):
        solver.fit_mclla(small_problem, penalty.mcp(0.5))


def test_mclla_fit(small_problem):
    spec = penalty.twin_a(0.4, 0.3)
    fit = solver.fit_mclla(small_problem, spec)
    assert fit.algorithm == Algorithm.MCLLA
    assert np.all(np.isfinite(fit.beta))
    assert fit.active_set == tuple(np.flatnonzero(fit.beta))
    assert {0, 1, 2} <= set(fit.active_set)

    empty = MclaSolver().fit(small_problem, spec.with_lambda(2.0 * solver.path_lambda_max(small_problem, spec)))
    assert empty.active_set == ()


def test_make_solver():
    assert isinstance(solver.make_solver(Algorithm.CD), CoordinateDescentSolver)
    assert isinstance(solver.make_solver("mclla"), MclaSolver)


def test_lambda_grid():
    grid = solver.lambda_grid(2.0, 5, 0.01)
    assert grid[0] == 2.0
    assert grid[-1] == pytest.approx(0.02)
    assert np.allclose(grid[1:] / grid[:-1], grid[1] / grid[0])
    assert np.array_equal(solver.lambda_grid(3.0, 1, 0.5), [3.0])
    with pytest.raises(InputError):
        solver.lambda_grid(1.0, 0, 0.1)
    with pytest.raises(InputError):
        solver.lambda_grid(1.0, 5, 1.0)


def test_path_lambda_max_raises_start_for_large_lambda(small_problem):
    z_max = solver.lambda_max(small_problem)
    assert solver.path_lambda_max(small_problem, penalty.lasso(1.0)) == z_max
    # tau far below lambda_max lets the TWIN operator zero less than lambda
    start = solver.path_lambda_max(small_problem, penalty.twin_a(1.0, 0.05 * z_max))
    assert start > z_max
    assert penalty.zero_threshold(penalty.twin_a(start, 0.05 * z_max)) >= z_max * (1 - 1e-9)


@pytest.mark.parametrize(
    "template",
    [penalty.lasso(1.0), penalty.twin_a(1.0, 0.3), penalty.twin_b(1.0, 0.05)],
)
def test_path_starts_empty(small_problem, template):
    path = solver.fit_path(small_problem, template, n_lambda=8, lambda_min_ratio=0.05)
    assert len(path.fits) == 8
    assert path.fits[0].active_set == ()
    assert np.all(np.diff(path.lambdas) < 0)
    assert path.coefficients().shape == (8, small_problem.p)
    assert len(path.fits[-1].active_set) >= 3


def test_path_with_explicit_lambdas(small_problem):
    grid = np.array([3.0, 1.0, 0.5])
    path = solver.fit_path(small_problem, penalty.twin_a(1.0, 0.3), lambdas=grid)
    assert np.array_equal(path.lambdas, grid)
    assert [fit.lam for fit in path.fits] == [3.0, 1.0, 0.5]
    with pytest.raises(InputError, match="decreasing"):
        solver.fit_path(small_problem, penalty.lasso(1.0), lambdas=[0.5, 1.0])


def test_path_rejects_orthogonal_response():
    X = np.eye(4)[:, :2]
    y = np.array([0.0, 0.0, 1.0, -1.0])
    problem = solver.standardize(Problem(y=y, X=X))
    with pytest.raises(InputError):
        solver.fit_path(problem, penalty.lasso(1.0))


def test_mclla_path(small_problem):
    path = solver.fit_path(
        small_problem, penalty.twin_b(1.0, 0.3), n_lambda=5, lambda_min_ratio=0.1, algorithm=Algorithm.MCLLA
    )
    assert path.algorithm == Algorithm.MCLLA
    assert path.fits[0].active_set == ()


def test_default_lambda_min_ratio():
    wide, _ = make_raw_problem(n=10, p=20)
    tall, _ = make_raw_problem(n=40, p=20)
    assert solver.default_lambda_min_ratio(wide) == 0.05
    assert solver.default_lambda_min_ratio(tall) == 0.001


def textbook_lasso_path(X, y, lambdas, tol=1e-13, max_sweeps=100_000):
    """Plain cyclic soft-threshold coordinate descent on unit-norm columns."""
    beta = np.zeros(X.shape[1])
    r = y.copy()
    out = []
    for lam in lambdas:
        for _ in range(max_sweeps):
            change = 0.0
            for j in range(X.shape[1]):
                z = X[:, j] @ r + beta[j]
                new = np.sign(z) * max(abs(z) - lam, 0.0)
                if new != beta[j]:
                    r -= X[:, j] * (new - beta[j])
                    change = max(change, abs(new - beta[j]))
                    beta[j] = new
            if change <= tol:
                break
        out.append(beta.copy())
    return np.array(out)


def test_lasso_path_matches_textbook_cd(small_problem, cyclic_config):
    path = solver.fit_path(small_problem, penalty.lasso(1.0), n_lambda=15, lambda_min_ratio=0.01, config=cyclic_config)
    expected = textbook_lasso_path(np.asarray(small_problem.X), np.asarray(small_problem.y), path.lambdas)
    assert np.max(np.abs(path.coefficients() - expected)) <= 1e-6


@pytest.mark.parametrize("template", [penalty.lasso(1.0), penalty.twin_a(1.0, 0.3), penalty.twin_b(1.0, 0.3)])
def test_cyclic_path_ignores_seed(small_problem, template):
    objectives = []
    for seed in (1, 99):
        config = SolverConfig.from_settings(coordinate_order="cyclic", rng_seed=seed, tol=1e-10)
        path = solver.fit_path(small_problem, template, n_lambda=10, lambda_min_ratio=0.05, config=config)
        objectives.append(np.array([fit.objective for fit in path.fits]))
    assert np.allclose(objectives[0], objectives[1], rtol=1e-6, atol=0.0)


def test_kkt_flags_perturbed_coefficient(small_problem):
    spec = penalty.lasso(0.3 * solver.lambda_max(small_problem))
    fit = solver.fit_cd(small_problem, spec, SolverConfig.from_settings(tol=1e-12, max_sweeps=10_000))
    assert solver.kkt_check(small_problem, spec, fit.beta, tol=1e-6).passed

    beta = np.array(fit.beta)
    j = int(np.argmax(beta))
    assert beta[j] > 0.1
    beta[j] += 0.1
    report = solver.kkt_check(small_problem, spec, beta, tol=1e-4)
    assert not report.passed
    assert report.max_violation == pytest.approx(0.1, abs=1e-6)
