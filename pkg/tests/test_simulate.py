"""Tests for scenario sampling, dataset export and benchmark replications."""
import numpy as np
import pytest
from pydantic import ValidationError
from scipy.linalg import toeplitz

from twinreg.errors import InputError
from twinreg.models.simulation_models import (
    ActiveLayout,
    CoefficientScheme,
    DesignKind,
    MethodSpec,
    PathSettings,
    SimScenario,
)
from twinreg.models.solver_models import Algorithm
from twinreg.models.tuning_models import TwinFamily
from twinreg.services import metrics, penalty, simulate


@pytest.fixture
def tiny_scenario():
    return SimScenario(n=40, p=30, k=3, rho=0.3, seed=5, n_reps=2, test_size=50)


def test_streams_are_reproducible(tiny_scenario):
    first = [g.standard_normal(3) for g in simulate.streams(tiny_scenario, rep=1)]
    second = [g.standard_normal(3) for g in simulate.streams(tiny_scenario, rep=1)]
    assert all(np.array_equal(a, b) for a, b in zip(first, second))
    other = simulate.streams(tiny_scenario, rep=2)[0].standard_normal(3)
    assert not np.array_equal(first[0], other)


def test_ar1_covariance():
    scenario = SimScenario(n=20_000, p=6, k=1, rho=-0.75, seed=1)
    X = simulate.gen_design(scenario)
    assert X.shape == (20_000, 6)
    assert X.flags.f_contiguous
    sample = np.cov(X, rowvar=False)
    expected = toeplitz((-0.75) ** np.arange(6))
    assert np.max(np.abs(sample - expected)) <= 0.04


def test_iid_and_orthonormal_designs():
    iid = SimScenario(n=400, p=50, k=2, design_kind=DesignKind.IID_GAUSSIAN, seed=2)
    X = simulate.gen_design(iid)
    assert np.mean(np.sum(X * X, axis=0)) == pytest.approx(1.0, rel=0.05)
    ortho = SimScenario(n=60, p=20, k=2, design_kind=DesignKind.ORTHONORMAL, seed=2)
    Q = simulate.gen_design(ortho)
    assert np.allclose(Q.T @ Q, np.eye(20), atol=1e-12)


def test_orthonormal_needs_tall_design():
    with pytest.raises(ValidationError):
        SimScenario(n=10, p=20, k=2, design_kind=DesignKind.ORTHONORMAL)
    with pytest.raises(ValidationError):
        SimScenario(n=10, p=5, k=6)


def test_coefficient_schemes():
    base = dict(n=50, p=40, k=6, active_layout=ActiveLayout.LEADING, seed=3)
    geometric, active = simulate.gen_coefficients(
        SimScenario(scheme=CoefficientScheme.GEOMETRIC, decay_c=0.8, **base)
    )
    assert active == tuple(range(6))
    assert np.allclose(geometric[:6], (-0.8) ** np.arange(6))
    ladder, _ = simulate.gen_coefficients(SimScenario(scheme=CoefficientScheme.LADDER, **base))
    j = np.arange(1, 7)
    assert np.allclose(ladder[:6], (-1.0) ** j * (j + 2) / 6.0)
    uniform, active = simulate.gen_coefficients(SimScenario(n=50, p=40, k=6, seed=3))
    values = np.abs(uniform[list(active)])
    assert len(active) == 6
    assert np.all((values >= 0.5) & (values <= 2.0))
    constant, active = simulate.gen_coefficients(
        SimScenario(scheme=CoefficientScheme.CONSTANT, magnitude=2.5, **base)
    )
    assert np.allclose(np.abs(constant[list(active)]), 2.5)


def test_signal_variance_matches_dense_product(tiny_scenario):
    beta, _ = simulate.gen_coefficients(tiny_scenario)
    sigma = toeplitz(tiny_scenario.rho ** np.arange(tiny_scenario.p))
    assert simulate.signal_variance(tiny_scenario, beta) == pytest.approx(beta @ sigma @ beta)


def test_gen_response_noise_level(tiny_scenario):
    X = simulate.gen_design(tiny_scenario)
    beta, _ = simulate.gen_coefficients(tiny_scenario)
    _, sigma = simulate.gen_response(X, beta, tiny_scenario)
    assert sigma == pytest.approx(np.sqrt(simulate.signal_variance(tiny_scenario, beta)) / tiny_scenario.snr)
    with pytest.raises(InputError):
        simulate.gen_response(X, np.zeros(tiny_scenario.p), tiny_scenario)
    with pytest.raises(InputError):
        simulate.gen_response(X[:, :5], beta, tiny_scenario)


def test_realized_snr():
    scenario = SimScenario(n=4000, p=50, k=10, rho=0.5, snr=4.0, seed=8)
    dataset = simulate.generate_dataset(scenario)
    assert dataset.snr_realized == pytest.approx(4.0, rel=0.1)


def test_generate_dataset_is_deterministic(tiny_scenario):
    first = simulate.generate_dataset(tiny_scenario, rep=1)
    second = simulate.generate_dataset(tiny_scenario, rep=1)
    assert np.array_equal(first.problem.X, second.problem.X)
    assert np.array_equal(first.problem.y, second.problem.y)
    assert first.seed == tiny_scenario.seed + 1
    X_test, y_test = simulate.generate_test_set(tiny_scenario, first, rep=1)
    assert X_test.shape == (50, 30) and y_test.shape == (50,)


def test_model_preset():
    scenario = simulate.model_preset(3)
    assert (scenario.n, scenario.p, scenario.k) == (250, 1000, 25)
    assert scenario.rho == -0.75 and scenario.snr == 10.0
    assert simulate.model_preset(2).scheme == CoefficientScheme.GEOMETRIC
    assert simulate.model_preset(1, n=100, p=200).p == 200
    with pytest.raises(InputError):
        simulate.model_preset(5)


def test_export_and_load(tmp_path, tiny_scenario):
    dataset = simulate.generate_dataset(tiny_scenario)
    path = simulate.export_dataset(dataset, tmp_path / "sim.csv", tiny_scenario)
    loaded = simulate.load_dataset(path)
    assert np.array_equal(loaded.problem.X, dataset.problem.X)
    assert np.array_equal(loaded.beta_true, dataset.beta_true)
    assert loaded.active_true == dataset.active_true
    assert simulate.load_scenario(tmp_path / "sim.csv.json") == tiny_scenario


def test_load_scenario_key_values(tmp_path):
    path = tmp_path / "scenario.env"
    path.write_text("n=80\np=100\nk=5\nrho=-0.5\nscheme=geometric\n# comment\nseed=9\n")
    scenario = simulate.load_scenario(path, seed=11, snr=None)
    assert scenario.p == 100 and scenario.rho == -0.5
    assert scenario.scheme == CoefficientScheme.GEOMETRIC
    assert scenario.seed == 11
    path.write_text("n=80\np=100\nk=5\nwidth=3\n")
    with pytest.raises(ValidationError):
        simulate.load_scenario(path)


def test_resolve_tau(monkeypatch):
    spec = penalty.twin_a(1.0, 0.1)
    assert simulate.resolve_tau(spec, 100).tau == pytest.approx(1.0)
    assert simulate.resolve_tau(penalty.lasso(1.0), 100) == penalty.lasso(1.0)
    monkeypatch.setenv("TWINREG_TAU_SCALE", "standardized")
    from twinreg.config import get_settings

    get_settings.cache_clear()
    assert simulate.resolve_tau(spec, 100).tau == pytest.approx(0.1)


def test_tau_sweep_methods():
    methods = simulate.tau_sweep_methods([0.1, 0.5], TwinFamily.TWIN_B, Algorithm.MCLLA, h=0.3)
    assert [m.label for m in methods] == ["twin-b[tau=0.1]/mclla", "twin-b[tau=0.5]/mclla"]
    assert all(m.spec.h == 0.3 for m in methods)


def test_run_replications(tiny_scenario):
    methods = [
        MethodSpec(spec=penalty.twin_a(1.0, 0.1)),
        MethodSpec(spec=penalty.lasso(1.0)),
    ]
    settings = PathSettings(n_lambda=5, lambda_min_ratio=0.05)
    report = simulate.run_replications(tiny_scenario, methods, path_settings=settings)
    assert report.n_reps == 2
    assert report.methods == ["lasso", "twin-a[tau=0.1]"]
    assert len(report.rows) == 10
    first = [row for row in report.rows if row.grid_index == 0]
    assert all(row.size_mean == 0.0 and row.fdr_mean == 0.0 and row.tdr_mean == 0.0 for row in first)

    threaded = simulate.run_replications(tiny_scenario, methods, path_settings=settings, jobs=2)
    assert metrics.report_frame(threaded).equals(metrics.report_frame(report))


def test_run_replications_validation(tiny_scenario):
    with pytest.raises(InputError):
        simulate.run_replications(tiny_scenario, [])
    duplicate = [MethodSpec(spec=penalty.lasso(1.0)), MethodSpec(spec=penalty.lasso(2.0))]
    with pytest.raises(InputError, match="unique"):
        simulate.run_replications(tiny_scenario, duplicate)
    with pytest.raises(InputError):
        simulate.run_replications(tiny_scenario, duplicate[:1], n_reps=0)


def test_geometric_underflow_is_rejected():
    with pytest.raises(ValidationError, match="underflow"):
        SimScenario(n=50, p=400, k=300, scheme=CoefficientScheme.GEOMETRIC, decay_c=0.01)
    SimScenario(n=50, p=400, k=30, scheme=CoefficientScheme.GEOMETRIC, decay_c=0.5)


@pytest.mark.slow
def test_high_snr_path_recovers_the_signals():
    scenario = SimScenario(n=250, p=1000, k=25, rho=0.0, snr=10.0, seed=11, test_size=100)
    methods = [MethodSpec(spec=penalty.twin_a(1.0, 0.1))]
    settings = PathSettings(n_lambda=50, lambda_min_ratio=0.01)
    best = [
        np.nanmax(simulate.replicate_once(scenario, methods, rep, path_settings=settings)[0].tdr)
        for rep in range(20)
    ]
    assert sum(value >= 0.9 for value in best) >= 18
