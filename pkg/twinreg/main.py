"""
Command-line front end for TWIN penalized regression.

Subcommands fit models and paths on user CSV data, cross-validate, evaluate
random train/test splits, compute tuning parameters, simulate datasets and
run benchmark studies. Every run that writes a file also writes
``<output>.manifest.json`` with its resolved configuration, which can be
passed back through ``--config`` to repeat the run.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numba
import numpy as np
import pandas as pd
import pydantic
import scipy
from pydantic import ValidationError

from twinreg import __version__
from twinreg.config import get_settings
from twinreg.errors import InputError, SolverDivergenceError, TwinRegError
from twinreg.models.cli_models import CliConfig
from twinreg.models.penalty_models import PenaltyKind, PenaltySpec, parse_penalty
from twinreg.models.simulation_models import MethodSpec, PathSettings, SimScenario
from twinreg.models.solver_models import Algorithm, Problem, SolverConfig
from twinreg.models.tuning_models import CalibrationTarget, TwinFamily, UniversalInputs
from twinreg.services import metrics, simulate, solver, tuning
from twinreg.utils import io

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3

DEFAULT_METHODS = ("twin-a", "twin-b", "lasso", "mcp", "scad")


def configure_logging(verbose: bool) -> None:
    settings = get_settings()
    level = logging.DEBUG if verbose or settings.DEBUG else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def resolve_config(args: argparse.Namespace) -> CliConfig:
    """Merge the optional ``--config`` file with the flags; flags win."""
    values: Dict[str, Any] = {}
    if args.config:
        loaded = io.read_config_file(args.config)
        if "config" in loaded and isinstance(loaded["config"], dict):
            if loaded.get("command") not in (None, args.command):
                raise InputError(
                    f"manifest {args.config} was written by '{loaded.get('command')}', not '{args.command}'"
                )
            loaded = loaded["config"]
        values.update(loaded)
        if "lambda" in values:
            values["lam"] = values.pop("lambda")
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "verbose")}
    values.update(flags)
    values["command"] = args.command
    return CliConfig(**values)


def solver_config(cfg: CliConfig) -> SolverConfig:
    return SolverConfig.from_settings(
        max_sweeps=cfg.max_sweeps,
        tol=cfg.tol,
        coordinate_order=cfg.coordinate_order,
        rng_seed=cfg.seed,
        lla_outer_iters=cfg.lla_outer_iters,
        kkt_tol=cfg.kkt_tol,
    )


def _center(cfg: CliConfig) -> bool:
    return get_settings().CENTER_RESPONSE if cfg.center_response is None else cfg.center_response


def penalty_template(cfg: CliConfig, n: int, lam: float = 1.0) -> PenaltySpec:
    """Penalty from the config with tau moved onto the unit-norm column scale."""
    settings = get_settings()
    kind = PenaltyKind(cfg.penalty)
    data: Dict[str, Any] = {"kind": kind.value, "lambda": cfg.lam if cfg.lam is not None else lam}
    if kind in (PenaltyKind.TWIN_A, PenaltyKind.TWIN_B):
        tau = cfg.tau if cfg.tau is not None else settings.DEFAULT_TAU
        scale = cfg.tau_scale or settings.TAU_SCALE
        data["tau"] = tau * np.sqrt(n) if scale == "per_sample" else tau
        if kind == PenaltyKind.TWIN_B:
            data["h"] = cfg.h if cfg.h is not None else settings.DEFAULT_H
    elif cfg.shape is not None:
        data["shape"] = cfg.shape
    return parse_penalty(data)


def load_problem(cfg: CliConfig):
    if not cfg.input:
        raise InputError("an input CSV is required (--input)")
    raw, names = io.read_problem_csv(cfg.input)
    return raw, solver.standardize(raw, center_response=_center(cfg)), names


def require_output(cfg: CliConfig) -> Path:
    if not cfg.output:
        raise InputError("an output path is required (--output)")
    return Path(cfg.output)


def versions() -> Dict[str, str]:
    return {
        "twinreg": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
        "python": sys.version.split()[0],
    }


def write_manifest(cfg: CliConfig, output: Path, result: Optional[Dict[str, Any]] = None) -> Path:
    manifest = {
        "command": cfg.command,
        "config": cfg.model_dump(mode="json", by_alias=True, exclude_none=True),
        "versions": versions(),
    }
    if result is not None:
        manifest["result"] = result
    return io.write_json(manifest, io.manifest_path(output))


def _coefficient_frame(problem: Problem, beta: np.ndarray, names: Sequence[str], centered: bool) -> pd.DataFrame:
    """Original-scale coefficients; a centered fit leads with its intercept."""
    frame = pd.DataFrame({"variable": list(names), "coefficient": solver.destandardize(problem, beta)})
    if centered:
        intercept = pd.DataFrame({"variable": ["(intercept)"], "coefficient": [problem.y_offset]})
        frame = pd.concat([intercept, frame], ignore_index=True)
    return frame


def cmd_fit(cfg: CliConfig) -> int:
    """Fit one model and write its coefficients on the original scale."""
    output = require_output(cfg)
    if cfg.lam is None:
        raise InputError("fit needs a penalty level (--lambda)")
    _, problem, names = load_problem(cfg)
    spec = penalty_template(cfg, problem.n)
    config = solver_config(cfg)
    fit = solver.make_solver(cfg.algorithm, config).fit(problem, spec)
    io.write_frame(_coefficient_frame(problem, fit.beta, names, _center(cfg)), output)
    result = {
        "objective": fit.objective,
        "kkt_max_violation": fit.kkt_max_violation,
        "converged": fit.converged,
        "sweeps_used": fit.sweeps_used,
        "active_set": [names[j] for j in fit.active_set],
    }
    write_manifest(cfg, output, result)
    print(f"objective={fit.objective!r}")
    print(f"kkt_max_violation={fit.kkt_max_violation!r}")
    print(f"converged={str(fit.converged).lower()}")
    print(f"active_set={','.join(result['active_set'])}")
    return EXIT_OK


def cmd_path(cfg: CliConfig) -> int:
    """Write a long-format coefficient path (lambda, variable, coefficient)."""
    output = require_output(cfg)
    _, problem, names = load_problem(cfg)
    template = penalty_template(cfg, problem.n)
    path = solver.fit_path(
        problem,
        template,
        n_lambda=cfg.n_lambda,
        lambda_min_ratio=cfg.lambda_min_ratio,
        config=solver_config(cfg),
        algorithm=cfg.algorithm,
    )
    coefs = np.vstack([solver.destandardize(problem, fit.beta) for fit in path.fits])
    frame = pd.DataFrame(
        {
            "lambda": np.repeat(path.lambdas, problem.p),
            "variable": np.tile(np.asarray(names, dtype=object), len(path.fits)),
            "coefficient": coefs.ravel(),
        }
    )
    io.write_frame(frame, output)
    write_manifest(cfg, output, {"n_lambda": len(path.fits), "lambda_max": float(path.lambdas[0])})
    return EXIT_OK


def cmd_cv(cfg: CliConfig) -> int:
    """Cross-validate lambda, write the curve and the refit coefficients."""
    output = require_output(cfg)
    _, problem, names = load_problem(cfg)
    template = penalty_template(cfg, problem.n)
    config = solver_config(cfg)
    cv = tuning.cross_validate(
        problem,
        template,
        folds=cfg.folds,
        config=config,
        algorithm=cfg.algorithm,
        n_lambda=cfg.n_lambda,
        lambda_min_ratio=cfg.lambda_min_ratio,
        seed=cfg.seed,
        jobs=cfg.jobs,
        center_response=_center(cfg),
    )
    io.write_frame(pd.DataFrame({"lambda": cv.lambdas, "cv_error": cv.cv_curve, "cv_se": cv.cv_se}), output)
    fit = tuning.refit_best(problem, template, cv, config, cfg.algorithm)
    coef_path = Path(cfg.coefficients) if cfg.coefficients else output.with_name(f"{output.stem}_coefficients.csv")
    io.write_frame(_coefficient_frame(problem, fit.beta, names, _center(cfg)), coef_path)
    write_manifest(
        cfg,
        output,
        {"best_lambda": cv.best_lambda, "best_index": cv.best_index, "coefficients": str(coef_path)},
    )
    print(f"best_lambda={cv.best_lambda!r}")
    print(f"best_index={cv.best_index}")
    return EXIT_OK


def cmd_split(cfg: CliConfig) -> int:
    """Repeated train/test split MSPE with CV-selected lambda."""
    output = require_output(cfg)
    raw, _, _ = load_problem(cfg)
    template = penalty_template(cfg, raw.n)
    evaluation = tuning.split_evaluate(
        raw,
        template,
        n_splits=cfg.splits or 10,
        test_size=cfg.test_size or max(1, raw.n // 10),
        folds=cfg.folds,
        config=solver_config(cfg),
        algorithm=cfg.algorithm,
        n_lambda=cfg.n_lambda,
        lambda_min_ratio=cfg.lambda_min_ratio,
        seed=cfg.seed,
        center_response=_center(cfg),
    )
    frame = pd.DataFrame(
        [r.model_dump(include={"split", "best_lambda", "mspe", "model_size"}) for r in evaluation.records],
        columns=["split", "best_lambda", "mspe", "model_size"],
    )
    io.write_frame(frame, output)
    write_manifest(
        cfg,
        output,
        {"mspe_mean": evaluation.mspe_mean, "mspe_se": evaluation.mspe_se, "size_mean": evaluation.size_mean},
    )
    print(f"mspe_mean={evaluation.mspe_mean!r}")
    print(f"mspe_se={evaluation.mspe_se!r}")
    print(f"size_mean={evaluation.size_mean!r}")
    return EXIT_OK


def _scenario(cfg: CliConfig) -> SimScenario:
    overrides = {
        "seed": cfg.seed,
        "n_reps": cfg.reps,
        "test_size": cfg.test_size,
        "rho": cfg.rho,
        "snr": cfg.snr,
        "n": cfg.n,
        "p": cfg.p,
    }
    if cfg.scenario:
        return simulate.load_scenario(cfg.scenario, **overrides)
    if cfg.model is not None:
        values = {k: v for k, v in overrides.items() if v is not None}
        return simulate.model_preset(cfg.model, **values)
    raise InputError("a scenario file (--scenario) or a preset model (--model) is required")


def bench_methods(cfg: CliConfig) -> List[MethodSpec]:
    """Methods named like ``twin-a`` or ``twin-b/mclla``, or a tau sweep."""
    settings = get_settings()
    if cfg.tau_sweep:
        return simulate.tau_sweep_methods(cfg.tau_sweep, cfg.family, cfg.algorithm, cfg.h)
    methods = []
    for name in cfg.methods or DEFAULT_METHODS:
        kind, _, algo = name.partition("/")
        try:
            kind = PenaltyKind(kind)
            algorithm = Algorithm(algo) if algo else cfg.algorithm
        except ValueError as e:
            raise InputError(f"unknown method {name!r}") from e
        if kind in (PenaltyKind.TWIN_A, PenaltyKind.TWIN_B):
            data = {
                "kind": kind.value,
                "lambda": 1.0,
                "tau": cfg.tau if cfg.tau is not None else settings.DEFAULT_TAU,
            }
            if kind == PenaltyKind.TWIN_B and cfg.h is not None:
                data["h"] = cfg.h
        else:
            data = {"kind": kind.value, "lambda": 1.0}
            if kind in (PenaltyKind.MCP, PenaltyKind.SCAD) and cfg.shape is not None:
                data["shape"] = cfg.shape
        methods.append(MethodSpec(spec=parse_penalty(data), algorithm=algorithm))
    return methods


def cmd_bench(cfg: CliConfig) -> int:
    """Monte Carlo benchmark; writes the aggregated selection report."""
    output = require_output(cfg)
    scenario = _scenario(cfg)
    report = simulate.run_replications(
        scenario,
        bench_methods(cfg),
        n_reps=scenario.n_reps,
        path_settings=PathSettings(n_lambda=cfg.n_lambda, lambda_min_ratio=cfg.lambda_min_ratio),
        config=solver_config(cfg),
        jobs=cfg.jobs,
    )
    metrics.write_report(report, output)
    write_manifest(cfg, output, {"scenario": scenario.model_dump(mode="json"), "methods": report.methods})
    return EXIT_OK


def cmd_simulate(cfg: CliConfig) -> int:
    """Draw one replication of a scenario and export it with its truth."""
    output = require_output(cfg)
    scenario = _scenario(cfg)
    dataset = simulate.generate_dataset(scenario, cfg.rep)
    simulate.export_dataset(dataset, output, scenario)
    write_manifest(cfg, output, {"sigma": dataset.sigma, "seed": dataset.seed})
    return EXIT_OK


def cmd_calibrate(cfg: CliConfig) -> int:
    """Print (lambda, tau) from a universal rule or the orthogonal calibration."""
    if cfg.p is None or cfg.sigma is None:
        raise InputError("calibrate needs --p and --sigma")
    if cfg.rule == "universal":
        if cfg.n is None:
            raise InputError("universal rules need --n")
        inputs = UniversalInputs(n=cfg.n, p=cfg.p, sigma=cfg.sigma, epsilon_prior=cfg.epsilon_prior)
        if cfg.family == TwinFamily.TWIN_A:
            pair = tuning.universal_twin_a(inputs)
        else:
            pair = tuning.universal_twin_b(inputs, high_dim=cfg.high_dim)
    else:
        if cfg.alpha is None:
            raise InputError("calibration needs --alpha")
        target = CalibrationTarget(alpha=cfg.alpha, p=cfg.p, sigma=cfg.sigma)
        data = None
        if cfg.input:
            _, data, _ = load_problem(cfg)
        pair = tuning.calibrate_orthogonal(target, cfg.family, data=data, h=cfg.h)
    lines = [f"family={pair.family.value}", f"rule={pair.rule}", f"lambda={pair.lam!r}", f"tau={pair.tau!r}"]
    if pair.target is not None:
        lines.append(f"target={pair.target!r}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.output:
        output = Path(cfg.output)
        output.write_text(text, encoding="utf-8")
        write_manifest(cfg, output)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[CliConfig], int]] = {
    "fit": cmd_fit,
    "path": cmd_path,
    "cv": cmd_cv,
    "split": cmd_split,
    "bench": cmd_bench,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file or a manifest written by an earlier run")
    parser.add_argument("-o", "--output", help="output file")
    parser.add_argument("-v", "--verbose", action="store_true", help="enable debug logging")
    parser.add_argument("--seed", type=int, help="base seed")


def _add_penalty(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--penalty", choices=[k.value for k in PenaltyKind], help="penalty family")
    parser.add_argument("--lambda", dest="lam", type=float, help="penalty level on unit-norm columns")
    parser.add_argument("--tau", type=float, help="TWIN peak location")
    parser.add_argument("--h", type=float, help="TWIN-b plateau fraction")
    parser.add_argument("--shape", type=float, help="MCP gamma or SCAD a")
    parser.add_argument("--tau-scale", choices=["per_sample", "standardized"], help="scale on which tau is given")
    parser.add_argument("--algorithm", choices=[a.value for a in Algorithm], help="cd or mclla")


def _add_solver(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-sweeps", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--coordinate-order", choices=["cyclic", "random_permutation"])
    parser.add_argument("--lla-outer-iters", type=int)
    parser.add_argument("--kkt-tol", type=float)


def _add_path(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-lambda", type=int, help="number of lambda values")
    parser.add_argument("--lambda-min-ratio", type=float, help="smallest lambda as a fraction of the first")


def _add_scenario(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", help="scenario key=value file")
    parser.add_argument("--model", type=int, choices=[1, 2, 3, 4], help="preset benchmark model")
    parser.add_argument("--n", type=int, help="sample size")
    parser.add_argument("--p", type=int, help="number of predictors")
    parser.add_argument("--rho", type=float, help="AR(1) correlation")
    parser.add_argument("--snr", type=float, help="signal-to-noise ratio")
    parser.add_argument("--test-size", type=int, help="rows of the test set")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twinreg", description="TWIN penalized regression")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("fit", "fit at one lambda"),
        ("path", "fit a warm-started lambda path"),
        ("cv", "choose lambda by K-fold cross-validation"),
        ("split", "held-out MSPE over random train/test splits"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("-i", "--input", help="CSV with header; response first")
        _add_penalty(p)
        _add_solver(p)
        if name != "fit":
            _add_path(p)
        if name in ("cv", "split"):
            p.add_argument("--folds", type=int, help="cross-validation folds")
            p.add_argument("--jobs", type=int, help="worker threads")
        if name == "cv":
            p.add_argument("--coefficients", help="where to write the refit coefficients")
        if name == "split":
            p.add_argument("--splits", type=int, help="number of random splits")
            p.add_argument("--test-size", type=int, help="held-out rows per split")

    bench = sub.add_parser("bench", help="Monte Carlo selection benchmark")
    _add_common(bench)
    _add_scenario(bench)
    bench.add_argument("--tau", type=float, help="TWIN tau on the per-sample scale")
    bench.add_argument("--h", type=float, help="TWIN-b plateau fraction")
    bench.add_argument("--shape", type=float, help="MCP gamma or SCAD a of the comparators")
    bench.add_argument("--algorithm", choices=[a.value for a in Algorithm], help="default algorithm of the methods")
    _add_solver(bench)
    _add_path(bench)
    bench.add_argument("--methods", help="comma-separated, e.g. twin-a,lasso,twin-b/mclla")
    bench.add_argument("--tau-sweep", help="comma-separated tau values for one TWIN family")
    bench.add_argument("--family", choices=[f.value for f in TwinFamily], help="family of the tau sweep")
    bench.add_argument("--reps", type=int, help="number of replications")
    bench.add_argument("--jobs", type=int, help="worker threads")

    sim = sub.add_parser("simulate", help="draw a dataset from a scenario")
    _add_common(sim)
    _add_scenario(sim)
    sim.add_argument("--rep", type=int, help="replication index")

    cal = sub.add_parser("calibrate", help="universal or calibrated (lambda, tau)")
    _add_common(cal)
    cal.add_argument("--rule", choices=["universal", "calibrated"])
    cal.add_argument("--family", choices=[f.value for f in TwinFamily])
    cal.add_argument("--n", type=int)
    cal.add_argument("--p", type=int)
    cal.add_argument("--sigma", type=float)
    cal.add_argument("--alpha", type=float)
    cal.add_argument("--epsilon-prior", type=float)
    cal.add_argument("--high-dim", action="store_true", default=None)
    cal.add_argument("--h", type=float)
    cal.add_argument("-i", "--input", help="orthonormal-design CSV used to score calibration candidates")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except (InputError, ValidationError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_INPUT
    except (SolverDivergenceError, TwinRegError, ArithmeticError) as e:
        logger.error("solver failure: %s", e)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
