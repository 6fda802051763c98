"""Base solver with shared state handling, sweep bookkeeping and result assembly."""
import logging
from typing import List, Optional, Tuple

import numpy as np

from twinreg.errors import InputError, SolverDivergenceError
from twinreg.models.penalty_models import PenaltySpec
from twinreg.models.solver_models import (
    Algorithm,
    CoordinateOrder,
    FitResult,
    Problem,
    SolverConfig,
)

logger = logging.getLogger(__name__)


class SweepHistory:
    """Objective values recorded after each sweep, most recent last."""

    def __init__(self, max_entries: int = 10_000):
        """Initialize with a maximum number of entries to retain."""
        self.objectives: List[float] = []
        self.max_entries = max_entries

    def add(self, objective: float) -> None:
        self.objectives.append(objective)
        # Trim old entries if we're over the limit
        if len(self.objectives) > self.max_entries:
            self.objectives = self.objectives[-self.max_entries:]

    def clear(self) -> None:
        self.objectives = []


class BaseSolver:
    """Base class for coordinate-wise penalized least-squares solvers."""

    algorithm: Algorithm = Algorithm.CD

    def __init__(
        self,
        config: Optional[SolverConfig] = None,
        record_history: bool = False,
    ):
        """Initialize the solver.

        Args:
            config: Solver settings; defaults come from the application settings
            record_history: Recompute and keep the full objective after every sweep
        """
        self.config = config or SolverConfig.from_settings()
        self.record_history = record_history
        self.history = SweepHistory()

    def fit(
        self,
        problem: Problem,
        spec: PenaltySpec,
        warm_start: Optional[np.ndarray] = None,
    ) -> FitResult:
        """Fit the penalized least-squares problem at the penalty in ``spec``.

        Subclasses must implement this method.
        """
        raise NotImplementedError("Subclasses must implement fit")

    def _check_problem(self, problem: Problem) -> None:
        if not problem.standardized:
            raise InputError("solvers require a standardized problem; call standardize() first")

    def _init_state(
        self,
        problem: Problem,
        warm_start: Optional[np.ndarray],
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Return writable ``(beta, residual)`` consistent with each other."""
        if warm_start is None:
            beta = np.zeros(problem.p)
            r = np.array(problem.y, dtype=np.float64)
        else:
            beta = np.array(warm_start, dtype=np.float64)
            if beta.shape != (problem.p,):
                raise InputError(f"warm start has shape {beta.shape}, expected ({problem.p},)")
            if not np.all(np.isfinite(beta)):
                raise InputError("warm start contains non-finite entries")
            r = problem.y - problem.X @ beta
        self.history.clear()
        return beta, r

    def _rng(self) -> np.random.Generator:
        return np.random.default_rng(self.config.rng_seed)

    def _order(self, indices: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.config.coordinate_order == CoordinateOrder.RANDOM_PERMUTATION:
            return rng.permutation(indices)
        return indices

    def _is_small(self, change: float, beta: np.ndarray) -> bool:
        scale = max(1.0, float(np.max(np.abs(beta))) if beta.size else 0.0)
        return change <= self.config.tol * scale

    def _after_sweep(
        self,
        problem: Problem,
        spec: PenaltySpec,
        change: float,
        beta: np.ndarray,
    ) -> None:
        if not np.isfinite(change) or not np.all(np.isfinite(beta)):
            logger.error("Non-finite coefficients while fitting %s", spec.label())
            raise SolverDivergenceError(
                f"coefficients became non-finite while fitting {spec.label()} at lambda={spec.lam:g}"
            )
        if self.record_history:
            # Local import keeps the service modules free of a cycle
            from twinreg.services.solver import objective
            self.history.add(objective(problem, spec, beta))

    def _finish(
        self,
        problem: Problem,
        spec: PenaltySpec,
        beta: np.ndarray,
        sweeps: int,
        converged: bool,
    ) -> FitResult:
        from twinreg.services.solver import kkt_check, objective

        if not converged:
            logger.warning(
                "%s fit of %s at lambda=%g stopped after %d sweeps without converging",
                self.algorithm.value,
                spec.label(),
                spec.lam,
                sweeps,
            )
        kkt = kkt_check(problem, spec, beta, self.config.kkt_tol)
        beta.setflags(write=False)
        return FitResult(
            beta=beta,
            active_set=tuple(int(j) for j in np.flatnonzero(beta)),
            objective=objective(problem, spec, beta),
            sweeps_used=sweeps,
            converged=converged,
            kkt_max_violation=kkt.max_violation,
            lam=spec.lam,
            algorithm=self.algorithm,
        )
