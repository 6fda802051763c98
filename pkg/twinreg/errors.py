"""Exceptions raised by twinreg."""


class TwinRegError(Exception):
    """Base class for all twinreg errors."""


class InputError(TwinRegError, ValueError):
    """Invalid argument, malformed data or violated precondition."""


class TuningError(InputError):
    """A tuning rule cannot be evaluated for the given inputs."""


class SolverDivergenceError(TwinRegError, ArithmeticError):
    """Solver state became non-finite."""
