"""Per-step cost counters and the exceptions raised by the steppers."""

from __future__ import annotations

from dataclasses import dataclass

from .banded import SolverFailure


@dataclass
class StepReport:
    matvecs: int = 0
    linear_solves: int = 0
    newton_iters: int = 0
    cheb_iters: int = 0
    energy_before: float = float("nan")
    energy_after: float = float("nan")
    mass: float = float("nan")


class ConfigurationError(ValueError):
    pass


class InstabilityError(ArithmeticError):
    """A step produced non-finite values (the usual symptom of an unstable step size)."""

    def __init__(self, message, step=None, iteration=None):
        super().__init__(message)
        self.step = step
        self.iteration = iteration


class NewtonFailure(RuntimeError):
    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


#: Failures that a scan or a run treats as "this step size does not work".
NumericalFailure = (InstabilityError, NewtonFailure, SolverFailure)
