"""Exception types shared by every module."""

from __future__ import annotations


class HilferError(Exception):
    """Base class for library errors."""


class DomainError(HilferError, ValueError):
    """An argument lies outside the domain of the operation."""


class AccuracyError(HilferError, ArithmeticError):
    """A numerical method could not reach its target accuracy.

    ``bound`` carries the best error estimate that was achieved.
    """

    def __init__(self, message: str, bound: float = float("nan")) -> None:
        super().__init__(f"{message} (achieved bound {bound:.3e})")
        self.bound = bound


class EvaluationError(HilferError, ArithmeticError):
    """A user-supplied function returned non-finite values."""


class InvariantViolation(HilferError, RuntimeError):
    """Internal misuse, e.g. evaluating a singular family at t = 0."""


class DivergenceError(HilferError, RuntimeError):
    def __init__(self, message: str, history: list[float]) -> None:
        super().__init__(message)
        self.history = list(history)


class ConfigError(HilferError, ValueError):
    """Invalid scenario configuration; ``problems`` lists every violation."""

    def __init__(self, problems: list[str] | str) -> None:
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
