"""
Copyright 2026 TESCAN 3DIM, s.r.o.
All rights reserved
"""

from typing import Any


class PuccigradError(Exception):
    """
    Base class for all errors raised by puccigrad. Every subclass carries the
    process exit code the CLI reports when the error escapes a run.
    """

    exit_code: int = 1


class ConfigError(PuccigradError):
    """
    The run configuration could not be parsed or violates a constraint.

    Parameters
    ----------
    message : str
        Human readable diagnostic naming the first violated constraint.
    line : int | None
        1-based line of the offending key in the configuration file, if known.
    """

    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ContractViolation(PuccigradError, ValueError):
    """
    A documented precondition of an operation was violated by the caller.
    """


class NonConvergenceError(PuccigradError):
    """
    An iterative solver exhausted its iteration budget.

    Parameters
    ----------
    message : str
        Description of the failure.
    history : list[float]
        Residual or fixed-point gap history up to the failure.
    report : Any | None
        Partial report of the run that failed, if one exists.
    """

    exit_code = 3

    def __init__(
        self,
        message: str,
        history: list[float] | None = None,
        report: Any | None = None,
    ):
        super().__init__(message)
        self.history = list(history or [])
        self.report = report


class InnerNonConvergenceError(NonConvergenceError):
    """
    The frozen right-hand side solve did not reach its residual tolerance.
    """


class PicardNonConvergenceError(NonConvergenceError):
    """
    The mollified right-hand side fixed-point iteration did not settle.
    """


class OracleInvalidError(PuccigradError):
    """
    The radial oracle left the regime in which its ansatz is valid.
    """


class BoundViolationError(PuccigradError):
    """
    A runtime a-priori bound (sup bound, L^p bound) was violated.
    """

    exit_code = 4
