from __future__ import annotations

from typing import Any, Dict, Optional


class BivariatePgwError(Exception):
    """Base class for every error raised by this package."""


class DomainError(BivariatePgwError, ValueError):
    """An argument or parameter lies outside the domain of the operation."""


class NoSolutionError(DomainError):
    """
    No finite solution exists, for example a survival quantile requested
    below the cure fraction of an improper distribution.
    """


class InputError(BivariatePgwError, ValueError):
    """
    A data file or configuration document could not be parsed.

    Attributes:
        line: 1-based line number in the offending file, when known.
    """

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConvergenceError(BivariatePgwError, RuntimeError):
    """
    A numerical procedure stopped before meeting its tolerance.

    Attributes:
        estimate: The last estimate produced before giving up.
    """

    def __init__(self, message: str, estimate: float) -> None:
        super().__init__(message)
        self.estimate = estimate


class EvaluationError(BivariatePgwError, ArithmeticError):
    """
    A function returned a non-finite value where a finite one was required.

    Attributes:
        coordinate: Index of the perturbed coordinate, when the failure came from
            a finite-difference perturbation.
    """

    def __init__(self, message: str, coordinate: Optional[int] = None) -> None:
        super().__init__(message)
        self.coordinate = coordinate


class LikelihoodEvaluationError(EvaluationError):
    """
    A record contributed a non-finite term to the log-likelihood.

    Attributes:
        record_id: Identifier of the first offending record.
    """

    def __init__(self, message: str, record_id: Any) -> None:
        super().__init__(message)
        self.record_id = record_id


class OptimizationError(BivariatePgwError, RuntimeError):
    """
    Every start of a maximum-likelihood fit failed.

    Attributes:
        diagnostics: Per-start messages and final objective values.
    """

    def __init__(self, message: str, diagnostics: Dict[str, Any]) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


class CovarianceUnavailableError(BivariatePgwError, RuntimeError):
    """The fit's covariance matrix was flagged as unusable."""
