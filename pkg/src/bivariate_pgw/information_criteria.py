from __future__ import annotations

import math
from typing import List, Protocol, Sequence

from bivariate_pgw.errors import DomainError
from bivariate_pgw.models_schema import ComparisonRow


class FitLike(Protocol):
    """Minimal interface compare() needs from a fit."""

    name: str
    loglik: float
    dimension: int
    n_subjects: int
    kendall_tau: float


def aic(loglik: float, dimension: int) -> float:
    """2 * dim - 2 * loglik."""
    return 2.0 * dimension - 2.0 * loglik


def bic(loglik: float, dimension: int, n_subjects: int) -> float:
    """
    dim * log(n) - 2 * loglik, with n the number of subjects (pairs), not the
    number of individual lifetimes.
    """
    if n_subjects <= 0:
        raise DomainError(f"BIC needs a positive subject count, got {n_subjects}")
    return dimension * math.log(n_subjects) - 2.0 * loglik


def compare(fits: Sequence[FitLike]) -> List[ComparisonRow]:
    """
    Model comparison table with AIC and BIC differences from the best fit.

    Rows keep the input order; each delta column has a zero at its minimum, so
    the table does not depend on how the fits were ordered.
    """
    if not fits:
        raise DomainError("compare needs at least one fit")
    aics = [aic(f.loglik, f.dimension) for f in fits]
    bics = [bic(f.loglik, f.dimension, f.n_subjects) for f in fits]
    best_aic, best_bic = min(aics), min(bics)
    return [
        ComparisonRow(
            name=fit.name,
            dimension=fit.dimension,
            loglik=fit.loglik,
            aic=a,
            bic=b,
            delta_aic=a - best_aic,
            delta_bic=b - best_bic,
            kendall_tau=fit.kendall_tau,
        )
        for fit, a, b in zip(fits, aics, bics)
    ]


def format_criterion(value: float) -> str:
    """Two decimals, the precision model comparison tables are read at."""
    return f"{value:.2f}"
