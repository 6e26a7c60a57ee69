"""
Kaplan-Meier estimates and model-based marginal survival curves for plotting.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import inflect
import numpy as np
import pandas as pd

from bivariate_pgw.errors import DomainError
from bivariate_pgw.fitting import FitResult
from bivariate_pgw.paired_io import PairedData
from bivariate_pgw.univariate import MarginalFamily, PgwParams, quantile_apgw, quantile_pgw

logger = logging.getLogger(__name__)
_inflect = inflect.engine()

CURVE_COLUMNS = ["source", "arm", "level", "time", "survival"]


@dataclass(frozen=True)
class KmCurve:
    """
    Product-limit step function.

    times[0] is 0 with survival 1; each later entry is an event time and the
    survival just after it.
    """
    times: np.ndarray
    survival: np.ndarray

    def __post_init__(self) -> None:
        if self.times.shape != self.survival.shape or self.times.ndim != 1:
            raise DomainError("times and survival must be vectors of the same length")
        if self.times.size == 0 or self.times[0] != 0 or self.survival[0] != 1:
            raise DomainError("a Kaplan-Meier curve starts at S(0) = 1")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("Kaplan-Meier times must be increasing")
        if np.any(np.diff(self.survival) > 0) or np.any(self.survival < 0):
            raise DomainError("Kaplan-Meier survival must be nonincreasing and nonnegative")

    def __call__(self, t: np.ndarray) -> np.ndarray:
        """Right-continuous step value at t."""
        positions = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") - 1
        return self.survival[np.clip(positions, 0, None)]


def kaplan_meier(times: Sequence[float], flags: Sequence[int]) -> KmCurve:
    """
    Product-limit estimate from right-censored times.

    Censorings tied with an event count as at risk at that event time.

    Raises:
        DomainError: on empty input, nonpositive times or flags other than 0/1.
    """
    times = np.asarray(times, dtype=float)
    flags = np.asarray(flags, dtype=int)
    if times.size == 0:
        raise DomainError("Kaplan-Meier needs at least one observation")
    if times.shape != flags.shape:
        raise DomainError(f"times and flags differ in length ({times.size} vs {flags.size})")
    if np.any(~np.isfinite(times)) or np.any(times <= 0):
        raise DomainError("Kaplan-Meier times must be finite and > 0")
    if np.any((flags != 0) & (flags != 1)):
        raise DomainError("Kaplan-Meier flags must be 0 or 1")

    unique_times, rank = np.unique(times, return_inverse=True)
    deaths = np.bincount(rank, weights=flags, minlength=unique_times.size)
    at_risk = np.cumsum(np.bincount(rank, minlength=unique_times.size)[::-1])[::-1]

    has_event = deaths > 0
    factors = 1.0 - deaths[has_event] / at_risk[has_event]
    survival = np.cumprod(factors)
    return KmCurve(
        times=np.concatenate(([0.0], unique_times[has_event])),
        survival=np.concatenate(([1.0], survival)),
    )


# -----------------------------------------------------------------------------
# Model curves
# -----------------------------------------------------------------------------

def _covariate_levels(result: FitResult, data: PairedData) -> List[Tuple[str, Dict[str, float], np.ndarray]]:
    """(label, covariate values, record mask) for every distinct combination the model uses."""
    names = result.spec.covariates
    if not names:
        return [("all", {}, np.ones(len(data), dtype=bool))]
    matrix = np.column_stack([data.covariates[name] for name in names])
    levels = []
    for row in np.unique(matrix, axis=0):
        values = {name: float(v) for name, v in zip(names, row)}
        label = ",".join(f"{name}={v:g}" for name, v in values.items())
        levels.append((label, values, np.all(matrix == row, axis=1)))
    return levels


def _model_grid(grid: Optional[Sequence[float]], data: PairedData) -> np.ndarray:
    if grid is None:
        grid = np.linspace(0.0, float(max(data.t1.max(), data.t2.max())), 101)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0):
        raise DomainError("curve grid times must be >= 0")
    return np.unique(np.concatenate(([0.0], grid)))


def export_fitted_curves(
    result: FitResult,
    data: PairedData,
    grid: Optional[Sequence[float]] = None,
) -> pd.DataFrame:
    """
    Long table of model and Kaplan-Meier marginal survival curves.

    Columns: source ("model" or "km"), arm (1 or 2), level (covariate
    combination, "all" without covariates), time, survival. Model curves are
    evaluated on `grid` (0 is always included); Kaplan-Meier rows are the step
    corners of each arm within each covariate level.
    """
    if not result.convergence.converged:
        logger.warning("Exporting curves from a fit that did not converge")
    times = _model_grid(grid, data)
    rows: List[pd.DataFrame] = []
    for label, values, mask in _covariate_levels(result, data):
        model = result.layout.model(result.theta_hat, values)
        arms = ((1, data.t1[mask], data.d1[mask]), (2, data.t2[mask], data.d2[mask]))
        for arm, arm_times, arm_flags in arms:
            rows.append(
                pd.DataFrame(
                    {
                        "source": "model",
                        "arm": arm,
                        "level": label,
                        "time": times,
                        "survival": np.asarray(model.marginal_survival(times, arm), dtype=float),
                    }
                )
            )
            curve = kaplan_meier(arm_times, arm_flags)
            rows.append(
                pd.DataFrame(
                    {"source": "km", "arm": arm, "level": label, "time": curve.times, "survival": curve.survival}
                )
            )
    levels = len(rows) // 4
    logger.info("Exported curves for %d covariate %s", levels, _inflect.plural("level", levels))
    return pd.concat(rows, ignore_index=True)[CURVE_COLUMNS]


def fitted_median(result: FitResult, arm: int, covariates: Optional[Dict[str, float]] = None) -> float:
    """Median lifetime of one arm under the fitted model."""
    values = {name: 0.0 for name in result.spec.covariates}
    values.update(covariates or {})
    model = result.layout.model(result.theta_hat, values)
    margin = model.marginal1 if arm == 1 else model.marginal2
    if model.family is MarginalFamily.PGW:
        return float(quantile_pgw(0.5, PgwParams(gamma=margin.gamma, kappa=margin.tau, lam=margin.lam, phi=margin.phi)))
    return float(quantile_apgw(0.5, margin))
