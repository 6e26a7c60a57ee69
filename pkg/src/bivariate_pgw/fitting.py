"""
Maximum-likelihood fitting, standard errors, tau profiling and delta-method
intervals for bivariate APGW/PGW models.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import inflect
import numpy as np
from scipy import special, stats

from bivariate_pgw.config import FitOptions
from bivariate_pgw.copula import CopulaParams, kendall_tau
from bivariate_pgw.errors import (
    CovarianceUnavailableError,
    DomainError,
    OptimizationError,
)
from bivariate_pgw.information_criteria import aic, bic
from bivariate_pgw.likelihood import NegativeLogLikelihood
from bivariate_pgw.models_schema import ConvergenceInfo, FitReport, IntervalEstimate, ModelSpec, ProfileRow
from bivariate_pgw.multi_start_executor import MultiStartExecutor, OptimizerRunner, SENTINEL_OBJECTIVE, StartOutcome
from bivariate_pgw.numerics import StepRule, numeric_gradient, numeric_hessian
from bivariate_pgw.paired_io import PairedData
from bivariate_pgw.param_vector import ParamLayout
from bivariate_pgw.start_values import DefaultStartValueBuilder, StartValueBuilder

logger = logging.getLogger(__name__)
_inflect = inflect.engine()

# Step rule for the observed-information Hessian. Coarser than the gradient
# rule: second differences at 1e-5 lose about half the remaining digits.
HESSIAN_STEP = StepRule(absolute=1e-4, relative=1e-6)


@dataclass(frozen=True)
class FitResult:
    """
    Outcome of fit().

    Attributes:
        spec: The fitted ModelSpec.
        layout: Slot layout of the model.
        theta_hat: Maximum-likelihood estimate on the unconstrained scale.
        loglik: Log-likelihood at theta_hat.
        n_subjects: Number of pairs the likelihood was summed over.
        covariance: Inverse observed information, or None when flagged.
        covariance_flagged: True when the Hessian was singular or not
            positive definite.
        kendall_tau: Kendall's tau of the fitted copula (at covariates = 0
            when the copula parameters depend on covariates).
        convergence: Optimizer diagnostics.
        starts: Outcome of every start.
    """
    spec: ModelSpec
    layout: ParamLayout
    theta_hat: np.ndarray
    loglik: float
    n_subjects: int
    covariance: Optional[np.ndarray]
    covariance_flagged: bool
    kendall_tau: float
    convergence: ConvergenceInfo
    starts: List[StartOutcome] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.theta_hat.shape != (self.layout.dimension,):
            raise ValueError(
                f"theta_hat has shape {self.theta_hat.shape}, expected ({self.layout.dimension},)"
            )
        if self.covariance is not None and self.covariance.shape != (self.layout.dimension,) * 2:
            raise ValueError(f"covariance has shape {self.covariance.shape}")

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def dimension(self) -> int:
        return self.layout.dimension

    @property
    def aic(self) -> float:
        return aic(self.loglik, self.dimension)

    @property
    def bic(self) -> float:
        return bic(self.loglik, self.dimension, self.n_subjects)

    @property
    def standard_errors(self) -> Optional[np.ndarray]:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def theta(self, name: str) -> float:
        return float(self.theta_hat[self.layout.index(name)])

    def to_report(self) -> FitReport:
        se = self.standard_errors
        return FitReport(
            spec=self.spec,
            n_subjects=self.n_subjects,
            dimension=self.dimension,
            theta_unconstrained=self.layout.named(self.theta_hat),
            theta_natural=self.layout.natural_named(self.theta_hat),
            se={name: (None if se is None else float(se[i])) for i, name in enumerate(self.layout.names)},
            covariance=None if self.covariance is None else self.covariance.tolist(),
            covariance_flagged=self.covariance_flagged,
            loglik=self.loglik,
            aic=self.aic,
            bic=self.bic,
            kendall_tau=self.kendall_tau,
            convergence=self.convergence,
        )


# -----------------------------------------------------------------------------
# Fitting
# -----------------------------------------------------------------------------

def _covariance(objective: Callable[[np.ndarray], float], theta: np.ndarray) -> Optional[np.ndarray]:
    """Inverse of the numeric Hessian of -loglik, or None when it is not positive definite."""
    hessian = numeric_hessian(objective, theta, HESSIAN_STEP)
    eigenvalues = np.linalg.eigvalsh(hessian)
    if not np.all(np.isfinite(eigenvalues)) or eigenvalues.min() <= 0:
        logger.warning(
            "Observed information is not positive definite (smallest eigenvalue %.3g); covariance flagged",
            float(eigenvalues.min()),
        )
        return None
    covariance = np.linalg.inv(hessian)
    return 0.5 * (covariance + covariance.T)


def _kendall_at(layout: ParamLayout, theta: np.ndarray, covariates: Optional[Mapping[str, float]] = None) -> float:
    values = {name: 0.0 for name in layout.spec.covariates}
    values.update(covariates or {})
    p = layout.natural_parameters(theta, values)
    return kendall_tau(CopulaParams(omega=float(p.omega), lam=float(p.lam)))


def fit(
    spec: ModelSpec,
    data: PairedData,
    options: Optional[FitOptions] = None,
    start_builder: Optional[StartValueBuilder] = None,
) -> FitResult:
    """
    Maximise the censored log-likelihood from several starts and keep the best.

    Args:
        spec: Model structure.
        data: Paired observations.
        options: Starts, iteration cap, gradient tolerance, seed and threads.
        start_builder: Strategy for starting vectors; the default uses
            univariate marginal fits plus jittered copies.

    Returns:
        FitResult with the covariance from the numeric Hessian at the optimum.

    Raises:
        OptimizationError: if no start reached a finite log-likelihood.
    """
    options = options or FitOptions()
    objective = NegativeLogLikelihood(spec, data)
    layout = objective.layout
    builder = start_builder or DefaultStartValueBuilder(starts=options.starts, jitter=options.jitter)
    starts = builder.build(layout, data, np.random.default_rng(options.seed))
    logger.info("Fitting %s from %d %s", layout.describe(), len(starts), _inflect.plural("start", len(starts)))

    runner = OptimizerRunner(objective, grad_tol=options.grad_tol, max_iter=options.max_iter)
    outcomes = MultiStartExecutor(runner, threads=options.threads).execute(starts, description=spec.name or "Fitting")

    viable = [o for o in outcomes if np.isfinite(o.objective) and o.objective < SENTINEL_OBJECTIVE]
    if not viable:
        diagnostics: Dict[str, object] = {
            f"start {o.index}": {"message": o.message, "objective": o.objective} for o in outcomes
        }
        raise OptimizationError(f"all {len(outcomes)} starts failed for {spec.name or 'model'}", diagnostics)

    converged = [o for o in viable if o.converged]
    best = min(converged or viable, key=lambda o: o.objective)
    if not converged:
        logger.warning("No start met the gradient tolerance; returning the best of %d finite starts", len(viable))

    covariance = _covariance(objective, best.theta)
    result = FitResult(
        spec=spec,
        layout=layout,
        theta_hat=best.theta,
        loglik=-best.objective,
        n_subjects=len(data),
        covariance=covariance,
        covariance_flagged=covariance is None,
        kendall_tau=_kendall_at(layout, best.theta),
        convergence=ConvergenceInfo(
            converged=best.converged,
            gradient_max_norm=best.gradient_max_norm,
            iterations=best.iterations,
            starts_attempted=len(outcomes),
            starts_succeeded=len(converged),
            sentinel_evaluations=objective.sentinel_evaluations,
            message=best.message,
        ),
        starts=outcomes,
    )
    logger.info("%s: loglik %.2f, AIC %.2f, BIC %.2f, K %.3f", spec.name or "model", result.loglik, result.aic, result.bic, result.kendall_tau)
    return result


class WarmStartValueBuilder(StartValueBuilder):
    """
    Starts taken from a previous fit: slots shared with the reference keep its
    estimates, other slots start at zero, and jittered copies follow.
    """

    def __init__(self, reference: Mapping[str, float], starts: int = 5, jitter: float = 0.5) -> None:
        self._reference = dict(reference)
        self._starts = starts
        self._jitter = jitter

    def build(self, layout: ParamLayout, data: PairedData, rng: np.random.Generator) -> List[np.ndarray]:
        base = np.array([self._reference.get(name, 0.0) for name in layout.names])
        return [base] + [base + rng.normal(0.0, self._jitter, size=base.size) for _ in range(self._starts - 1)]


def profile_tau(
    spec: ModelSpec,
    data: PairedData,
    tau_values: Sequence[float],
    options: Optional[FitOptions] = None,
    reference: Optional[FitResult] = None,
) -> List[ProfileRow]:
    """
    Refit with the common tau held at each value and report 2(l_hat - l_tau).

    Each row starts from the unconstrained fit. A row whose refit fails is
    flagged without affecting the others; a slightly negative chi-square (the
    profile found a higher likelihood than the reference) is clipped to 0.
    """
    if not spec.has("common_tau"):
        raise DomainError("profiling tau needs a model with a common tau")
    options = options or FitOptions()
    reference = reference or fit(spec, data, options)
    warm = reference.layout.named(reference.theta_hat)

    rows: List[ProfileRow] = []
    for tau in tau_values:
        fixed = spec.with_fixed_tau(tau)
        try:
            profiled = fit(fixed, data, options, WarmStartValueBuilder(warm, options.starts, options.jitter))
        except (OptimizationError, DomainError) as exc:
            logger.warning("Profile row tau=%g failed: %s", tau, exc)
            rows.append(ProfileRow(tau=tau, failed=True, message=str(exc)))
            continue
        chi2 = 2.0 * (reference.loglik - profiled.loglik)
        if chi2 < 0:
            logger.warning("Profile row tau=%g beat the reference fit by %.3g; chi-square clipped to 0", tau, -chi2 / 2)
            chi2 = 0.0
        rows.append(
            ProfileRow(
                tau=tau,
                kendall_tau=profiled.kendall_tau,
                loglik=profiled.loglik,
                chi2=chi2,
                failed=not profiled.convergence.converged,
                message=profiled.convergence.message,
            )
        )
        logger.info("Profile tau=%g: loglik %.2f, chi2 %.2f", tau, profiled.loglik, chi2)
    return rows


# -----------------------------------------------------------------------------
# Derived quantities
# -----------------------------------------------------------------------------

_SCALES: Dict[str, tuple] = {
    "identity": (lambda x: x, lambda y: y),
    "log": (math.log, math.exp),
    "logit": (special.logit, special.expit),
}


def _z(level: float) -> float:
    if not 0 < level < 1:
        raise DomainError(f"confidence level must lie in (0, 1), got {level!r}")
    return float(stats.norm.ppf(0.5 + level / 2.0))


def _require_covariance(result: FitResult) -> np.ndarray:
    if result.covariance is None:
        raise CovarianceUnavailableError(f"the covariance of {result.name or 'this fit'} is flagged as unusable")
    return result.covariance


def delta_method(
    result: FitResult,
    g: Callable[[np.ndarray], float],
    level: float = 0.95,
    scale: str = "identity",
) -> IntervalEstimate:
    """
    Wald interval for g(theta_hat) with variance grad(g)' Sigma grad(g).

    With scale "log" or "logit" the interval is built for the transformed
    quantity and mapped back, which keeps it inside the natural range.

    Raises:
        CovarianceUnavailableError: if the fit's covariance is flagged.
    """
    covariance = _require_covariance(result)
    if scale not in _SCALES:
        raise DomainError(f"unknown scale {scale!r}; expected one of {sorted(_SCALES)}")
    forward, backward = _SCALES[scale]

    def transformed(theta: np.ndarray) -> float:
        return float(forward(g(theta)))

    estimate = float(g(result.theta_hat))
    centre = transformed(result.theta_hat)
    gradient = numeric_gradient(transformed, result.theta_hat)
    se = math.sqrt(max(float(gradient @ covariance @ gradient), 0.0))
    half_width = _z(level) * se
    return IntervalEstimate(
        estimate=estimate,
        ci_lo=float(backward(centre - half_width)),
        ci_hi=float(backward(centre + half_width)),
        level=level,
        scale=scale,
    )


def parameter_interval(result: FitResult, slot: str, level: float = 0.95) -> IntervalEstimate:
    """Wald interval on the unconstrained slot, mapped through the slot's link (e.g. tau = e^theta - 1)."""
    covariance = _require_covariance(result)
    index = result.layout.index(slot)
    link = result.layout.link(slot)
    theta = float(result.theta_hat[index])
    half_width = _z(level) * math.sqrt(covariance[index, index])
    return IntervalEstimate(
        estimate=float(link.to_natural(theta)),
        ci_lo=float(link.to_natural(theta - half_width)),
        ci_hi=float(link.to_natural(theta + half_width)),
        level=level,
        scale=link.value,
    )


def kendall_tau_at(result: FitResult, covariates: Optional[Mapping[str, float]] = None) -> float:
    """Kendall's tau at the given covariate values (unlisted covariates are 0)."""
    return _kendall_at(result.layout, result.theta_hat, covariates)


def kendall_tau_interval(
    result: FitResult,
    covariates: Optional[Mapping[str, float]] = None,
    level: float = 0.95,
) -> IntervalEstimate:
    return delta_method(result, lambda theta: _kendall_at(result.layout, theta, covariates), level)


def quantile_ratio(
    result: FitResult,
    covariates: Optional[Mapping[str, float]] = None,
    level: float = 0.95,
) -> IntervalEstimate:
    """
    phi2 / phi1 at the given covariate values, with a log-scale interval.

    When the margins share gamma and tau this is the ratio of any quantile of
    member 1 to the same quantile of member 2.
    """
    values = {name: 0.0 for name in result.spec.covariates}
    values.update(covariates or {})

    def ratio(theta: np.ndarray) -> float:
        p = result.layout.natural_parameters(theta, values)
        return float(p.phi2 / p.phi1)

    return delta_method(result, ratio, level, scale="log")
