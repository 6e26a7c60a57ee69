"""
Right-censored log-likelihood of paired survival data under a ModelSpec.
"""
from __future__ import annotations

import logging
import math
import threading
from typing import Optional

import numpy as np

from bivariate_pgw.bivariate import log_likelihood_terms
from bivariate_pgw.errors import DomainError, EvaluationError, LikelihoodEvaluationError
from bivariate_pgw.models_schema import ModelSpec
from bivariate_pgw.paired_io import PairedData
from bivariate_pgw.param_vector import ParamLayout
from bivariate_pgw.univariate import ApgwParams, MarginalFamily, check_times, log1p_unit_chf, log_unit_hazard, scaled_power

logger = logging.getLogger(__name__)

# Log-likelihood reported to the optimizer for parameter values that cannot be evaluated.
SENTINEL_LOGLIK = -1e10


def _exact_sum(terms: np.ndarray) -> float:
    """Correctly rounded sum; independent of record order."""
    return math.fsum(terms.tolist())


def record_terms(layout: ParamLayout, theta: np.ndarray, data: PairedData) -> np.ndarray:
    """Per-record log-likelihood contributions at theta."""
    model = layout.model(theta, data.covariates)
    return log_likelihood_terms(data.t1, data.t2, data.d1, data.d2, model)


def log_likelihood(spec: ModelSpec, theta: np.ndarray, data: PairedData, layout: Optional[ParamLayout] = None) -> float:
    """
    Sum over subjects of the censored contributions: log of the joint density
    when both members fail, log(-dS/dt_j) when only member j fails and log S
    when both are censored.

    Raises:
        LikelihoodEvaluationError: naming the first record whose contribution
            is not finite.
        DomainError: if theta maps outside the parameter space.
    """
    if len(data) == 0:
        raise DomainError("log-likelihood needs at least one record")
    layout = layout or ParamLayout(spec, list(data.covariates))
    with np.errstate(all="ignore"):
        terms = record_terms(layout, theta, data)
    bad = ~np.isfinite(terms)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise LikelihoodEvaluationError(
            f"record {data.ids[first]!r} has a non-finite log-likelihood contribution ({terms[first]!r})",
            record_id=data.ids[first],
        )
    return _exact_sum(terms)


def univariate_log_likelihood(times: np.ndarray, events: np.ndarray, params: ApgwParams, family: MarginalFamily = MarginalFamily.APGW) -> float:
    """sum(d log h(t) - H(t)) for one margin with right censoring."""
    times = check_times(times)
    events = np.asarray(events).astype(bool)
    x = scaled_power(times, params.gamma, params.phi)
    lam = np.asarray(params.lam, dtype=float)
    with np.errstate(all="ignore"):
        chf = lam * np.expm1(log1p_unit_chf(x, params.tau, family))
        log_h = np.log(lam) + log_unit_hazard(times, params.gamma, params.tau, params.phi, family)
    terms = np.where(events, log_h, 0.0) - chf
    return _exact_sum(np.asarray(terms, dtype=float))


class NegativeLogLikelihood:
    """
    Objective for minimisers: -log_likelihood(theta), or -SENTINEL_LOGLIK where
    the likelihood cannot be evaluated.

    Sentinel evaluations are counted and logged once per objective so line
    searches can step back from invalid regions.
    """

    def __init__(self, spec: ModelSpec, data: PairedData) -> None:
        self.spec = spec
        self.data = data
        self.layout = ParamLayout(spec, list(data.covariates))
        self._lock = threading.Lock()
        self.sentinel_evaluations = 0
        self.evaluations = 0

    def __call__(self, theta: np.ndarray) -> float:
        with self._lock:
            self.evaluations += 1
        try:
            return -log_likelihood(self.spec, theta, self.data, self.layout)
        except (LikelihoodEvaluationError, EvaluationError, DomainError) as exc:
            with self._lock:
                self.sentinel_evaluations += 1
                first = self.sentinel_evaluations == 1
            if first:
                logger.warning("Log-likelihood replaced by sentinel: %s", exc)
            else:
                logger.debug("Log-likelihood replaced by sentinel: %s", exc)
            return -SENTINEL_LOGLIK

    def is_sentinel(self, value: float) -> bool:
        return value >= -SENTINEL_LOGLIK
