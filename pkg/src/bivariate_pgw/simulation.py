"""
Paired lifetimes drawn through the shared tempered-stable frailty construction.
"""
from __future__ import annotations

import logging
import math
from typing import Dict, List, Optional

import inflect
import numpy as np
from scipy import optimize

from bivariate_pgw.bivariate import BivariateModel
from bivariate_pgw.errors import DomainError
from bivariate_pgw.frailty import SeedLike, TsParams, ts_sample
from bivariate_pgw.paired_io import PairedRecord
from bivariate_pgw.univariate import (
    ApgwParams,
    MarginalFamily,
    PgwParams,
    cure_fraction,
    quantile_apgw,
    quantile_pgw,
)

logger = logging.getLogger(__name__)
_inflect = inflect.engine()

# Survival levels stay inside (0, 1) so the quantile is defined and finite.
_MIN_LEVEL = 1e-300
_MAX_LEVEL = 1.0 - 1e-16


def _margin_times(levels: np.ndarray, margin: ApgwParams, family: MarginalFamily) -> np.ndarray:
    """Quantiles at the given survival levels; levels at or below a cure fraction give inf."""
    levels = np.clip(levels, _MIN_LEVEL, _MAX_LEVEL)
    if family is MarginalFamily.PGW:
        pgw = PgwParams(gamma=margin.gamma, kappa=margin.tau, lam=margin.lam, phi=margin.phi)
        return np.asarray(quantile_pgw(levels, pgw), dtype=float)
    times = np.full(levels.shape, math.inf)
    alive = levels > cure_fraction(margin)
    if np.any(alive):
        times[alive] = quantile_apgw(levels[alive], margin)
    return times


def _censoring_fraction(times: np.ndarray, uniforms: np.ndarray, c_max: float) -> float:
    return float(np.mean(times > c_max * uniforms[:, None]))


def _calibrate_censoring(times: np.ndarray, uniforms: np.ndarray, rate: float) -> float:
    """c_max such that C = c_max * U censors `rate` of all lifetimes."""
    cured = float(np.mean(np.isinf(times)))
    if rate <= cured:
        raise DomainError(
            f"censoring rate {rate:g} is not above the simulated cure fraction {cured:.3g}"
        )
    finite = times[np.isfinite(times)]
    lo, hi = float(finite.min()) * 1e-3, float(finite.max())
    while _censoring_fraction(times, uniforms, hi) > rate:
        hi *= 2.0

    def excess(log_c: float) -> float:
        return _censoring_fraction(times, uniforms, math.exp(log_c)) - rate

    log_c = optimize.brentq(excess, math.log(lo), math.log(hi), xtol=1e-10)
    return math.exp(log_c)


def simulate_dataset(
    model: BivariateModel,
    n: int,
    censor_rate: float = 0.0,
    seed: SeedLike = None,
    covariates: Optional[Dict[str, float]] = None,
) -> List[PairedRecord]:
    """
    Simulate n pairs from a bivariate PGW/APGW model.

    A frailty B ~ TS(omega, omega * lambda, 1) is shared by the pair. Given B,
    each member's unit survival level is exp(-B s_i) with s_i = r_i^(1/omega) - 1,
    so an exponential draw E_i gives the marginal survival level

        u_i = exp(-lambda ((1 + E_i / B)^omega - 1)),

    which is inverted with the member's marginal quantile function. With
    censor_rate > 0 one uniform censoring time C ~ U(0, c_max) per pair
    censors both members, c_max chosen so that the censored share of all 2n
    lifetimes equals censor_rate.

    Raises:
        DomainError: for n < 1, censor_rate outside [0, 1), a model with
            per-record parameters, or a cure model simulated without censoring.
    """
    if n < 1:
        raise DomainError(f"at least one pair is needed, got {n}")
    if not 0.0 <= censor_rate < 1.0:
        raise DomainError(f"censor_rate must lie in [0, 1), got {censor_rate!r}")
    if np.ndim(model.lam) or np.ndim(model.omega):
        raise DomainError("simulation needs a model with scalar parameters")

    rng = np.random.default_rng(seed)
    lam, omega = float(model.lam), float(model.omega)
    frailty = ts_sample(TsParams(omega=omega, xi=omega * lam, theta=1.0), n, rng)
    exponentials = rng.standard_exponential((n, 2))
    levels = np.exp(-lam * np.expm1(omega * np.log1p(exponentials / frailty[:, None])))

    times = np.column_stack(
        [
            _margin_times(levels[:, 0], model.marginal1, model.family),
            _margin_times(levels[:, 1], model.marginal2, model.family),
        ]
    )
    events = np.ones((n, 2), dtype=int)
    if censor_rate > 0:
        uniforms = rng.uniform(size=n)
        c_max = _calibrate_censoring(times, uniforms, censor_rate)
        censor = c_max * uniforms[:, None]
        events = (times <= censor).astype(int)
        times = np.minimum(times, censor)
        logger.info("Censoring times drawn from U(0, %.4g)", c_max)
    elif np.any(np.isinf(times)):
        raise DomainError("cured subjects have no finite lifetime; simulate with censor_rate > 0")

    # a censoring time of exactly 0 is measure zero but not representable
    times = np.maximum(times, np.finfo(float).tiny)
    covariates = dict(covariates or {})
    records = [
        PairedRecord(
            id=str(i + 1),
            t1=float(times[i, 0]),
            d1=int(events[i, 0]),
            t2=float(times[i, 1]),
            d2=int(events[i, 1]),
            covariates=covariates,
        )
        for i in range(n)
    ]
    censored = int(2 * n - events.sum())
    logger.info(
        "Simulated %d %s, %d of %d lifetimes censored",
        n,
        _inflect.plural("pair", n),
        censored,
        2 * n,
    )
    return records
