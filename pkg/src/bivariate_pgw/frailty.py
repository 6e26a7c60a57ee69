"""
Tempered stable (power variance) frailty: Laplace transform, random variates
and Monte-Carlo checks that mixing PGW/APGW hazards over the frailty stays
inside the family.

The TS density has no closed form, so the distribution is samplable but not
evaluable here.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, Union

import inflect
import numpy as np

from bivariate_pgw.errors import DomainError
from bivariate_pgw.univariate import (
    ApgwParams,
    MarginalFamily,
    inverse_unit_chf,
    quantile_apgw,
    survival_apgw,
)

logger = logging.getLogger(__name__)
_inflect = inflect.engine()

SeedLike = Union[int, np.random.Generator, None]
MixingKind = Literal["tempered_stable", "inverse_gaussian", "gamma"]

GRID_SIZE = 50
MIN_VERIFICATION_DRAWS = 10_000
# Two-sided Kolmogorov-Smirnov coefficient at 95%.
_KS_95 = 1.36
# Uniforms are drawn in batches of this many per pass of the rejection loop.
_REJECTION_BATCH = 8192


@dataclass(frozen=True)
class TsParams:
    """
    TS(omega, xi, theta), with Laplace transform

        exp[-(xi / omega) {(theta + s)^omega - theta^omega}].

    omega = 1 is the point mass at xi; omega = 0 encodes the gamma limit with
    shape xi and rate theta.
    """
    omega: float
    xi: float
    theta: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.omega <= 1.0):
            raise DomainError(f"TS omega must lie in [0, 1], got {self.omega!r}")
        if not (math.isfinite(self.xi) and self.xi > 0):
            raise DomainError(f"TS xi must be finite and > 0, got {self.xi!r}")
        if not (math.isfinite(self.theta) and self.theta >= 0):
            raise DomainError(f"TS theta must be finite and >= 0, got {self.theta!r}")
        if self.omega == 0.0 and self.theta == 0.0:
            raise DomainError("the gamma limit (omega = 0) needs theta > 0")


@dataclass(frozen=True)
class FrailtyCheckReport:
    """
    Outcome of a mixing-closure check.

    Attributes:
        max_abs_dev: Largest |empirical survival - target survival| on the grid.
        n: Number of simulated lifetimes.
        grid_size: Number of grid points the deviation was taken over.
        ks_band_95: 1.36 / sqrt(n), the 95% Kolmogorov-Smirnov band for reference.
    """
    max_abs_dev: float
    n: int
    grid_size: int
    ks_band_95: float

    def __post_init__(self) -> None:
        if self.max_abs_dev < 0:
            raise ValueError(f"max_abs_dev must be >= 0, got {self.max_abs_dev!r}")
        if self.n <= 0 or self.grid_size <= 0:
            raise ValueError(f"n and grid_size must be positive, got n={self.n}, grid_size={self.grid_size}")


def ts_laplace(s: Union[float, np.ndarray], p: TsParams) -> Union[float, np.ndarray]:
    """
    Laplace transform E[exp(-s B)] of B ~ TS(omega, xi, theta).

    Raises:
        DomainError: if any s is negative.
    """
    s = np.asarray(s, dtype=float)
    if np.any(np.isnan(s)) or np.any(s < 0):
        raise DomainError(f"Laplace argument must be >= 0, got {s!r}")
    if p.omega == 0.0:
        log_lt = -p.xi * np.log1p(s / p.theta)
    elif p.omega == 1.0:
        log_lt = -p.xi * s
    else:
        # (theta + s)^omega - theta^omega, written to stay accurate for small s
        if p.theta > 0:
            growth = p.theta**p.omega * np.expm1(p.omega * np.log1p(s / p.theta))
        else:
            growth = s**p.omega
        log_lt = -(p.xi / p.omega) * growth
    value = np.exp(log_lt)
    return float(value) if value.ndim == 0 else value


# -----------------------------------------------------------------------------
# Sampling
# -----------------------------------------------------------------------------

def _zolotarev(u: np.ndarray, omega: float) -> np.ndarray:
    """
    Zolotarev's function A(u) for u in (0, pi), written with np.sinc so the
    small-u limit is handled without special cases.
    """
    def sinc(x: np.ndarray) -> np.ndarray:
        return np.sinc(x / math.pi)

    a3 = (
        ((1.0 - omega) * sinc((1.0 - omega) * u)) ** (1.0 - omega)
        * (omega * sinc(omega * u)) ** omega
        / sinc(u)
    )
    return a3 ** (1.0 / (1.0 - omega))


def positive_stable_sample(omega: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draws with Laplace transform exp(-s^omega), 0 < omega < 1, by Kanter's
    representation (A(U) / E)^((1 - omega) / omega).
    """
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    return (_zolotarev(u, omega) / e) ** ((1.0 - omega) / omega)


def _tilted_stable_pieces(
    omega: float,
    scale: float,
    theta: float,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exactly `count` draws of scale * S tilted by exp(-theta x), by rejection."""
    accepted = np.empty(0)
    rounds = 0
    while accepted.size < count:
        needed = count - accepted.size
        batch = max(needed * 2, min(_REJECTION_BATCH, 4 * needed))
        draws = scale * positive_stable_sample(omega, batch, rng)
        if theta > 0:
            keep = rng.uniform(size=batch) < np.exp(-theta * draws)
            draws = draws[keep]
        accepted = np.concatenate([accepted, draws[:needed]])
        rounds += 1
    logger.debug("Tilted stable sampler used %d rejection %s", rounds, _inflect.plural("round", rounds))
    return accepted


def ts_sample(p: TsParams, n: int, seed: SeedLike = None) -> np.ndarray:
    """
    Draw n i.i.d. values from TS(omega, xi, theta).

    Positive stable variates are scaled to Laplace exponent xi/omega and
    accepted with probability exp(-theta x). When the acceptance rate
    exp(-xi theta^omega / omega) would drop below 1/e, xi is split into m equal
    parts and m independent draws are summed (TS is infinitely divisible in xi).

    Args:
        p: Distribution parameters.
        n: Number of draws; 0 gives an empty array.
        seed: Integer seed or numpy Generator; the draw is deterministic given it.

    Returns:
        Array of n positive reals.
    """
    if n < 0:
        raise DomainError(f"sample size must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.empty(0)
    if p.omega == 1.0:
        return np.full(n, p.xi)
    if p.omega == 0.0:
        return rng.gamma(shape=p.xi, scale=1.0 / p.theta, size=n)

    exponent = p.xi / p.omega
    pieces = max(1, math.ceil(exponent * p.theta**p.omega))
    scale = (exponent / pieces) ** (1.0 / p.omega)
    draws = _tilted_stable_pieces(p.omega, scale, p.theta, n * pieces, rng)
    if pieces > 1:
        logger.debug("Split TS xi into %d pieces", pieces)
    return draws.reshape(n, pieces).sum(axis=1)


def inverse_gaussian_sample(xi: float, theta: float, n: int, seed: SeedLike = None) -> np.ndarray:
    """
    TS(1/2, xi, theta) drawn as an inverse Gaussian with mean xi / sqrt(theta)
    and shape 2 xi^2; xi = theta = 1/2 gives IG(1/2, 1/2).
    """
    if not (xi > 0 and theta > 0):
        raise DomainError(f"inverse Gaussian mixing needs xi > 0 and theta > 0, got {xi!r}, {theta!r}")
    rng = np.random.default_rng(seed)
    return rng.wald(xi / math.sqrt(theta), 2.0 * xi * xi, size=n)


# -----------------------------------------------------------------------------
# Mixing closure checks
# -----------------------------------------------------------------------------

def _check_sample_size(n: int) -> None:
    if n < MIN_VERIFICATION_DRAWS:
        raise DomainError(f"verification needs n >= {MIN_VERIFICATION_DRAWS}, got {n}")


def _deviation_report(lifetimes: np.ndarray, target: ApgwParams) -> FrailtyCheckReport:
    """Sup over a log-spaced grid of |empirical survival - target survival|."""
    lo = float(quantile_apgw(0.99, target))
    hi = float(quantile_apgw(0.01, target))
    grid = np.geomspace(lo, hi, GRID_SIZE)
    ordered = np.sort(lifetimes)
    empirical = 1.0 - np.searchsorted(ordered, grid, side="right") / ordered.size
    deviation = float(np.max(np.abs(empirical - np.asarray(survival_apgw(grid, target)))))
    n = int(lifetimes.size)
    return FrailtyCheckReport(
        max_abs_dev=deviation,
        n=n,
        grid_size=GRID_SIZE,
        ks_band_95=_KS_95 / math.sqrt(n),
    )


def _pgw_lifetimes_given_frailty(gamma: float, kappa: float, frailty: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """T | B ~ PGW(gamma, kappa, B) by inverting B {(1 + t^gamma)^kappa - 1} = E."""
    e = rng.standard_exponential(frailty.size)
    x = inverse_unit_chf(e / frailty, kappa, MarginalFamily.PGW)
    return x ** (1.0 / gamma)


def _pgw_as_apgw(gamma: float, kappa: float, lam: float) -> ApgwParams:
    """
    APGW parameters with the survival function of PGW(gamma, kappa, lam).

    The APGW form at tau = kappa has c.h.f. ((k+1)/k) {(1 + x/(k+1))^k - 1},
    so phi absorbs (k+1)^(-1/gamma) and lambda absorbs k/(k+1).
    """
    return ApgwParams(
        gamma=gamma,
        tau=kappa,
        lam=lam * kappa / (kappa + 1.0),
        phi=(kappa + 1.0) ** (1.0 / gamma),
    )


def verify_result1(
    gamma: float,
    kappa: float,
    omega: float,
    lam: float,
    n: int,
    seed: SeedLike = None,
    mixing: MixingKind = "tempered_stable",
) -> FrailtyCheckReport:
    """
    Mix PGW(gamma, kappa, B) over a frailty B and compare the resulting
    lifetimes with the closed-form mixture.

    mixing="tempered_stable": B ~ TS(omega, omega*lam, 1); target PGW(gamma, omega*kappa, lam).
    mixing="inverse_gaussian": same target with omega = 1/2 and B drawn as an
        inverse Gaussian instead.
    mixing="gamma": the omega = 0 limit; B ~ gamma(lam, 1) and the target is
        Burr XII with survival (1 + t^gamma)^(-lam*kappa).

    Args:
        gamma, kappa, lam: Parameters of the conditional PGW hazard.
        omega: Frailty index; ignored for gamma mixing.
        n: Number of lifetimes, at least 10^4.
        seed: Integer seed or numpy Generator.
        mixing: Which frailty distribution to draw B from.

    Returns:
        FrailtyCheckReport with the sup-norm deviation.
    """
    _check_sample_size(n)
    if not (gamma > 0 and kappa > 0 and lam > 0):
        raise DomainError(f"gamma, kappa and lam must be > 0, got {gamma!r}, {kappa!r}, {lam!r}")
    rng = np.random.default_rng(seed)

    if mixing == "gamma":
        frailty = ts_sample(TsParams(omega=0.0, xi=lam), n, rng)
        target = ApgwParams(gamma=gamma, tau=0.0, lam=lam * kappa)
    elif mixing == "inverse_gaussian":
        if omega != 0.5:
            raise DomainError(f"inverse Gaussian mixing corresponds to omega = 0.5, got {omega!r}")
        frailty = inverse_gaussian_sample(0.5 * lam, 1.0, n, rng)
        target = _pgw_as_apgw(gamma, 0.5 * kappa, lam)
    elif mixing == "tempered_stable":
        if not (0.0 < omega <= 1.0):
            raise DomainError(f"omega must lie in (0, 1], got {omega!r}")
        frailty = ts_sample(TsParams(omega=omega, xi=omega * lam), n, rng)
        target = _pgw_as_apgw(gamma, omega * kappa, lam)
    else:
        raise DomainError(f"unknown mixing distribution {mixing!r}")

    lifetimes = _pgw_lifetimes_given_frailty(gamma, kappa, frailty, rng)
    report = _deviation_report(lifetimes, target)
    logger.info(
        "PGW mixing check (%s, omega=%g, kappa=%g): max deviation %.4g over %d lifetimes",
        mixing, omega, kappa, report.max_abs_dev, n,
    )
    return report


def result_a1_frailty(kappa: float, omega: float) -> TsParams:
    """
    The TS frailty that maps APGW(gamma, kappa, B) lifetimes onto APGW with
    tau = omega*kappa after rescaling:

        xi = kappa^(omega-1) (omega kappa + 1) / (kappa + 1)^omega,  theta = (kappa + 1) / kappa.
    """
    return TsParams(
        omega=omega,
        xi=kappa ** (omega - 1.0) * (omega * kappa + 1.0) / (kappa + 1.0) ** omega,
        theta=(kappa + 1.0) / kappa,
    )


def verify_resultA1(
    gamma: float,
    kappa: float,
    omega: float,
    n: int,
    seed: SeedLike = None,
) -> FrailtyCheckReport:
    """
    Mix APGW(gamma, kappa, B) over B ~ result_a1_frailty(kappa, omega) and
    compare T/a, a = {(kappa + 1) / (omega kappa + 1)}^(1/gamma), with
    APGW(gamma, omega*kappa, 1).

    The mixture survival is exp[-H_A{(t/a)^gamma; omega*kappa}], so T/a is
    the APGW variable. The result is sometimes quoted for a*T instead; that
    form does not hold unless a = 1.
    """
    _check_sample_size(n)
    if not (gamma > 0 and kappa > 0):
        raise DomainError(f"gamma and kappa must be > 0, got {gamma!r}, {kappa!r}")
    if not (0.0 < omega <= 1.0):
        raise DomainError(f"omega must lie in (0, 1], got {omega!r}")
    rng = np.random.default_rng(seed)

    frailty = ts_sample(result_a1_frailty(kappa, omega), n, rng)
    e = rng.standard_exponential(n)
    x = inverse_unit_chf(e / frailty, kappa, MarginalFamily.APGW)
    scale = ((kappa + 1.0) / (omega * kappa + 1.0)) ** (1.0 / gamma)
    lifetimes = x ** (1.0 / gamma) / scale

    report = _deviation_report(lifetimes, ApgwParams(gamma=gamma, tau=omega * kappa))
    logger.info(
        "APGW mixing check (omega=%g, kappa=%g): max deviation %.4g over %d lifetimes",
        omega, kappa, report.max_abs_dev, n,
    )
    return report


def verify_weibull_extension_link(gamma: float, n: int, seed: SeedLike = None) -> FrailtyCheckReport:
    """
    Mix the Weibull-extension c.h.f. b (e^(t^gamma) - 1) over B ~ Exp(1); the
    result is Weibull with survival exp(-t^gamma).
    """
    _check_sample_size(n)
    if not gamma > 0:
        raise DomainError(f"gamma must be > 0, got {gamma!r}")
    rng = np.random.default_rng(seed)

    frailty = rng.standard_exponential(n)
    e = rng.standard_exponential(n)
    lifetimes = np.log1p(e / frailty) ** (1.0 / gamma)

    report = _deviation_report(lifetimes, ApgwParams(gamma=gamma, tau=1.0))
    logger.info("Weibull-extension link check: max deviation %.4g over %d lifetimes", report.max_abs_dev, n)
    return report
