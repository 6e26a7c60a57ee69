"""
Power generalized Weibull (PGW) and adapted PGW (APGW) distributions.

PGW(gamma, kappa, lambda, phi) has cumulative hazard

    lambda * {(1 + (phi t)^gamma)^kappa - 1}

and APGW(gamma, tau, lambda, phi) the rescaled form

    lambda * ((tau + 1) / tau) * {(1 + (phi t)^gamma / (tau + 1))^tau - 1}

which admits tau = 0 (Burr XII, log-logistic when lambda = 1), tau = +inf
(Weibull extension, Gompertz when gamma = 1) and, for -1 < tau < 0, an
improper distribution with a cure fraction.

The kernels below work on x = (phi t)^gamma with lambda = 1 ("unit" c.h.f.)
and accept numpy arrays for gamma and phi, so the bivariate and inference
code can evaluate many records at once. The shape tau (kappa for PGW) is
always a scalar.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from bivariate_pgw.errors import DomainError, NoSolutionError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# |tau| below this uses the series form of the APGW c.h.f.
SMALL_TAU = 1e-6
# Above this value of tau*log1p(x/(tau+1)) log(1 + H) is formed without H.
_LOG_FORM_THRESHOLD = 30.0


class MarginalFamily(str, Enum):
    PGW = "pgw"
    APGW = "apgw"


class HazardShape(str, Enum):
    # Labels describe the hazard's path. "bathtub" is avoided because the
    # PGW literature sometimes attaches it to UP_THEN_DOWN.
    CONSTANT = "constant"
    INCREASING = "increasing"
    DECREASING = "decreasing"
    UP_THEN_DOWN = "up-then-down"
    DOWN_THEN_UP = "down-then-up"


def _all_positive(value: ArrayLike) -> bool:
    arr = np.asarray(value, dtype=float)
    return bool(np.all(np.isfinite(arr)) and np.all(arr > 0))


@dataclass(frozen=True)
class PgwParams:
    """
    PGW(gamma, kappa, lambda, phi).

    Attributes:
        gamma: Power parameter; controls the hazard near zero.
        kappa: Distribution-choosing parameter; kappa*gamma controls the tail.
        lam: Vertical scale (proportional hazards) parameter.
        phi: Horizontal scale (accelerated failure time) parameter.
    """
    gamma: ArrayLike
    kappa: float
    lam: ArrayLike = 1.0
    phi: ArrayLike = 1.0

    def __post_init__(self) -> None:
        for name in ("gamma", "kappa", "lam", "phi"):
            if not _all_positive(getattr(self, name)):
                raise DomainError(f"PGW parameter {name} must be finite and > 0, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class ApgwParams:
    """
    APGW(gamma, tau, lambda, phi).

    `tau` lies in (-1, inf) or is math.inf. Values in (-1, 0) give a cure model
    whose survival function levels off at exp{lambda (tau + 1) / tau}.
    """
    gamma: ArrayLike
    tau: float
    lam: ArrayLike = 1.0
    phi: ArrayLike = 1.0

    def __post_init__(self) -> None:
        for name in ("gamma", "lam", "phi"):
            if not _all_positive(getattr(self, name)):
                raise DomainError(f"APGW parameter {name} must be finite and > 0, got {getattr(self, name)!r}")
        check_tau(self.tau)


def check_tau(tau: float) -> None:
    if math.isnan(tau) or tau <= -1.0 or tau == -math.inf:
        raise DomainError(f"APGW tau must be > -1 (or +inf), got {tau!r}")


def check_times(t: ArrayLike) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"times must be >= 0, got {t!r}")
    return arr


def _scalar_or_array(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


# -----------------------------------------------------------------------------
# Unit c.h.f. kernels in x = (phi t)^gamma
# -----------------------------------------------------------------------------

def unit_chf(x: np.ndarray, tau: float, family: MarginalFamily) -> np.ndarray:
    """H(x) with lambda = 1."""
    x = np.asarray(x, dtype=float)
    if family is MarginalFamily.PGW:
        return np.expm1(tau * np.log1p(x))
    if tau == math.inf:
        return np.expm1(x)
    if tau == 0.0:
        return np.log1p(x)
    c = tau + 1.0
    u = np.log1p(x / c)
    if abs(tau) < SMALL_TAU:
        tu = tau * u
        return c * u * (1.0 + tu / 2.0 + tu * tu / 6.0)
    return (c / tau) * np.expm1(tau * u)


def log1p_unit_chf(x: np.ndarray, tau: float, family: MarginalFamily) -> np.ndarray:
    """log{1 + H(x)}, the log of the quantity raised to 1/omega in the L-functions."""
    x = np.asarray(x, dtype=float)
    if family is MarginalFamily.PGW:
        return tau * np.log1p(x)
    if tau == math.inf:
        return x.copy()
    if tau <= 0.0 or abs(tau) < SMALL_TAU:
        return np.log1p(unit_chf(x, tau, family))
    c = tau + 1.0
    tu = tau * np.log1p(x / c)
    with np.errstate(over="ignore"):
        direct = np.log1p((c / tau) * np.expm1(np.minimum(tu, _LOG_FORM_THRESHOLD)))
    large = tu + math.log(c) - math.log(tau) + np.log1p(-np.exp(-tu) / c)
    return np.where(tu > _LOG_FORM_THRESHOLD, large, direct)


def log_unit_chf_slope(x: np.ndarray, tau: float, family: MarginalFamily) -> np.ndarray:
    """log H'(x)."""
    x = np.asarray(x, dtype=float)
    if family is MarginalFamily.PGW:
        return math.log(tau) + (tau - 1.0) * np.log1p(x)
    if tau == math.inf:
        return x.copy()
    return (tau - 1.0) * np.log1p(x / (tau + 1.0))


def unit_chf_curvature(x: np.ndarray, tau: float, family: MarginalFamily) -> np.ndarray:
    """H''(x) / H'(x)."""
    x = np.asarray(x, dtype=float)
    if family is MarginalFamily.PGW:
        return (tau - 1.0) / (1.0 + x)
    if tau == math.inf:
        return np.ones_like(x)
    return (tau - 1.0) / (tau + 1.0 + x)


def inverse_unit_chf(q: np.ndarray, tau: float, family: MarginalFamily) -> np.ndarray:
    """x such that H(x) = q; +inf where q is at or beyond a cure limit."""
    q = np.asarray(q, dtype=float)
    if family is MarginalFamily.PGW:
        return np.expm1(np.log1p(q) / tau)
    if tau == math.inf:
        return np.log1p(q)
    if tau == 0.0:
        return np.expm1(q)
    c = tau + 1.0
    inner = q * tau / c
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = c * np.expm1(np.log1p(inner) / tau)
    return np.where(inner <= -1.0, np.inf, x)


def _log_power(base: np.ndarray, power: ArrayLike) -> np.ndarray:
    """power * log(base), taken as 0 where power == 0 (so 0**0 = 1)."""
    power = np.asarray(power, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = power * np.log(base)
    return np.where(power == 0.0, 0.0, value)


def scaled_power(t: np.ndarray, gamma: ArrayLike, phi: ArrayLike) -> np.ndarray:
    """x = (phi t)^gamma."""
    with np.errstate(over="ignore"):
        return np.exp(_log_power(np.asarray(phi) * t, gamma))


def log_unit_hazard(
    t: np.ndarray,
    gamma: ArrayLike,
    tau: float,
    phi: ArrayLike,
    family: MarginalFamily,
) -> np.ndarray:
    """log of dH((phi t)^gamma)/dt, i.e. the log hazard with lambda = 1."""
    x = scaled_power(t, gamma, phi)
    return (
        np.log(phi)
        + np.log(gamma)
        + _log_power(np.asarray(phi) * t, np.asarray(gamma) - 1.0)
        + log_unit_chf_slope(x, tau, family)
    )


def _density_from_logs(log_h: np.ndarray, chf: np.ndarray) -> np.ndarray:
    """exp(log h - H), with 0 wherever H is infinite."""
    with np.errstate(invalid="ignore", over="ignore"):
        value = np.exp(log_h - chf)
    return np.where(np.isinf(chf), 0.0, value)


def unit_hazard_log_derivative(
    t: np.ndarray,
    gamma: ArrayLike,
    tau: float,
    phi: ArrayLike,
    family: MarginalFamily,
) -> np.ndarray:
    """d/dt of log_unit_hazard: (gamma - 1)/t + gamma x/t * H''(x)/H'(x)."""
    x = scaled_power(t, gamma, phi)
    gamma = np.asarray(gamma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return ((gamma - 1.0) + gamma * x * unit_chf_curvature(x, tau, family)) / t


# -----------------------------------------------------------------------------
# PGW
# -----------------------------------------------------------------------------

def chf_pgw(t: ArrayLike, p: PgwParams) -> ArrayLike:
    """lambda * {(1 + (phi t)^gamma)^kappa - 1}."""
    t = check_times(t)
    x = scaled_power(t, p.gamma, p.phi)
    return _scalar_or_array(np.asarray(p.lam) * unit_chf(x, p.kappa, MarginalFamily.PGW))


def survival_pgw(t: ArrayLike, p: PgwParams) -> ArrayLike:
    return _scalar_or_array(np.exp(-np.asarray(chf_pgw(t, p))))


def hazard_pgw(t: ArrayLike, p: PgwParams) -> ArrayLike:
    t = check_times(t)
    log_h = log_unit_hazard(t, p.gamma, p.kappa, p.phi, MarginalFamily.PGW)
    return _scalar_or_array(np.asarray(p.lam) * np.exp(log_h))


def density_pgw(t: ArrayLike, p: PgwParams) -> ArrayLike:
    t = check_times(t)
    log_h = np.log(p.lam) + log_unit_hazard(t, p.gamma, p.kappa, p.phi, MarginalFamily.PGW)
    return _scalar_or_array(_density_from_logs(log_h, np.asarray(chf_pgw(t, p))))


def quantile_pgw(u: ArrayLike, p: PgwParams) -> ArrayLike:
    """Time t with survival_pgw(t) = u."""
    u = _check_probabilities(u)
    x = inverse_unit_chf(-np.log(u) / np.asarray(p.lam), p.kappa, MarginalFamily.PGW)
    return _scalar_or_array(_time_from_scaled_power(x, p.gamma, p.phi))


# -----------------------------------------------------------------------------
# APGW
# -----------------------------------------------------------------------------

def chf_apgw(t: ArrayLike, p: ApgwParams) -> ArrayLike:
    """
    lambda * ((tau + 1) / tau) * {(1 + (phi t)^gamma / (tau + 1))^tau - 1}, with
    the Burr limit lambda * log(1 + x) at tau = 0 and the Weibull-extension limit
    lambda * (e^x - 1) at tau = inf.
    """
    t = check_times(t)
    x = scaled_power(t, p.gamma, p.phi)
    return _scalar_or_array(np.asarray(p.lam) * unit_chf(x, p.tau, MarginalFamily.APGW))


def survival_apgw(t: ArrayLike, p: ApgwParams) -> ArrayLike:
    return _scalar_or_array(np.exp(-np.asarray(chf_apgw(t, p))))


def hazard_apgw(t: ArrayLike, p: ApgwParams) -> ArrayLike:
    """lambda * gamma * phi * (phi t)^(gamma-1) * (1 + x / (tau + 1))^(tau - 1)."""
    t = check_times(t)
    log_h = log_unit_hazard(t, p.gamma, p.tau, p.phi, MarginalFamily.APGW)
    return _scalar_or_array(np.asarray(p.lam) * np.exp(log_h))


def density_apgw(t: ArrayLike, p: ApgwParams) -> ArrayLike:
    t = check_times(t)
    log_h = np.log(p.lam) + log_unit_hazard(t, p.gamma, p.tau, p.phi, MarginalFamily.APGW)
    return _scalar_or_array(_density_from_logs(log_h, np.asarray(chf_apgw(t, p))))


def cure_fraction(p: ApgwParams) -> float:
    """Limiting survival probability: exp{lambda (tau + 1) / tau} for -1 < tau < 0, else 0."""
    if p.tau < 0:
        return float(np.exp(np.asarray(p.lam) * (p.tau + 1.0) / p.tau))
    return 0.0


def quantile_apgw(u: ArrayLike, p: ApgwParams) -> ArrayLike:
    """
    Time t with survival_apgw(t) = u, by inverting the c.h.f. in closed form.

    Raises:
        DomainError: if u is outside (0, 1).
        NoSolutionError: if u is at or below the cure fraction.
    """
    u = _check_probabilities(u)
    floor = cure_fraction(p)
    if floor > 0 and np.any(u <= floor):
        raise NoSolutionError(
            f"survival level {u!r} is at or below the cure fraction {floor:.6g}; no finite quantile"
        )
    x = inverse_unit_chf(-np.log(u) / np.asarray(p.lam), p.tau, MarginalFamily.APGW)
    return _scalar_or_array(_time_from_scaled_power(x, p.gamma, p.phi))


def apgw_from_pgw_time(t: ArrayLike, gamma: float, tau: float) -> ArrayLike:
    """
    Map a PGW(gamma, tau, lambda) time to the APGW(gamma, tau, lambda) time with
    the same survival probability:

        z = [(tau+1)^(1-1/tau) {1 + tau (1+t^gamma)^tau}^(1/tau) - (tau+1)]^(1/gamma)
    """
    if not (0 < tau < math.inf):
        raise DomainError(f"the PGW source needs 0 < tau < inf, got {tau!r}")
    t = check_times(t)
    h = unit_chf(scaled_power(t, gamma, 1.0), tau, MarginalFamily.PGW)
    x = inverse_unit_chf(h, tau, MarginalFamily.APGW)
    return _scalar_or_array(_time_from_scaled_power(x, gamma, 1.0))


def special_case_name(p: ApgwParams) -> str:
    if -1.0 < p.tau < 0.0:
        return "cure model"
    if p.tau == math.inf:
        return "Gompertz" if np.all(np.asarray(p.gamma) == 1.0) else "Weibull extension"
    if p.tau == 0.0:
        return "log-logistic" if np.all(np.asarray(p.lam) == 1.0) else "Burr XII"
    if p.tau == 1.0:
        return "exponential" if np.all(np.asarray(p.gamma) == 1.0) else "Weibull"
    if p.tau == 2.0 and np.all(np.asarray(p.gamma) == 1.0):
        return "linear hazard"
    return "APGW"


def _check_probabilities(u: ArrayLike) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"probabilities must lie in (0, 1), got {u!r}")
    return arr


def _time_from_scaled_power(x: np.ndarray, gamma: ArrayLike, phi: ArrayLike) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.exp(np.log(x) / np.asarray(gamma)) / np.asarray(phi)


# -----------------------------------------------------------------------------
# Hazard shapes
# -----------------------------------------------------------------------------

def classify_hazard_shape(gamma: float, kappa: float) -> HazardShape:
    """
    Hazard shape of PGW(gamma, kappa) (equivalently APGW with tau = kappa > 0).

    Boundary ties resolve toward the monotone labels; constant takes precedence.
    """
    if not (gamma > 0 and kappa > 0):
        raise DomainError(f"gamma and kappa must be > 0, got gamma={gamma!r}, kappa={kappa!r}")
    tail = kappa * gamma
    if gamma == 1.0 and kappa == 1.0:
        return HazardShape.CONSTANT
    if gamma <= 1.0 and tail <= 1.0:
        return HazardShape.DECREASING
    if gamma >= 1.0 and tail >= 1.0:
        return HazardShape.INCREASING
    if gamma > 1.0:
        return HazardShape.UP_THEN_DOWN
    return HazardShape.DOWN_THEN_UP


def hazard_shape_from_scan(log_hazard: np.ndarray, tolerance: float = 1e-9) -> Optional[HazardShape]:
    """
    Label the shape of a hazard sampled on an increasing grid.

    Differences with magnitude below `tolerance` (relative to the log-hazard
    scale) count as flat. Returns None when the sign pattern has more than one
    change, i.e. a shape outside the five-label taxonomy.
    """
    log_hazard = np.asarray(log_hazard, dtype=float)
    diffs = np.diff(log_hazard)
    scale = max(1.0, float(np.max(np.abs(log_hazard[np.isfinite(log_hazard)]), initial=1.0)))
    signs = np.where(np.abs(diffs) <= tolerance * scale, 0, np.sign(diffs)).astype(int)
    moving = signs[signs != 0]
    if moving.size == 0:
        return HazardShape.CONSTANT
    changes = int(np.count_nonzero(np.diff(moving)))
    if changes == 0:
        return HazardShape.INCREASING if moving[0] > 0 else HazardShape.DECREASING
    if changes == 1:
        return HazardShape.UP_THEN_DOWN if moving[0] > 0 else HazardShape.DOWN_THEN_UP
    logger.debug("Hazard scan shows %d sign changes", changes)
    return None
