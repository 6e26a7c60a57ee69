"""
The BB9 (power variance) survival copula

    C(u, v) = exp[lambda - {(lambda - log u)^(1/omega) + (lambda - log v)^(1/omega) - lambda^(1/omega)}^omega]

with generator exp[lambda {1 - (1 + s)^omega}], its Gumbel (lambda -> 0) and
independence (omega = 1) limits, and its rank correlations.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from bivariate_pgw.errors import DomainError
from bivariate_pgw.numerics import (
    QuadratureSpec,
    integrate_2d,
    integrate_half_line,
    log_scaled_upper_incomplete_gamma,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Relative rounding allowed on Kendall's tau before a value outside [0, 1 - omega] is reported.
KENDALL_ROUNDING = 1e-12


@dataclass(frozen=True)
class CopulaParams:
    omega: float
    lam: float

    def __post_init__(self) -> None:
        if not (0.0 < self.omega <= 1.0):
            raise DomainError(f"copula omega must lie in (0, 1], got {self.omega!r}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"copula lambda must be finite and > 0, got {self.lam!r}")


# -----------------------------------------------------------------------------
# Shared L-function kernel
# -----------------------------------------------------------------------------

def log_l_from_log_r(log_r1: np.ndarray, log_r2: np.ndarray, omega: ArrayLike) -> np.ndarray:
    """
    log L for L = r1^(1/omega) + r2^(1/omega) - 1, given log r_i >= 0.

    Both the copula (r = 1 - log(u)/lambda) and the bivariate survival function
    (r = 1 + H) reduce to this form.
    """
    a1 = np.asarray(log_r1, dtype=float) / omega
    a2 = np.asarray(log_r2, dtype=float) / omega
    top = np.maximum(a1, a2)
    with np.errstate(over="ignore", invalid="ignore"):
        near = np.log1p(np.expm1(np.minimum(a1, 1.0)) + np.expm1(np.minimum(a2, 1.0)))
        far = top + np.log(np.exp(a1 - top) + np.exp(a2 - top) - np.exp(-top))
    return np.where(top < 1.0, near, far)


def log_joint_from_log_l(log_l: np.ndarray, lam: ArrayLike, omega: ArrayLike) -> np.ndarray:
    """log of exp[lambda (1 - L^omega)]."""
    with np.errstate(over="ignore"):
        return -np.asarray(lam) * np.expm1(np.asarray(omega) * log_l)


# -----------------------------------------------------------------------------
# CDFs and generator
# -----------------------------------------------------------------------------

def _check_unit_interval(*values: ArrayLike) -> None:
    for value in values:
        arr = np.asarray(value, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
            raise DomainError(f"copula arguments must lie strictly inside (0, 1), got {value!r}")


def _bb9_log_cdf(u: np.ndarray, v: np.ndarray, p: CopulaParams) -> np.ndarray:
    log_r1 = np.log1p(-np.log(u) / p.lam)
    log_r2 = np.log1p(-np.log(v) / p.lam)
    return log_joint_from_log_l(log_l_from_log_r(log_r1, log_r2, p.omega), p.lam, p.omega)


def bb9_cdf(u: ArrayLike, v: ArrayLike, p: CopulaParams) -> ArrayLike:
    """
    BB9 copula value C(u, v).

    Raises:
        DomainError: if u or v is not strictly inside (0, 1).
    """
    _check_unit_interval(u, v)
    value = np.exp(_bb9_log_cdf(np.asarray(u, dtype=float), np.asarray(v, dtype=float), p))
    return float(value) if value.ndim == 0 else value


def gumbel_cdf(u: ArrayLike, v: ArrayLike, omega: float) -> ArrayLike:
    """Gumbel copula exp[-{(-log u)^(1/omega) + (-log v)^(1/omega)}^omega]."""
    if not (0.0 < omega <= 1.0):
        raise DomainError(f"Gumbel omega must lie in (0, 1], got {omega!r}")
    _check_unit_interval(u, v)
    a1 = np.log(-np.log(np.asarray(u, dtype=float))) / omega
    a2 = np.log(-np.log(np.asarray(v, dtype=float))) / omega
    log_sum = np.logaddexp(a1, a2)
    value = np.exp(-np.exp(omega * log_sum))
    return float(value) if value.ndim == 0 else value


def bb9_generator(s: ArrayLike, p: CopulaParams) -> ArrayLike:
    """exp[lambda {1 - (1 + s)^omega}] for s >= 0."""
    s = np.asarray(s, dtype=float)
    if np.any(np.isnan(s)) or np.any(s < 0):
        raise DomainError(f"generator argument must be >= 0, got {s!r}")
    value = np.exp(-p.lam * np.expm1(p.omega * np.log1p(s)))
    return float(value) if value.ndim == 0 else value


def bb9_generator_inverse(u: ArrayLike, p: CopulaParams) -> ArrayLike:
    """(1 - log(u) / lambda)^(1/omega) - 1 for u in (0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any(np.isnan(u)) or np.any(u <= 0.0) or np.any(u > 1.0):
        raise DomainError(f"generator inverse needs u in (0, 1], got {u!r}")
    value = np.expm1(np.log1p(-np.log(u) / p.lam) / p.omega)
    return float(value) if value.ndim == 0 else value


# -----------------------------------------------------------------------------
# Dependence measures
# -----------------------------------------------------------------------------

def kendall_tau(p: CopulaParams) -> float:
    """
    Kendall's tau in closed form:

        K = 1 - omega {1 + 2 lambda - (2 lambda)^(1/omega) e^(2 lambda) Gamma(2 - 1/omega, 2 lambda)}

    The scaled incomplete gamma is taken in log space so large lambda cannot overflow.
    Values within rounding of [0, 1 - omega] are snapped onto it; anything
    further out is logged and returned as computed.
    """
    if p.omega == 1.0:
        return 0.0
    z = 2.0 * p.lam
    log_term = math.log(z) / p.omega + log_scaled_upper_incomplete_gamma(2.0 - 1.0 / p.omega, z)
    value = 1.0 - p.omega * (1.0 + z - math.exp(log_term))

    upper = 1.0 - p.omega
    slack = KENDALL_ROUNDING * (1.0 + z)
    if 0.0 <= value <= upper:
        return value
    if -slack <= value < 0.0 or upper < value <= upper + slack:
        logger.debug("Kendall's tau %.3g snapped onto [0, %.3g] (omega=%g, lambda=%g)", value, upper, p.omega, p.lam)
        return min(max(value, 0.0), upper)
    logger.warning(
        "Kendall's tau %.6g lies outside [0, %.6g] for omega=%g, lambda=%g; incomplete gamma may be inaccurate",
        value, upper, p.omega, p.lam,
    )
    return value


def kendall_tau_oracle(p: CopulaParams, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """
    Kendall's tau from the generator integral K = 1 - 4 int s phi'(s)^2 ds,
    after substituting v = lambda {(1 + s)^omega - 1}:

        K = 1 - 4 omega int_0^inf (lambda + v) {1 - (lambda / (lambda + v))^(1/omega)} e^(-2v) dv
    """
    lam, omega = p.lam, p.omega

    def integrand(v: float) -> float:
        return -(lam + v) * math.expm1(-math.log1p(v / lam) / omega) * math.exp(-2.0 * v)

    return 1.0 - 4.0 * omega * integrate_half_line(integrand, spec)


def spearman_rho(p: CopulaParams, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Spearman's rho, 12 * (integral of C over the unit square) - 3."""
    if p.omega == 1.0:
        return 0.0
    integral = integrate_2d(lambda u, v: np.exp(_bb9_log_cdf(u, v, p)), spec)
    return 12.0 * integral - 3.0


def spearman_bound(omega: float) -> float:
    """
    Upper bound on Spearman's rho for any lambda:

        min[3 {2^(2(2 - omega)) / (1 + 2^(1 - omega))^2 - 1}, 1]

    The bound is 1 for omega <= 1 + log2(sqrt(3) - 1), about 0.55.
    """
    if not (0.0 < omega <= 1.0):
        raise DomainError(f"omega must lie in (0, 1], got {omega!r}")
    bound = 3.0 * (2.0 ** (2.0 * (2.0 - omega)) / (1.0 + 2.0 ** (1.0 - omega)) ** 2 - 1.0)
    return min(bound, 1.0)


@dataclass(frozen=True)
class DependenceRow:
    omega: float
    lam: float
    kendall_tau: float
    spearman_rho: float
    spearman_bound: float
    rho_at_least_tau: bool


def dependence_grid(
    omegas: Sequence[float],
    lambdas: Sequence[float],
    spec: QuadratureSpec = QuadratureSpec(),
) -> List[DependenceRow]:
    """
    Kendall's tau, Spearman's rho and the rho bound over an (omega, lambda) grid.

    `rho_at_least_tau` records whether S >= K held at that point; it is evidence
    only and nothing is asserted about it.
    """
    rows: List[DependenceRow] = []
    for omega in omegas:
        bound = spearman_bound(omega)
        for lam in lambdas:
            params = CopulaParams(omega=omega, lam=lam)
            tau = kendall_tau(params)
            rho = spearman_rho(params, spec)
            rows.append(
                DependenceRow(
                    omega=omega,
                    lam=lam,
                    kendall_tau=tau,
                    spearman_rho=rho,
                    spearman_bound=bound,
                    rho_at_least_tau=rho >= tau,
                )
            )
    violations = sum(not row.rho_at_least_tau for row in rows)
    if violations:
        logger.info("S >= K failed at %d of %d grid points", violations, len(rows))
    return rows
