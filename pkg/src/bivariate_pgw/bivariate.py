"""
Bivariate PGW and APGW survival models.

Both share the form S(t1, t2) = exp[lambda {1 - L^omega(t1, t2)}] with

    L = r1^(1/omega) + r2^(1/omega) - 1,    r_i = 1 + H_i(t_i),

where H_i is the unit c.h.f. of margin i (PGW with kappa = tau_i in the PGW
family, APGW otherwise). A single lambda is shared by the copula and both
margins, so each margin is PGW/APGW with that lambda.

Every quantity is assembled from log r_i, log r_i' and r_i''/r_i' so that large
exponents such as tau/omega stay in log space. All functions broadcast over
numpy arrays of times and of per-record parameters.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Literal, Optional, Tuple, Union

import numpy as np

from bivariate_pgw.copula import CopulaParams, log_joint_from_log_l, log_l_from_log_r
from bivariate_pgw.errors import DomainError
from bivariate_pgw.univariate import (
    ApgwParams,
    HazardShape,
    MarginalFamily,
    PgwParams,
    check_times,
    hazard_shape_from_scan,
    log1p_unit_chf,
    log_unit_hazard,
    scaled_power,
    survival_apgw,
    survival_pgw,
    unit_hazard_log_derivative,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
Conditioning = Literal["ge", "eq"]

SCAN_GRID = np.geomspace(1e-3, 1e3, 400)


@dataclass(frozen=True)
class BivariateModel:
    """
    Eight-parameter bivariate survival model.

    Attributes:
        lam: Shared vertical scale, used by the copula and both margins.
        omega: Dependence parameter in (0, 1]; 1 is independence.
        marginal1: Shape and scale of margin 1. Its `lam` must equal `lam`.
        marginal2: Shape and scale of margin 2. Its `lam` must equal `lam`.
        family: PGW requires 0 < tau_i < inf (tau_i = omega * kappa_i); APGW
            allows tau_i > -1 or inf.
    """
    lam: ArrayLike
    omega: ArrayLike
    marginal1: ApgwParams
    marginal2: ApgwParams
    family: MarginalFamily = MarginalFamily.APGW

    def __post_init__(self) -> None:
        lam = np.asarray(self.lam, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        if not (np.all(np.isfinite(lam)) and np.all(lam > 0)):
            raise DomainError(f"lambda must be finite and > 0, got {self.lam!r}")
        if np.any(np.isnan(omega)) or np.any(omega <= 0) or np.any(omega > 1):
            raise DomainError(f"omega must lie in (0, 1], got {self.omega!r}")
        for index, margin in enumerate((self.marginal1, self.marginal2), start=1):
            if not np.all(np.asarray(margin.lam) == lam):
                raise DomainError(f"marginal{index} lambda differs from the shared lambda")
            if self.family is MarginalFamily.PGW and not (0 < margin.tau < math.inf):
                raise DomainError(f"the PGW family needs 0 < tau{index} < inf, got {margin.tau!r}")

    @classmethod
    def from_blocks(
        cls,
        lam: ArrayLike,
        omega: ArrayLike,
        block1: Tuple[ArrayLike, float, ArrayLike],
        block2: Tuple[ArrayLike, float, ArrayLike],
        family: MarginalFamily = MarginalFamily.APGW,
    ) -> "BivariateModel":
        """Build from (gamma, tau, phi) blocks, injecting the shared lambda."""
        gamma1, tau1, phi1 = block1
        gamma2, tau2, phi2 = block2
        return cls(
            lam=lam,
            omega=omega,
            marginal1=ApgwParams(gamma=gamma1, tau=tau1, lam=lam, phi=phi1),
            marginal2=ApgwParams(gamma=gamma2, tau=tau2, lam=lam, phi=phi2),
            family=family,
        )

    @property
    def copula(self) -> CopulaParams:
        return CopulaParams(omega=float(self.omega), lam=float(self.lam))

    def swapped(self) -> "BivariateModel":
        return replace(self, marginal1=self.marginal2, marginal2=self.marginal1)

    def marginal_survival(self, t: ArrayLike, which: int = 1) -> ArrayLike:
        margin = self.marginal1 if which == 1 else self.marginal2
        if self.family is MarginalFamily.PGW:
            return survival_pgw(t, PgwParams(gamma=margin.gamma, kappa=margin.tau, lam=margin.lam, phi=margin.phi))
        return survival_apgw(t, margin)


@dataclass(frozen=True)
class LValue:
    """
    L and its partial derivatives. l20 is the second derivative in t1 (and
    l02 in t2); the mixed partial of L is identically zero.
    """
    l: ArrayLike
    l10: ArrayLike
    l01: ArrayLike
    l20: ArrayLike
    l02: ArrayLike


@dataclass(frozen=True)
class SurvivalPartials:
    s: ArrayLike
    ds_dt1: ArrayLike
    ds_dt2: ArrayLike
    d2s: ArrayLike


@dataclass(frozen=True)
class _LogPieces:
    log_r1: np.ndarray
    log_r2: np.ndarray
    log_dr1: np.ndarray
    log_dr2: np.ndarray
    log_l: np.ndarray
    log_s: np.ndarray


def _scalar_or_array(values: np.ndarray) -> ArrayLike:
    values = np.asarray(values)
    return float(values) if values.ndim == 0 else values


def _log_pieces(t1: ArrayLike, t2: ArrayLike, model: BivariateModel) -> _LogPieces:
    t1 = check_times(t1)
    t2 = check_times(t2)
    m1, m2 = model.marginal1, model.marginal2
    log_r1 = log1p_unit_chf(scaled_power(t1, m1.gamma, m1.phi), m1.tau, model.family)
    log_r2 = log1p_unit_chf(scaled_power(t2, m2.gamma, m2.phi), m2.tau, model.family)
    log_l = log_l_from_log_r(log_r1, log_r2, model.omega)
    return _LogPieces(
        log_r1=log_r1,
        log_r2=log_r2,
        log_dr1=log_unit_hazard(t1, m1.gamma, m1.tau, m1.phi, model.family),
        log_dr2=log_unit_hazard(t2, m2.gamma, m2.tau, m2.phi, model.family),
        log_l=log_l,
        log_s=log_joint_from_log_l(log_l, model.lam, model.omega),
    )


def _log_l_slope(log_r: np.ndarray, log_dr: np.ndarray, omega: ArrayLike) -> np.ndarray:
    """log of dL/dt_i = (1/omega) r_i^(1/omega - 1) r_i'."""
    omega = np.asarray(omega, dtype=float)
    return -np.log(omega) + (1.0 / omega - 1.0) * log_r + log_dr


def _l_curvature(
    t: np.ndarray,
    log_r: np.ndarray,
    log_dr: np.ndarray,
    margin: ApgwParams,
    model: BivariateModel,
) -> np.ndarray:
    """(d2L/dt_i^2) / (dL/dt_i) = (1/omega - 1) r_i'/r_i + r_i''/r_i'."""
    omega = np.asarray(model.omega, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        return (1.0 / omega - 1.0) * np.exp(log_dr - log_r) + unit_hazard_log_derivative(
            t, margin.gamma, margin.tau, margin.phi, model.family
        )


def l_value(t1: ArrayLike, t2: ArrayLike, model: BivariateModel) -> LValue:
    """
    L(t1, t2) with its first and second derivatives in each argument.

    At the origin l = 1; for gamma_i < 1 the slope diverges like t_i^(gamma_i - 1).
    """
    pieces = _log_pieces(t1, t2, model)
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    with np.errstate(over="ignore"):
        l10 = np.exp(_log_l_slope(pieces.log_r1, pieces.log_dr1, model.omega))
        l01 = np.exp(_log_l_slope(pieces.log_r2, pieces.log_dr2, model.omega))
    l20 = l10 * _l_curvature(t1, pieces.log_r1, pieces.log_dr1, model.marginal1, model)
    l02 = l01 * _l_curvature(t2, pieces.log_r2, pieces.log_dr2, model.marginal2, model)
    return LValue(
        l=_scalar_or_array(np.exp(pieces.log_l)),
        l10=_scalar_or_array(l10),
        l01=_scalar_or_array(l01),
        l20=_scalar_or_array(l20),
        l02=_scalar_or_array(l02),
    )


def joint_survival(t1: ArrayLike, t2: ArrayLike, model: BivariateModel) -> ArrayLike:
    """P(T1 >= t1, T2 >= t2) = exp[lambda {1 - L^omega}]."""
    return _scalar_or_array(np.exp(_log_pieces(t1, t2, model).log_s))


def crowder_joint_survival(
    t1: ArrayLike,
    t2: ArrayLike,
    gamma1: float,
    gamma2: float,
    lam: float,
    omega: float,
) -> ArrayLike:
    """
    exp[lambda {1 - (t1^gamma1 + t2^gamma2 + 1)^omega}], the PGW-family model
    with tau1 = tau2 = omega and unit scales.
    """
    t1 = check_times(t1)
    t2 = check_times(t2)
    inner = np.log1p(t1**gamma1 + t2**gamma2)
    return _scalar_or_array(np.exp(-lam * np.expm1(omega * inner)))


@dataclass(frozen=True)
class _LogPartials:
    log_s: np.ndarray
    log_neg_ds1: np.ndarray
    log_neg_ds2: np.ndarray
    log_d2s: np.ndarray


def _log_partials(t1: ArrayLike, t2: ArrayLike, model: BivariateModel) -> _LogPartials:
    pieces = _log_pieces(t1, t2, model)
    lam = np.asarray(model.lam, dtype=float)
    omega = np.asarray(model.omega, dtype=float)
    log_lam_omega = np.log(lam) + np.log(omega)
    log_l10 = _log_l_slope(pieces.log_r1, pieces.log_dr1, omega)
    log_l01 = _log_l_slope(pieces.log_r2, pieces.log_dr2, omega)
    with np.errstate(over="ignore"):
        # lambda omega L^omega + 1 - omega > 0
        dependence = np.log(lam * omega * np.exp(omega * pieces.log_l) + 1.0 - omega)
    return _LogPartials(
        log_s=pieces.log_s,
        log_neg_ds1=pieces.log_s + log_lam_omega + (omega - 1.0) * pieces.log_l + log_l10,
        log_neg_ds2=pieces.log_s + log_lam_omega + (omega - 1.0) * pieces.log_l + log_l01,
        log_d2s=pieces.log_s + log_lam_omega + (omega - 2.0) * pieces.log_l + log_l10 + log_l01 + dependence,
    )


def survival_partials(t1: ArrayLike, t2: ArrayLike, model: BivariateModel) -> SurvivalPartials:
    """
    S and its partial derivatives:

        dS/dt1 = -S lambda omega L^(omega-1) L10
        d2S/dt1dt2 = S lambda omega L^(omega-2) L10 L01 {lambda omega L^omega + 1 - omega}

    d2s is the joint density and needs t1, t2 > 0.
    """
    parts = _log_partials(t1, t2, model)
    return SurvivalPartials(
        s=_scalar_or_array(np.exp(parts.log_s)),
        ds_dt1=_scalar_or_array(-np.exp(parts.log_neg_ds1)),
        ds_dt2=_scalar_or_array(-np.exp(parts.log_neg_ds2)),
        d2s=_scalar_or_array(np.exp(parts.log_d2s)),
    )


def log_likelihood_terms(
    t1: ArrayLike,
    t2: ArrayLike,
    d1: ArrayLike,
    d2: ArrayLike,
    model: BivariateModel,
) -> np.ndarray:
    """
    Per-record right-censored log-likelihood contributions:

        both events          log d2S/dt1dt2
        event 1 only         log(-dS/dt1)
        event 2 only         log(-dS/dt2)
        both censored        log S
    """
    parts = _log_partials(t1, t2, model)
    d1 = np.asarray(d1).astype(bool)
    d2 = np.asarray(d2).astype(bool)
    return np.select(
        [d1 & d2, d1 & ~d2, ~d1 & d2],
        [parts.log_d2s, parts.log_neg_ds1, parts.log_neg_ds2],
        default=parts.log_s,
    )


# -----------------------------------------------------------------------------
# Conditional hazards and the cross ratio
# -----------------------------------------------------------------------------

def cond_hazard_ge(t1: ArrayLike, t2: ArrayLike, model: BivariateModel) -> ArrayLike:
    """h(t1 | T2 >= t2) = lambda omega L^(omega-1) L10."""
    pieces = _log_pieces(t1, t2, model)
    omega = np.asarray(model.omega, dtype=float)
    log_h = (
        np.log(model.lam)
        + np.log(omega)
        + (omega - 1.0) * pieces.log_l
        + _log_l_slope(pieces.log_r1, pieces.log_dr1, omega)
    )
    return _scalar_or_array(np.exp(log_h))


def cond_hazard_eq(t1: ArrayLike, t2: ArrayLike, model: BivariateModel) -> ArrayLike:
    """h(t1 | T2 = t2) = h(t1 | T2 >= t2) + (1 - omega) L10 / L."""
    pieces = _log_pieces(t1, t2, model)
    omega = np.asarray(model.omega, dtype=float)
    log_l10 = _log_l_slope(pieces.log_r1, pieces.log_dr1, omega)
    ge = np.exp(np.log(model.lam) + np.log(omega) + (omega - 1.0) * pieces.log_l + log_l10)
    return _scalar_or_array(ge + (1.0 - omega) * np.exp(log_l10 - pieces.log_l))


def cross_ratio(t1: ArrayLike, t2: ArrayLike, model: BivariateModel) -> ArrayLike:
    """Clayton's cross ratio 1 + (1 - omega) / (lambda omega L^omega) = 1 + (1 - omega) / {omega (lambda - log S)}."""
    pieces = _log_pieces(t1, t2, model)
    omega = np.asarray(model.omega, dtype=float)
    return _scalar_or_array(1.0 + (1.0 - omega) / (model.lam * omega * np.exp(omega * pieces.log_l)))


# -----------------------------------------------------------------------------
# Hazard shape regions
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class HazardRegionReport:
    """
    Attributes:
        guaranteed: Shape guaranteed by the parameter region, or None outside
            every guaranteed region.
        observed: Shape seen on the scan grid (None for a shape with more than
            one turning point).
        confirmed: Whether the scan agrees with the guarantee; None when
            nothing is guaranteed.
    """
    guaranteed: Optional[HazardShape]
    observed: Optional[HazardShape]
    confirmed: Optional[bool]


def guaranteed_conditional_shape(model: BivariateModel, conditioning: Conditioning) -> Optional[HazardShape]:
    """
    Monotonicity of h(t1 | T2 >= t2) or h(t1 | T2 = t2) that holds for every t2:

      - increasing (T2 >= t2 only) when gamma1 >= 1 and gamma1 tau1 >= 1;
      - decreasing when gamma1 <= 1 and, for PGW, gamma1 tau1 <= omega, or,
        for APGW, gamma1 <= omega / (1 - omega + tau1).
    """
    gamma = float(model.marginal1.gamma)
    tau = model.marginal1.tau
    omega = float(model.omega)

    if conditioning == "ge" and gamma >= 1.0 and gamma * tau >= 1.0:
        return HazardShape.INCREASING
    if gamma <= 1.0:
        if model.family is MarginalFamily.PGW:
            if gamma * tau <= omega:
                return HazardShape.DECREASING
        else:
            denominator = 1.0 - omega + tau
            if 0 < denominator < math.inf and gamma <= omega / denominator:
                return HazardShape.DECREASING
    return None


def hazard_shape_region_check(
    model: BivariateModel,
    which: int = 1,
    conditioning: Conditioning = "ge",
    t_other: float = 1.0,
    grid: np.ndarray = SCAN_GRID,
) -> HazardRegionReport:
    """
    Scan a conditional hazard of margin `which` over `grid` with the other
    time fixed at `t_other`, and compare the observed shape with the
    guaranteed one.
    """
    if which not in (1, 2):
        raise DomainError(f"which must be 1 or 2, got {which!r}")
    if conditioning not in ("ge", "eq"):
        raise DomainError(f"conditioning must be 'ge' or 'eq', got {conditioning!r}")
    oriented = model if which == 1 else model.swapped()

    hazard = cond_hazard_ge if conditioning == "ge" else cond_hazard_eq
    log_hazard = np.log(np.asarray(hazard(grid, np.full_like(grid, t_other), oriented)))
    observed = hazard_shape_from_scan(log_hazard)
    guaranteed = guaranteed_conditional_shape(oriented, conditioning)

    confirmed: Optional[bool] = None
    if guaranteed is not None:
        confirmed = observed in (guaranteed, HazardShape.CONSTANT)
        if not confirmed:
            logger.warning(
                "Conditional hazard (%s) of margin %d expected %s but scanned %s",
                conditioning, which, guaranteed.value, observed.value if observed else "irregular",
            )
    return HazardRegionReport(guaranteed=guaranteed, observed=observed, confirmed=confirmed)
