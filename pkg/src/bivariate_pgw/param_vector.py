"""
Mapping between a ModelSpec's unconstrained parameter vector and the natural
parameters of a BivariateModel.

Base slots use the links

    lambda = exp(theta_lambda)         omega = expit(theta_omega)
    gamma_j = exp(theta_gamma_j)       phi_j = exp(theta_phi_j)
    tau_j = exp(theta_tau_j) - 1

and covariate coefficients add linearly to the unconstrained base value.
Slots are ordered lambda, omega, gamma(s), tau(s), phi(s); a coefficient slot,
named "<target>.<covariate>", follows the slot(s) it modifies.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import special

from bivariate_pgw.bivariate import BivariateModel
from bivariate_pgw.errors import DomainError
from bivariate_pgw.model_spec_validator import ModelSpecValidator
from bivariate_pgw.models_schema import ModelSpec
from bivariate_pgw.univariate import ApgwParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class Link(str, Enum):
    LOG = "log"
    LOGIT = "logit"
    LOG_SHIFTED = "log1p"
    IDENTITY = "identity"

    def to_natural(self, theta: ArrayLike) -> ArrayLike:
        if self is Link.LOG:
            return np.exp(theta)
        if self is Link.LOGIT:
            return special.expit(theta)
        if self is Link.LOG_SHIFTED:
            return np.expm1(theta)
        return theta

    def to_unconstrained(self, value: ArrayLike) -> ArrayLike:
        if self is Link.LOG:
            return np.log(value)
        if self is Link.LOGIT:
            return special.logit(value)
        if self is Link.LOG_SHIFTED:
            return np.log1p(value)
        return value


_BASE_LINKS: Dict[str, Link] = {
    "lambda": Link.LOG,
    "omega": Link.LOGIT,
    "gamma": Link.LOG,
    "tau": Link.LOG_SHIFTED,
    "phi": Link.LOG,
}


@dataclass(frozen=True)
class Slot:
    name: str
    link: Link
    is_coefficient: bool = False
    covariate: Optional[str] = None


@dataclass(frozen=True)
class RecordParameters:
    """Natural parameters, per record where covariates make them vary."""
    lam: ArrayLike
    omega: ArrayLike
    gamma1: ArrayLike
    gamma2: ArrayLike
    tau1: float
    tau2: float
    phi1: ArrayLike
    phi2: ArrayLike


def _kind(name: str) -> str:
    return name.rstrip("12")


class ParamLayout:
    """
    Slot layout of a ModelSpec.

    - Validates the model specification (and covariate availability when names are given).
    - Names every slot of the unconstrained vector in a fixed order.
    - Maps an unconstrained vector plus covariates to natural parameters.
    """

    def __init__(self, spec: ModelSpec, covariate_names: Optional[Sequence[str]] = None) -> None:
        if not ModelSpecValidator().validate(spec, covariate_names):
            raise DomainError(f"model specification {spec.name!r} is not valid; see the log for the reason")
        self.spec = spec
        self.slots: List[Slot] = self._build_slots(spec)
        self._index = {slot.name: i for i, slot in enumerate(self.slots)}

    # -------------------------------------------------------------------------
    # Layout
    # -------------------------------------------------------------------------

    @staticmethod
    def _build_slots(spec: ModelSpec) -> List[Slot]:
        blocks: List[List[str]] = [["lambda"], ["omega"]]
        blocks.append(["gamma"] if spec.has("common_gamma") else ["gamma1", "gamma2"])
        if spec.fixed_tau is None:
            blocks.append(["tau"] if spec.has("common_tau") else ["tau1", "tau2"])
        blocks.append(["phi"] if spec.has("common_phi") else ["phi1", "phi2"])

        def coefficients(target: str) -> List[Slot]:
            return [
                Slot(name=term.slot_name, link=Link.IDENTITY, is_coefficient=True, covariate=term.covariate)
                for term in spec.covariate_terms
                if term.target == target
            ]

        slots: List[Slot] = []
        for block in blocks:
            for name in block:
                slots.append(Slot(name=name, link=_BASE_LINKS[_kind(name)]))
                slots.extend(coefficients(name))
            if len(block) == 2:
                slots.extend(coefficients(_kind(block[0])))
        return slots

    @property
    def names(self) -> List[str]:
        return [slot.name for slot in self.slots]

    @property
    def dimension(self) -> int:
        return len(self.slots)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DomainError(f"no slot named {name!r}; slots are {self.names}") from None

    def link(self, name: str) -> Link:
        return self.slots[self.index(name)].link

    # -------------------------------------------------------------------------
    # Evaluation
    # -------------------------------------------------------------------------

    def _check_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dimension,):
            raise DomainError(f"expected a parameter vector of length {self.dimension}, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise DomainError(f"parameter vector has non-finite entries: {theta}")
        return theta

    def _predictor(
        self,
        theta: np.ndarray,
        base: str,
        targets: Sequence[str],
        covariates: Mapping[str, ArrayLike],
    ) -> ArrayLike:
        value: ArrayLike = theta[self._index[base]]
        for slot_index, slot in enumerate(self.slots):
            if slot.is_coefficient and slot.name.split(".", 1)[0] in targets:
                value = value + theta[slot_index] * np.asarray(covariates[slot.covariate], dtype=float)
        return value

    def _margin_base(self, kind: str, margin: int) -> str:
        return kind if kind in self._index else f"{kind}{margin}"

    def _tau(self, theta: np.ndarray, margin: int) -> float:
        if self.spec.fixed_tau is not None:
            return float(self.spec.fixed_tau)
        return float(np.expm1(theta[self._index[self._margin_base("tau", margin)]]))

    def natural_parameters(
        self,
        theta: np.ndarray,
        covariates: Optional[Mapping[str, ArrayLike]] = None,
    ) -> RecordParameters:
        """
        Natural parameters for the given covariate values (arrays give one
        value per record; scalars give a single covariate level).
        """
        theta = self._check_theta(theta)
        covariates = covariates or {}
        missing = [name for name in self.spec.covariates if name not in covariates]
        if missing:
            raise DomainError(f"covariate values missing for {missing}")

        def margin_value(kind: str, margin: int) -> ArrayLike:
            base = self._margin_base(kind, margin)
            return np.exp(self._predictor(theta, base, (f"{kind}{margin}", kind), covariates))

        return RecordParameters(
            lam=np.exp(self._predictor(theta, "lambda", ("lambda",), covariates)),
            omega=special.expit(self._predictor(theta, "omega", ("omega",), covariates)),
            gamma1=margin_value("gamma", 1),
            gamma2=margin_value("gamma", 2),
            tau1=self._tau(theta, 1),
            tau2=self._tau(theta, 2),
            phi1=margin_value("phi", 1),
            phi2=margin_value("phi", 2),
        )

    def model(self, theta: np.ndarray, covariates: Optional[Mapping[str, ArrayLike]] = None) -> BivariateModel:
        """The BivariateModel at theta; raises DomainError if a parameter leaves its domain."""
        p = self.natural_parameters(theta, covariates)
        return BivariateModel(
            lam=p.lam,
            omega=p.omega,
            marginal1=ApgwParams(gamma=p.gamma1, tau=p.tau1, lam=p.lam, phi=p.phi1),
            marginal2=ApgwParams(gamma=p.gamma2, tau=p.tau2, lam=p.lam, phi=p.phi2),
            family=self.spec.family,
        )

    def named(self, theta: np.ndarray) -> Dict[str, float]:
        theta = np.asarray(theta, dtype=float)
        return {name: float(value) for name, value in zip(self.names, theta)}

    def natural_named(self, theta: np.ndarray) -> Dict[str, float]:
        """Base slots through their links and coefficients as they are; a fixed tau is included."""
        theta = self._check_theta(theta)
        values: Dict[str, float] = {}
        for slot, value in zip(self.slots, theta):
            values[slot.name] = float(slot.link.to_natural(value))
        if self.spec.fixed_tau is not None:
            values["tau"] = float(self.spec.fixed_tau)
        return values

    def pack(self, values: Mapping[str, float], natural: bool = True) -> np.ndarray:
        """Unconstrained vector from named values; missing coefficient slots default to 0."""
        theta = np.zeros(self.dimension)
        for i, slot in enumerate(self.slots):
            if slot.name not in values:
                if slot.is_coefficient:
                    continue
                raise DomainError(f"no value given for slot {slot.name!r}")
            value = values[slot.name]
            theta[i] = slot.link.to_unconstrained(value) if natural else value
        if not np.all(np.isfinite(theta)):
            raise DomainError(f"values {dict(values)} map outside the unconstrained space")
        return theta

    def describe(self) -> str:
        terms = ", ".join(self.names)
        tau = "" if self.spec.fixed_tau is None else f", tau fixed at {self.spec.fixed_tau:g}"
        return f"{self.spec.name or 'model'} [{self.dimension} parameters: {terms}{tau}]"


def common_tau_value(layout: ParamLayout, theta: np.ndarray) -> float:
    """The common tau at theta, fixed or estimated."""
    if layout.spec.fixed_tau is not None:
        return float(layout.spec.fixed_tau)
    if "tau" not in layout.names:
        raise DomainError("the model has no common tau")
    return float(math.expm1(theta[layout.index("tau")]))
