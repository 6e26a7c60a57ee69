from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize, special

from bivariate_pgw.errors import DomainError
from bivariate_pgw.likelihood import univariate_log_likelihood
from bivariate_pgw.paired_io import PairedData
from bivariate_pgw.param_vector import ParamLayout
from bivariate_pgw.univariate import ApgwParams, MarginalFamily

logger = logging.getLogger(__name__)

OMEGA_START = 0.9
_PENALTY = 1e10


class StartValueBuilder(ABC):
    """
    Abstraction for producing the starting vectors of a multi-start fit.

    This interface exists so that the initialisation strategy can be swapped
    (for example to reuse a previous fit) without changing the fitting code.
    """

    @abstractmethod
    def build(self, layout: ParamLayout, data: PairedData, rng: np.random.Generator) -> List[np.ndarray]:
        """
        Create the starting vectors on the unconstrained scale.

        Returns:
            List[np.ndarray]: At least one vector of length layout.dimension.
        """
        raise NotImplementedError


def fit_margin(
    times: np.ndarray,
    events: np.ndarray,
    family: MarginalFamily = MarginalFamily.APGW,
    fixed_tau: Optional[float] = None,
) -> Tuple[float, float, float]:
    """
    Univariate censored fit of (gamma, tau, phi) with lambda = 1.

    Returns:
        (gamma, tau, phi) on the natural scale.
    """
    scale_guess = 1.0 / float(np.mean(times))

    def unpack(x: np.ndarray) -> Tuple[float, float, float]:
        tau = fixed_tau if fixed_tau is not None else math.expm1(x[1])
        return math.exp(x[0]), tau, math.exp(x[-1])

    def objective(x: np.ndarray) -> float:
        try:
            gamma, tau, phi = unpack(x)
            value = univariate_log_likelihood(times, events, ApgwParams(gamma=gamma, tau=tau, phi=phi), family)
        except (DomainError, OverflowError):
            return _PENALTY
        return -value if math.isfinite(value) else _PENALTY

    x0 = [0.0, math.log(scale_guess)] if fixed_tau is not None else [0.0, math.log(2.0), math.log(scale_guess)]
    result = optimize.minimize(objective, np.asarray(x0), method="BFGS")
    gamma, tau, phi = unpack(result.x)
    logger.debug("Marginal start: gamma=%.4g tau=%.4g phi=%.4g (%s)", gamma, tau, phi, result.message)
    return gamma, tau, phi


class DefaultStartValueBuilder(StartValueBuilder):
    """
    Default implementation of StartValueBuilder.

    - One start from separate univariate APGW fits of the two margins with
      lambda = 1 and omega = 0.9; common parameters take the average of the
      two margins on the unconstrained scale; covariate coefficients start at 0.
    - The remaining starts add N(0, jitter^2) noise to every slot.
    """

    def __init__(self, starts: int = 5, jitter: float = 0.5) -> None:
        if starts < 1:
            raise DomainError(f"at least one start is needed, got {starts}")
        self._starts = starts
        self._jitter = jitter

    def base_start(self, layout: ParamLayout, data: PairedData) -> np.ndarray:
        spec = layout.spec
        fixed_tau = spec.fixed_tau
        margins = [
            fit_margin(data.t1, data.d1, spec.family, fixed_tau),
            fit_margin(data.t2, data.d2, spec.family, fixed_tau),
        ]
        per_margin: Dict[str, List[float]] = {
            "gamma": [math.log(m[0]) for m in margins],
            "tau": [math.log1p(m[1]) if m[1] != math.inf else 0.0 for m in margins],
            "phi": [math.log(m[2]) for m in margins],
        }
        theta_values: Dict[str, float] = {
            "lambda": 0.0,
            "omega": float(special.logit(OMEGA_START)),
        }
        for kind, values in per_margin.items():
            theta_values[kind] = float(np.mean(values))
            theta_values[f"{kind}1"], theta_values[f"{kind}2"] = values
        if spec.family is MarginalFamily.PGW:
            # keep tau strictly positive
            for key in ("tau", "tau1", "tau2"):
                theta_values[key] = max(theta_values[key], math.log1p(0.05))
        return layout.pack({name: theta_values[name] for name in layout.names if name in theta_values}, natural=False)

    def build(self, layout: ParamLayout, data: PairedData, rng: np.random.Generator) -> List[np.ndarray]:
        base = self.base_start(layout, data)
        starts = [base]
        for _ in range(self._starts - 1):
            starts.append(base + rng.normal(0.0, self._jitter, size=base.size))
        return starts
