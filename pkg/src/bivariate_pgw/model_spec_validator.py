from __future__ import annotations

import logging
import math
from typing import Iterable, Optional, Set

from bivariate_pgw.models_schema import CovariateTerm, ModelSpec
from bivariate_pgw.univariate import MarginalFamily

logger = logging.getLogger(__name__)


class ModelSpecValidator:
    """
    Validates a ModelSpec.

    This class checks structural correctness of a ModelSpec, including:

    - Constraints are not repeated.
    - Every covariate term targets a parameter that exists once the constraints
      are applied (a per-margin target needs the parameter to be unconstrained).
    - No (target, covariate) pair appears twice.
    - A fixed tau is only used with a common tau and lies in the family's range.
    - Covariates named by the terms exist in the data, when column names are given.
    """

    def validate(self, spec: ModelSpec, available_covariates: Optional[Iterable[str]] = None) -> bool:
        """
        Validate the given ModelSpec.

        Args:
            spec: The ModelSpec instance to validate.
            available_covariates: Covariate names present in the data, or None
                to skip the existence check.

        Returns:
            bool: True if the ModelSpec is considered valid, False otherwise.
        """
        if len(set(spec.constraints)) != len(spec.constraints):
            logger.warning("ModelSpec validation failed: repeated constraint in %s", spec.constraints)
            return False

        # 1. Every target must exist after the constraints are applied
        if not self._targets_exist(spec):
            logger.warning(
                "ModelSpec validation failed: a covariate term targets a parameter "
                "removed by the constraints"
            )
            return False

        # 2. Terms must be distinct
        if not self._terms_are_distinct(spec.covariate_terms):
            logger.warning("ModelSpec validation failed: duplicate covariate term")
            return False

        # 3. Fixed tau must fit the structure and the family
        if not self._fixed_tau_is_valid(spec):
            logger.warning("ModelSpec validation failed: invalid fixed tau %r", spec.fixed_tau)
            return False

        # 4. Covariates must be present in the data
        if available_covariates is not None:
            missing = sorted(set(spec.covariates) - set(available_covariates))
            if missing:
                logger.warning("ModelSpec validation failed: covariates %s not found in the data", missing)
                return False

        return True

    # -------------------------------------------------------------------------
    # Helper methods
    # -------------------------------------------------------------------------

    def _targets_exist(self, spec: ModelSpec) -> bool:
        """
        Per-margin targets (gamma1, phi2, ...) need the parameter unconstrained.
        Shared targets (gamma, phi) are valid either way.
        """
        for term in spec.covariate_terms:
            if not term.covariate.strip():
                logger.debug("Covariate term for target '%s' has an empty covariate name", term.target)
                return False
            if term.target in ("gamma1", "gamma2") and spec.has("common_gamma"):
                logger.debug("Target '%s' is not available with common_gamma", term.target)
                return False
            if term.target in ("phi1", "phi2") and spec.has("common_phi"):
                logger.debug("Target '%s' is not available with common_phi", term.target)
                return False
        return True

    def _terms_are_distinct(self, terms: Iterable[CovariateTerm]) -> bool:
        seen: Set[str] = set()
        for term in terms:
            if term.slot_name in seen:
                logger.debug("Covariate term '%s' appears more than once", term.slot_name)
                return False
            seen.add(term.slot_name)
        return True

    def _fixed_tau_is_valid(self, spec: ModelSpec) -> bool:
        tau = spec.fixed_tau
        if tau is None:
            return True
        if not spec.has("common_tau"):
            logger.debug("fixed_tau needs the common_tau constraint")
            return False
        if math.isnan(tau) or tau <= -1.0:
            logger.debug("fixed_tau must be > -1, got %r", tau)
            return False
        if spec.family is MarginalFamily.PGW and not (0 < tau < math.inf):
            logger.debug("fixed_tau for the PGW family must lie in (0, inf), got %r", tau)
            return False
        return True
