from __future__ import annotations

import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from bivariate_pgw.univariate import MarginalFamily

Constraint = Literal["common_phi", "common_gamma", "common_tau"]

# "gamma" and "phi" attach one coefficient shared by both margins; the numbered
# targets attach a coefficient to a single margin and need that parameter to be
# unconstrained.
CovariateTarget = Literal["lambda", "omega", "gamma", "gamma1", "gamma2", "phi", "phi1", "phi2"]

Layout = Literal["wide", "long"]


class CovariateTerm(BaseModel):
    target: CovariateTarget = Field(
        ...,
        description="Unconstrained parameter whose linear predictor gains the covariate.",
    )
    covariate: str = Field(
        ...,
        description="Name of the covariate column. Must exist in the data.",
    )

    @property
    def slot_name(self) -> str:
        return f"{self.target}.{self.covariate}"


class ModelSpec(BaseModel):
    """
    Constraint and covariate structure of a bivariate APGW/PGW model.

    The reference model (no constraints, no covariate terms) has eight
    parameters: lambda, omega, and (gamma, tau, phi) for each margin.
    """
    model_config = ConfigDict(ser_json_inf_nan="strings")

    name: str = Field(
        default="",
        description="Label used in comparison tables and reports.",
    )
    constraints: List[Constraint] = Field(
        default_factory=list,
        description="Parameters constrained to be equal across the two margins.",
    )
    covariate_terms: List[CovariateTerm] = Field(
        default_factory=list,
        description="Covariate effects, each adding one coefficient to the parameter vector.",
    )
    family: MarginalFamily = Field(
        default=MarginalFamily.APGW,
        description="Marginal family. PGW needs 0 < tau < inf.",
    )
    fixed_tau: Optional[float] = Field(
        default=None,
        description="Hold the common tau at this value (may be +inf) instead of estimating it. Used for profiling.",
    )

    def has(self, constraint: Constraint) -> bool:
        return constraint in self.constraints

    @property
    def covariates(self) -> List[str]:
        """Distinct covariate names in first-use order."""
        names: List[str] = []
        for term in self.covariate_terms:
            if term.covariate not in names:
                names.append(term.covariate)
        return names

    def with_fixed_tau(self, tau: float) -> "ModelSpec":
        label = "inf" if tau == math.inf else f"{tau:g}"
        return self.model_copy(update={"fixed_tau": tau, "name": f"{self.name} (tau={label})".strip()})


class CovariateColumn(BaseModel):
    source: str = Field(..., description="Column name in the input file.")
    name: str = Field(..., description="Covariate name used by model specifications.")
    levels: Dict[str, float] = Field(
        default_factory=dict,
        description="Mapping from raw text values to numbers. Empty means the column is already numeric.",
    )


class ColumnMap(BaseModel):
    """Where the paired-data fields live in a CSV file."""
    id: str = Field(default="id", description="Subject identifier column.")
    t1: str = Field(default="t1", description="Wide layout: time of member 1.")
    d1: str = Field(default="d1", description="Wide layout: event flag of member 1.")
    t2: str = Field(default="t2", description="Wide layout: time of member 2.")
    d2: str = Field(default="d2", description="Wide layout: event flag of member 2.")
    role: str = Field(default="role", description="Long layout: column telling the two members apart.")
    time: str = Field(default="time", description="Long layout: observed time.")
    status: str = Field(default="status", description="Long layout: event flag.")
    role_values: Dict[str, int] = Field(
        default_factory=lambda: {"1": 1, "2": 2},
        description="Long layout: raw role value -> member index (1 or 2).",
    )
    covariates: Optional[List[CovariateColumn]] = Field(
        default=None,
        description="Covariate columns to keep. None keeps every other column as a numeric covariate.",
    )


class ConvergenceInfo(BaseModel):
    converged: bool
    gradient_max_norm: float
    iterations: int
    starts_attempted: int
    starts_succeeded: int
    sentinel_evaluations: int
    message: str = ""


class FitReport(BaseModel):
    """Serialized maximum-likelihood fit; field names are documented in docs/fit_report_schema.md."""
    model_config = ConfigDict(ser_json_inf_nan="strings")

    spec: ModelSpec
    n_subjects: int
    dimension: int
    theta_unconstrained: Dict[str, float]
    theta_natural: Dict[str, float]
    se: Dict[str, Optional[float]]
    covariance: Optional[List[List[float]]] = None
    covariance_flagged: bool = False
    loglik: float
    aic: float
    bic: float
    kendall_tau: float
    convergence: ConvergenceInfo


class ComparisonRow(BaseModel):
    name: str
    dimension: int
    loglik: float
    aic: float
    bic: float
    delta_aic: float
    delta_bic: float
    kendall_tau: float


class ProfileRow(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="strings")

    tau: float
    kendall_tau: Optional[float] = None
    loglik: Optional[float] = None
    chi2: Optional[float] = None
    failed: bool = False
    message: str = ""


class IntervalEstimate(BaseModel):
    estimate: float
    ci_lo: float
    ci_hi: float
    level: float = 0.95
    scale: str = Field(
        default="identity",
        description="Scale the Wald interval was built on: identity, log, logit, or the link of a parameter slot.",
    )
