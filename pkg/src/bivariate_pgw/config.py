"""
Run configuration: fit options, environment defaults and named model presets.
"""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError

from bivariate_pgw.errors import InputError
from bivariate_pgw.models_schema import CovariateTerm, ModelSpec
from bivariate_pgw.numerics import QuadratureSpec

logger = logging.getLogger(__name__)

THREADS_ENV = "BIVARIATE_PGW_THREADS"
LOG_LEVEL_ENV = "BIVARIATE_PGW_LOG_LEVEL"

DEFAULT_QUADRATURE = QuadratureSpec()


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r: not an integer", THREADS_ENV, raw)
        return 1
    return max(value, 1)


def default_log_level() -> str:
    return os.environ.get(LOG_LEVEL_ENV, "INFO").strip().upper() or "INFO"


class FitOptions(BaseModel):
    starts: int = Field(default=5, ge=1, description="Number of optimisation starts.")
    max_iter: int = Field(default=500, ge=1, description="Quasi-Newton iteration cap per start.")
    grad_tol: float = Field(default=1e-4, gt=0, description="Gradient max-norm required on the unconstrained scale.")
    seed: Optional[int] = Field(default=None, description="Seed for the jittered starts.")
    threads: int = Field(default_factory=default_threads, ge=1, description="Starts run concurrently on this many threads.")
    jitter: float = Field(default=0.5, ge=0, description="Standard deviation of the start jitter.")


# -----------------------------------------------------------------------------
# Presets
# -----------------------------------------------------------------------------

def _spec(name: str, constraints: List[str], terms: Optional[List[tuple]] = None) -> ModelSpec:
    return ModelSpec(
        name=name,
        constraints=constraints,
        covariate_terms=[CovariateTerm(target=target, covariate=covariate) for target, covariate in terms or []],
    )


_DIABETES_INTERACTION = [("phi1", "D"), ("phi2", "D")]

MODEL_PRESETS: Dict[str, ModelSpec] = {
    "model1": _spec("Model 1", []),
    "model2": _spec("Model 2", ["common_phi"]),
    "model3": _spec("Model 3", ["common_gamma"]),
    "model4": _spec("Model 4", ["common_tau"]),
    "model5": _spec("Model 5", ["common_phi", "common_gamma"]),
    "model6": _spec("Model 6", ["common_phi", "common_tau"]),
    "model7": _spec("Model 7", ["common_gamma", "common_tau"]),
    "model8": _spec("Model 8", ["common_phi", "common_gamma", "common_tau"]),
    "model7a": _spec("Model 7(a)", ["common_gamma", "common_tau"], [("gamma", "D"), *_DIABETES_INTERACTION]),
    "model7b": _spec("Model 7(b)", ["common_gamma", "common_tau"], _DIABETES_INTERACTION),
    "model7c": _spec("Model 7(c)", ["common_gamma", "common_tau"], [("gamma", "D"), ("phi", "D")]),
    "model7d": _spec("Model 7(d)", ["common_gamma", "common_tau"], [("phi", "D")]),
    "model7b_copula": _spec(
        "Model 7(b), covariate copula",
        ["common_gamma", "common_tau"],
        [("lambda", "D"), ("omega", "D"), *_DIABETES_INTERACTION],
    ),
}

TREATMENT_MODELS = [f"model{i}" for i in range(1, 9)]
DIABETES_MODELS = ["model7a", "model7b", "model7c", "model7d"]


def load_model_spec(source: Union[str, Path]) -> ModelSpec:
    """
    Resolve a preset name (e.g. "model7") or read a ModelSpec JSON document.

    Raises:
        InputError: if the file is missing or does not validate.
    """
    key = str(source)
    if key in MODEL_PRESETS:
        return MODEL_PRESETS[key]
    path = Path(source)
    if not path.exists():
        raise InputError(f"{key!r} is neither a preset ({', '.join(MODEL_PRESETS)}) nor a file")
    try:
        spec = ModelSpec.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc.msg}", line=exc.lineno) from exc
    except ValidationError as exc:
        raise InputError(f"{path}: {exc}") from exc
    return spec
