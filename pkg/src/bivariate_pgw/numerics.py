"""
Shared numerical kernels: the upper incomplete gamma function for any real
shape, one- and two-dimensional quadrature, and central-difference gradients
and Hessians.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from bivariate_pgw.errors import ConvergenceError, DomainError, EvaluationError

logger = logging.getLogger(__name__)

# Above this argument the downward recurrence loses too many digits to
# cancellation and the scaled quadrature is used instead.
_RECURRENCE_MAX_Z = 30.0
_NEAR_INTEGER = 1e-6
# Rows of the tensor grid evaluated per call of the integrand.
_ROW_CHUNK = 256


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Settings for the quadrature helpers.

    Attributes:
        node_count: Gauss-Legendre nodes per axis for the first pass of
            `integrate_2d`; doubled until successive estimates agree.
        relative_tolerance: Relative agreement required between passes.
        absolute_tolerance: Absolute floor added to the relative criterion.
        max_node_count: Node count after which `integrate_2d` gives up.
    """
    node_count: int = 64
    relative_tolerance: float = 1e-6
    absolute_tolerance: float = 1e-12
    max_node_count: int = 4096

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise DomainError(f"node_count must be at least 2, got {self.node_count}")
        if self.max_node_count < self.node_count:
            raise DomainError(
                f"max_node_count ({self.max_node_count}) is below node_count ({self.node_count})"
            )
        for name in ("relative_tolerance", "absolute_tolerance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and positive, got {value!r}")


@dataclass(frozen=True)
class StepRule:
    """Central-difference step h_i = max(absolute, relative * |x_i|)."""
    absolute: float = 1e-5
    relative: float = 1e-7

    def steps(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(self.absolute, self.relative * np.abs(x))


# -----------------------------------------------------------------------------
# Incomplete gamma
# -----------------------------------------------------------------------------

def _check_incomplete_gamma_args(a: float, z: float) -> None:
    if not (math.isfinite(a) and math.isfinite(z)):
        raise DomainError(f"incomplete gamma needs finite arguments, got a={a!r}, z={z!r}")
    if z <= 0:
        raise DomainError(f"incomplete gamma needs z > 0, got z={z!r}")


def _log_scaled_by_quadrature(a: float, z: float) -> float:
    """
    log of e^z Gamma(a, z) = log of the integral over y in (0, inf) of
    (z + y)^(a-1) e^(-y).
    """
    if z >= 1.0:
        # Factor out z^(a-1) so large arguments cannot overflow.
        value, _ = integrate.quad(
            lambda y: math.exp((a - 1.0) * math.log1p(y / z) - y),
            0.0,
            np.inf,
            epsabs=0.0,
            epsrel=1e-13,
            limit=200,
        )
        return (a - 1.0) * math.log(z) + math.log(value)

    # Small z: the integrand is sharply peaked at y=0 on the scale z.
    breakpoints = [z * 10.0**k for k in range(int(math.ceil(-math.log10(z))) + 1)]
    breakpoints = [b for b in breakpoints if b < 1.0]

    def integrand(y: float) -> float:
        return math.exp((a - 1.0) * math.log(z + y) - y)

    head, _ = integrate.quad(
        integrand, 0.0, 1.0, points=breakpoints or None, epsabs=0.0, epsrel=1e-13, limit=200
    )
    tail, _ = integrate.quad(integrand, 1.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.log(head + tail)


def log_scaled_upper_incomplete_gamma(a: float, z: float) -> float:
    """
    Return log{e^z Gamma(a, z)} for real a and z > 0.

    The scaling keeps the value representable when z is large, which is what
    Kendall's tau needs for large lambda.
    """
    _check_incomplete_gamma_args(a, z)

    if z > _RECURRENCE_MAX_Z:
        return _log_scaled_by_quadrature(a, z)

    if a > 0:
        upper = special.gammaincc(a, z)
        if upper > 0:
            return math.log(upper) + special.gammaln(a) + z
        return _log_scaled_by_quadrature(a, z)

    nearest = round(a)
    if abs(a - nearest) < _NEAR_INTEGER:
        if a == nearest:
            # Gamma(-n, z) = z^(-n) E_{n+1}(z)
            n = -int(nearest)
            return -n * math.log(z) + math.log(special.expn(n + 1, z)) + z
        return _log_scaled_by_quadrature(a, z)

    # Downward recurrence Gamma(a, z) = {Gamma(a+1, z) - z^a e^(-z)} / a, in
    # the scaled form G(a) = {G(a+1) - z^a} / a, started from a shape in (1, 2].
    shift = int(math.floor(1.0 - a)) + 1
    start = a + shift
    scaled = math.exp(math.log(special.gammaincc(start, z)) + special.gammaln(start) + z)
    for step in range(shift):
        shape = start - 1.0 - step
        scaled = (scaled - z**shape) / shape

    if not (math.isfinite(scaled) and scaled > 0):
        logger.debug("Recurrence failed for a=%r, z=%r; using quadrature", a, z)
        return _log_scaled_by_quadrature(a, z)
    return math.log(scaled)


def upper_incomplete_gamma(a: float, z: float) -> float:
    """
    Upper incomplete gamma function Gamma(a, z) = integral from z to infinity
    of x^(a-1) e^(-x), for any real shape a and z > 0.

    Args:
        a: Shape; may be zero or negative.
        z: Lower limit of integration, strictly positive.

    Returns:
        Gamma(a, z).

    Raises:
        DomainError: if z <= 0 or either argument is not finite.
    """
    return math.exp(log_scaled_upper_incomplete_gamma(a, z) - z)


def upper_incomplete_gamma_by_quadrature(a: float, z: float) -> float:
    """Gamma(a, z) by adaptive quadrature alone; the reference for the fast path."""
    _check_incomplete_gamma_args(a, z)
    return math.exp(_log_scaled_by_quadrature(a, z) - z)


# -----------------------------------------------------------------------------
# Quadrature
# -----------------------------------------------------------------------------

def _tensor_gauss_legendre(f: Callable[[np.ndarray, np.ndarray], np.ndarray], n: int) -> float:
    nodes, weights = leggauss(n)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights

    total = 0.0
    for start in range(0, n, _ROW_CHUNK):
        u = nodes[start:start + _ROW_CHUNK, None]
        values = np.asarray(f(u, nodes[None, :]), dtype=float)
        values = np.broadcast_to(values, (u.shape[0], n))
        total += float(weights[start:start + _ROW_CHUNK] @ values @ weights)
    return total


def integrate_2d(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    spec: QuadratureSpec = QuadratureSpec(),
) -> float:
    """
    Integrate a bounded function over the unit square.

    `f` must accept broadcastable arrays (u of shape (m, 1), v of shape (1, n)).
    A tensor Gauss-Legendre rule is applied with the node count doubled until
    two successive estimates agree to `spec.relative_tolerance`.

    Raises:
        ConvergenceError: if the node cap is reached first; carries the last estimate.
    """
    n = spec.node_count
    previous = _tensor_gauss_legendre(f, n)
    while 2 * n <= spec.max_node_count:
        n *= 2
        estimate = _tensor_gauss_legendre(f, n)
        if abs(estimate - previous) <= spec.relative_tolerance * abs(estimate) + spec.absolute_tolerance:
            logger.debug("integrate_2d converged with %d nodes per axis", n)
            return estimate
        previous = estimate
    raise ConvergenceError(
        f"integrate_2d did not converge within {spec.max_node_count} nodes per axis",
        estimate=previous,
    )


def integrate_half_line(
    f: Callable[[float], float],
    spec: QuadratureSpec = QuadratureSpec(),
) -> float:
    """Adaptive quadrature of f over [0, inf)."""
    value, abserr, info, *rest = integrate.quad(
        f,
        0.0,
        np.inf,
        epsabs=spec.absolute_tolerance,
        epsrel=spec.relative_tolerance,
        limit=500,
        full_output=1,
    )
    if rest:
        # quad appends its warning message only when ier > 0
        raise ConvergenceError(f"integrate_half_line: {rest[0]}", estimate=value)
    return value


# -----------------------------------------------------------------------------
# Finite differences
# -----------------------------------------------------------------------------

def _finite_value(f: Callable[[np.ndarray], float], x: np.ndarray, coordinate: int | None) -> float:
    value = float(f(x))
    if not math.isfinite(value):
        where = "at the base point" if coordinate is None else f"perturbing coordinate {coordinate}"
        raise EvaluationError(f"function is not finite {where}: {value!r}", coordinate=coordinate)
    return value


def numeric_gradient(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    h_rule: StepRule = StepRule(),
) -> np.ndarray:
    """
    Central-difference gradient of a scalar function.

    Raises:
        EvaluationError: naming the coordinate whose perturbation was not finite.
    """
    x = np.asarray(x, dtype=float)
    steps = h_rule.steps(x)
    gradient = np.empty_like(x)
    for i in range(x.size):
        shift = np.zeros_like(x)
        shift[i] = steps[i]
        forward = _finite_value(f, x + shift, i)
        backward = _finite_value(f, x - shift, i)
        gradient[i] = (forward - backward) / (2.0 * steps[i])
    return gradient


def numeric_hessian(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    h_rule: StepRule = StepRule(),
) -> np.ndarray:
    """Central-difference Hessian, symmetrised as (H + H^T) / 2."""
    x = np.asarray(x, dtype=float)
    n = x.size
    steps = h_rule.steps(x)
    centre = _finite_value(f, x, None)
    hessian = np.empty((n, n))

    def unit(i: int) -> np.ndarray:
        e = np.zeros(n)
        e[i] = steps[i]
        return e

    for i in range(n):
        ei = unit(i)
        forward = _finite_value(f, x + ei, i)
        backward = _finite_value(f, x - ei, i)
        hessian[i, i] = (forward - 2.0 * centre + backward) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = unit(j)
            pp = _finite_value(f, x + ei + ej, i)
            pm = _finite_value(f, x + ei - ej, i)
            mp = _finite_value(f, x - ei + ej, j)
            mm = _finite_value(f, x - ei - ej, j)
            hessian[i, j] = hessian[j, i] = (pp - pm - mp + mm) / (4.0 * steps[i] * steps[j])

    return 0.5 * (hessian + hessian.T)
