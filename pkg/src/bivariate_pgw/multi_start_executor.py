from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import inflect
import numpy as np
from rich.progress import Progress
from scipy import optimize

from bivariate_pgw.errors import EvaluationError
from bivariate_pgw.numerics import StepRule, numeric_gradient, numeric_hessian

logger = logging.getLogger(__name__)
_inflect = inflect.engine()

# Objective values at or above this are sentinel evaluations.
SENTINEL_OBJECTIVE = 1e10
_NEWTON_STEPS = 20
_HALVINGS = 30


@dataclass(frozen=True)
class StartOutcome:
    """
    Immutable record of one optimisation start.

    Attributes:
        index: Position of the start in the list of starting vectors.
        theta: Final unconstrained parameter vector.
        objective: Final objective (negative log-likelihood).
        gradient_max_norm: Max-norm of the numeric gradient at theta.
        iterations: Quasi-Newton plus Newton iterations used.
        converged: True when the gradient criterion was met at a finite,
            sentinel-free point.
        message: Optimizer status text.
    """
    index: int
    theta: np.ndarray
    objective: float
    gradient_max_norm: float
    iterations: int
    converged: bool
    message: str

    def __post_init__(self) -> None:
        if self.theta.ndim != 1:
            raise ValueError(f"theta must be a vector, got shape {self.theta.shape}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")


class OptimizerRunner:
    """
    Runs a single start: BFGS with central-difference gradients, then Newton
    steps with a numeric Hessian and step halving while the gradient criterion
    is still unmet.
    """

    def __init__(
        self,
        objective: Callable[[np.ndarray], float],
        grad_tol: float = 1e-4,
        max_iter: int = 500,
        h_rule: StepRule = StepRule(),
    ) -> None:
        self._objective = objective
        self._grad_tol = grad_tol
        self._max_iter = max_iter
        self._h_rule = h_rule

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return numeric_gradient(self._objective, theta, self._h_rule)

    def run(self, index: int, theta0: np.ndarray) -> StartOutcome:
        """
        Minimise from theta0 and return a StartOutcome.

        Evaluation failures inside the gradient end the start with
        converged=False instead of raising.
        """
        try:
            result = optimize.minimize(
                self._objective,
                np.asarray(theta0, dtype=float),
                jac=self.gradient,
                method="BFGS",
                options={"maxiter": self._max_iter, "gtol": self._grad_tol, "norm": np.inf},
            )
            theta, value, iterations, message = result.x, float(result.fun), int(result.nit), str(result.message)
            gradient = self.gradient(theta)
            theta, value, gradient, polished = self._newton_polish(theta, value, gradient)
            iterations += polished
        except EvaluationError as exc:
            logger.warning("Start %d failed: %s", index, exc)
            return StartOutcome(
                index=index,
                theta=np.asarray(theta0, dtype=float),
                objective=float("inf"),
                gradient_max_norm=float("inf"),
                iterations=0,
                converged=False,
                message=str(exc),
            )

        grad_max = float(np.max(np.abs(gradient)))
        converged = bool(np.isfinite(value) and value < SENTINEL_OBJECTIVE and grad_max < self._grad_tol)
        if polished:
            message = f"{message}; {polished} Newton {_inflect.plural('step', polished)}"
        logger.info(
            "Start %d finished: objective %.6f, gradient max-norm %.2e, %s",
            index,
            value,
            grad_max,
            "converged" if converged else "not converged",
        )
        return StartOutcome(
            index=index,
            theta=theta,
            objective=value,
            gradient_max_norm=grad_max,
            iterations=iterations,
            converged=converged,
            message=message,
        )

    def _newton_polish(self, theta: np.ndarray, value: float, gradient: np.ndarray):
        steps = 0
        while steps < _NEWTON_STEPS and np.max(np.abs(gradient)) >= self._grad_tol and value < SENTINEL_OBJECTIVE:
            hessian = numeric_hessian(self._objective, theta, self._h_rule)
            try:
                direction = -np.linalg.solve(hessian, gradient)
            except np.linalg.LinAlgError:
                logger.debug("Newton polish stopped: singular Hessian")
                break
            if float(direction @ gradient) >= 0:
                # not a descent direction; fall back to steepest descent
                direction = -gradient
            scale = 1.0
            for _ in range(_HALVINGS):
                candidate = theta + scale * direction
                candidate_value = self._objective(candidate)
                if candidate_value < value:
                    break
                scale *= 0.5
            else:
                logger.debug("Newton polish stopped: no decrease after step halving")
                break
            theta, value = candidate, float(candidate_value)
            gradient = self.gradient(theta)
            steps += 1
        return theta, value, gradient, steps


class MultiStartExecutor:
    """
    Executes an OptimizerRunner from every starting vector.

    - Starts run one after another, or on a thread pool when threads > 1.
    - Progress is shown with a Rich progress bar.
    - Outcomes are returned in start order whatever order they finish in.
    """

    def __init__(self, runner: OptimizerRunner, threads: int = 1) -> None:
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        self._runner = runner
        self._threads = threads
        self.results: Dict[int, StartOutcome] = {}

    def execute(self, starts: Sequence[np.ndarray], description: str = "Fitting") -> List[StartOutcome]:
        self.results = {}
        with Progress(transient=True) as progress:
            task_progress = progress.add_task(
                f"[green]{description} ({len(starts)} {_inflect.plural('start', len(starts))})...",
                total=len(starts),
            )
            if self._threads == 1:
                for index, theta0 in enumerate(starts):
                    self.results[index] = self.run(index, theta0)
                    progress.advance(task_progress, 1)
            else:
                with ThreadPoolExecutor(max_workers=self._threads) as pool:
                    futures = {pool.submit(self.run, index, theta0): index for index, theta0 in enumerate(starts)}
                    for future in as_completed(futures):
                        self.results[futures[future]] = future.result()
                        progress.advance(task_progress, 1)
        return [self.results[index] for index in range(len(starts))]

    def run(self, index: int, theta0: np.ndarray) -> StartOutcome:
        logger.debug("MultiStartExecutor.run: start %d from %s", index, np.array2string(np.asarray(theta0), precision=3))
        outcome = self._runner.run(index, theta0)
        if not isinstance(outcome, StartOutcome):
            raise TypeError(f"run() must return a StartOutcome, got {type(outcome).__name__}")
        return outcome
