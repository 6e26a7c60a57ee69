import math

import numpy as np
import pytest

from bivariate_pgw.multi_start_executor import MultiStartExecutor, OptimizerRunner, StartOutcome

CENTRE = np.array([1.0, -2.0, 0.5])


def bowl(theta: np.ndarray) -> float:
    return float(np.sum((theta - CENTRE) ** 2 * np.array([1.0, 4.0, 0.25])))


class TestOptimizerRunner:
    def test_converges_on_quadratic(self):
        outcome = OptimizerRunner(bowl, grad_tol=1e-6).run(0, np.zeros(3))

        assert outcome.converged
        np.testing.assert_allclose(outcome.theta, CENTRE, atol=1e-5)
        assert outcome.objective == pytest.approx(0.0, abs=1e-10)
        assert outcome.gradient_max_norm < 1e-6

    def test_evaluation_failure_ends_the_start(self):
        outcome = OptimizerRunner(lambda theta: math.nan).run(3, np.zeros(2))

        assert outcome.index == 3
        assert not outcome.converged
        assert outcome.objective == math.inf
        assert "not finite" in outcome.message

    def test_iteration_cap_leaves_start_unconverged(self):
        def rosenbrock(theta: np.ndarray) -> float:
            return float(100.0 * (theta[1] - theta[0] ** 2) ** 2 + (1.0 - theta[0]) ** 2)

        outcome = OptimizerRunner(rosenbrock, grad_tol=1e-12, max_iter=1).run(0, np.array([-1.2, 1.0]))

        assert not outcome.converged


class TestStartOutcome:
    @pytest.mark.parametrize(
        "kwargs",
        [
            pytest.param({"theta": np.zeros((2, 2))}, id="matrix_theta"),
            pytest.param({"iterations": -1}, id="negative_iterations"),
        ],
    )
    def test_validation(self, kwargs):
        values = {
            "index": 0,
            "theta": np.zeros(2),
            "objective": 1.0,
            "gradient_max_norm": 0.0,
            "iterations": 0,
            "converged": True,
            "message": "",
            **kwargs,
        }

        with pytest.raises(ValueError):
            StartOutcome(**values)


class TestMultiStartExecutor:
    @pytest.mark.parametrize("threads", [1, 3])
    def test_outcomes_in_start_order(self, threads):
        starts = [np.full(3, float(k)) for k in range(5)]
        executor = MultiStartExecutor(OptimizerRunner(bowl, grad_tol=1e-6), threads=threads)

        outcomes = executor.execute(starts)

        assert [o.index for o in outcomes] == list(range(5))
        assert all(o.converged for o in outcomes)
        assert set(executor.results) == set(range(5))

    def test_rejects_non_outcome(self):
        class BrokenRunner:
            def run(self, index, theta0):
                return {"index": index}

        executor = MultiStartExecutor(BrokenRunner())  # type: ignore[arg-type]

        with pytest.raises(TypeError):
            executor.execute([np.zeros(2)])

    def test_rejects_zero_threads(self):
        with pytest.raises(ValueError):
            MultiStartExecutor(OptimizerRunner(bowl), threads=0)
