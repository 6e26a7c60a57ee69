import math

import numpy as np
import pytest

from bivariate_pgw.errors import DomainError
from bivariate_pgw.frailty import (
    GRID_SIZE,
    TsParams,
    inverse_gaussian_sample,
    positive_stable_sample,
    result_a1_frailty,
    ts_laplace,
    ts_sample,
    verify_result1,
    verify_resultA1,
    verify_weibull_extension_link,
)
from bivariate_pgw.univariate import ApgwParams, chf_apgw, survival_apgw


def empirical_laplace(draws: np.ndarray, s: float) -> tuple[float, float]:
    """Mean of exp(-s B) and its Monte-Carlo standard error."""
    values = np.exp(-s * draws)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


class TestTsParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            pytest.param({"omega": 1.5, "xi": 1.0}, id="omega_above_one"),
            pytest.param({"omega": -0.1, "xi": 1.0}, id="negative_omega"),
            pytest.param({"omega": 0.5, "xi": 0.0}, id="zero_xi"),
            pytest.param({"omega": 0.5, "xi": 1.0, "theta": -1.0}, id="negative_theta"),
            pytest.param({"omega": 0.0, "xi": 1.0, "theta": 0.0}, id="gamma_limit_without_rate"),
        ],
    )
    def test_rejects_invalid_parameters(self, kwargs):
        with pytest.raises(DomainError):
            TsParams(**kwargs)


class TestTsLaplace:
    def test_one_at_zero(self):
        assert ts_laplace(0.0, TsParams(omega=0.3, xi=2.0, theta=0.7)) == 1.0

    def test_degenerate_at_omega_one(self):
        assert ts_laplace(1.0, TsParams(omega=1.0, xi=2.0)) == pytest.approx(math.exp(-2.0))

    def test_unit_theta_form(self):
        # xi = omega * lambda with lambda = 1: exp[{1 - (1 + s)^omega}]
        assert ts_laplace(3.0, TsParams(omega=0.5, xi=0.5)) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_general_theta_form(self):
        p = TsParams(omega=0.4, xi=1.3, theta=2.5)
        s = 0.8
        expected = math.exp(-(p.xi / p.omega) * ((p.theta + s) ** p.omega - p.theta**p.omega))

        assert ts_laplace(s, p) == pytest.approx(expected, rel=1e-12)

    def test_gamma_limit(self):
        assert ts_laplace(2.0, TsParams(omega=0.0, xi=3.0, theta=1.0)) == pytest.approx(3.0 ** -3.0)

    def test_rejects_negative_argument(self):
        with pytest.raises(DomainError):
            ts_laplace(-1.0, TsParams(omega=0.5, xi=1.0))


class TestTsSample:
    def test_omega_one_is_constant(self):
        np.testing.assert_array_equal(ts_sample(TsParams(omega=1.0, xi=2.5), 10, seed=1), np.full(10, 2.5))

    def test_zero_draws_is_empty(self):
        assert ts_sample(TsParams(omega=0.5, xi=1.0), 0, seed=1).size == 0

    def test_deterministic_for_fixed_seed(self):
        p = TsParams(omega=0.6, xi=0.8)

        np.testing.assert_array_equal(ts_sample(p, 500, seed=42), ts_sample(p, 500, seed=42))

    def test_gamma_limit_mean(self):
        draws = ts_sample(TsParams(omega=0.0, xi=2.0, theta=1.0), 100_000, seed=3)

        assert abs(draws.mean() - 2.0) < 3 * math.sqrt(2.0 / draws.size)

    def test_positive_stable_laplace(self):
        draws = positive_stable_sample(0.5, 100_000, np.random.default_rng(5))
        mean, se = empirical_laplace(draws, 1.0)

        assert abs(mean - math.exp(-1.0)) < 4 * se

    @pytest.mark.parametrize(
        "p",
        [
            pytest.param(TsParams(omega=0.5, xi=0.5), id="unit_theta"),
            pytest.param(TsParams(omega=0.3, xi=0.3 * 8.0), id="large_lambda_split"),
            pytest.param(TsParams(omega=0.8, xi=1.5, theta=2.0), id="general_theta"),
        ],
    )
    def test_empirical_laplace_matches(self, p):
        draws = ts_sample(p, 100_000, seed=11)

        assert np.all(draws > 0)
        for s in (0.25, 0.5, 1.0, 2.0, 4.0):
            mean, se = empirical_laplace(draws, s)
            assert abs(mean - ts_laplace(s, p)) < max(4 * se, 1e-4), s

    def test_inverse_gaussian_matches_half_stable(self):
        draws = inverse_gaussian_sample(0.5, 1.0, 100_000, seed=8)
        mean, se = empirical_laplace(draws, 1.0)

        assert abs(mean - ts_laplace(1.0, TsParams(omega=0.5, xi=0.5))) < 4 * se

    def test_rejects_negative_size(self):
        with pytest.raises(DomainError):
            ts_sample(TsParams(omega=0.5, xi=1.0), -1)


class TestMixingChecks:
    def test_result1_quick(self):
        report = verify_result1(gamma=1.3, kappa=2.0, omega=0.5, lam=1.0, n=20_000, seed=1)

        assert report.grid_size == GRID_SIZE
        assert report.n == 20_000
        assert report.max_abs_dev < 0.02

    def test_requires_enough_draws(self):
        with pytest.raises(DomainError):
            verify_result1(gamma=1.0, kappa=1.0, omega=0.5, lam=1.0, n=100)

    def test_inverse_gaussian_needs_half(self):
        with pytest.raises(DomainError):
            verify_result1(gamma=1.0, kappa=1.0, omega=0.3, lam=1.0, n=10_000, mixing="inverse_gaussian")

    def test_result_a1_frailty_parameters(self):
        p = result_a1_frailty(kappa=1.0, omega=0.5)

        assert p.xi == pytest.approx(1.5 / math.sqrt(2.0))
        assert p.theta == pytest.approx(2.0)

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "mixing, omega",
        [
            pytest.param("tempered_stable", 0.5, id="tempered_stable"),
            pytest.param("tempered_stable", 1.0, id="no_mixing"),
            pytest.param("inverse_gaussian", 0.5, id="inverse_gaussian"),
            pytest.param("gamma", 0.0, id="gamma_burr"),
        ],
    )
    def test_result1(self, mixing, omega):
        report = verify_result1(gamma=1.3, kappa=2.0, omega=omega, lam=1.0, n=100_000, seed=17, mixing=mixing)

        assert report.max_abs_dev < 0.01

    @pytest.mark.slow
    @pytest.mark.parametrize("omega", [0.2, 0.5, 0.8])
    @pytest.mark.parametrize("kappa", [0.5, 1.0, 3.0])
    def test_result1_grid_within_ks_band(self, omega, kappa):
        report = verify_result1(gamma=1.2, kappa=kappa, omega=omega, lam=1.0, n=100_000, seed=23)

        # 99% band
        assert report.max_abs_dev < 1.63 / math.sqrt(report.n)

    @pytest.mark.parametrize(
        "gamma, kappa, omega",
        [pytest.param(1.0, 1.0, 0.5, id="half"), pytest.param(1.7, 0.5, 0.3, id="strong"), pytest.param(0.8, 3.0, 0.9, id="weak")],
    )
    def test_result_a1_mixture_is_rescaled_apgw(self, gamma, kappa, omega):
        t = np.array([0.1, 0.5, 1.0, 2.0, 4.0])
        a = ((kappa + 1.0) / (omega * kappa + 1.0)) ** (1.0 / gamma)
        p = result_a1_frailty(kappa, omega)

        mixture = [ts_laplace(float(h), p) for h in chf_apgw(t, ApgwParams(gamma=gamma, tau=kappa))]

        np.testing.assert_allclose(mixture, survival_apgw(t / a, ApgwParams(gamma=gamma, tau=omega * kappa)), rtol=1e-10)

    def test_result_a1_quick(self):
        report = verify_resultA1(gamma=1.0, kappa=1.0, omega=0.5, n=20_000, seed=29)

        assert report.max_abs_dev < 0.02

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "gamma, kappa, omega",
        [
            pytest.param(1.0, 1.0, 0.5, id="half"),
            pytest.param(1.0, 2.0, 1.0, id="no_mixing"),
            pytest.param(1.7, 0.5, 0.3, id="strong"),
        ],
    )
    def test_result_a1(self, gamma, kappa, omega):
        report = verify_resultA1(gamma=gamma, kappa=kappa, omega=omega, n=100_000, seed=29)

        assert report.max_abs_dev < 0.01

    @pytest.mark.slow
    def test_weibull_extension_link(self):
        report = verify_weibull_extension_link(gamma=1.5, n=100_000, seed=31)

        assert report.max_abs_dev < 0.01
