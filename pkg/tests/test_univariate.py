import math

import numpy as np
import pytest
from scipy import integrate

from bivariate_pgw.errors import DomainError, NoSolutionError
from bivariate_pgw.univariate import (
    ApgwParams,
    HazardShape,
    MarginalFamily,
    PgwParams,
    apgw_from_pgw_time,
    chf_apgw,
    chf_pgw,
    classify_hazard_shape,
    cure_fraction,
    density_apgw,
    density_pgw,
    hazard_apgw,
    hazard_pgw,
    hazard_shape_from_scan,
    log_unit_hazard,
    quantile_apgw,
    quantile_pgw,
    special_case_name,
    survival_apgw,
    survival_pgw,
)

T_GRID = np.array([0.05, 0.3, 1.0, 1.7, 2.0])


class TestPgw:
    @pytest.mark.parametrize(
        "t, params, expected",
        [
            pytest.param(2.0, PgwParams(gamma=1.0, kappa=1.0), 2.0, id="exponential"),
            pytest.param(0.0, PgwParams(gamma=2.3, kappa=0.7, lam=4.0, phi=0.2), 0.0, id="zero_time"),
            pytest.param(1.5, PgwParams(gamma=2.0, kappa=0.5), math.sqrt(3.25) - 1.0, id="closed_form"),
        ],
    )
    def test_chf(self, t, params, expected):
        assert chf_pgw(t, params) == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_hazard_closed_form(self):
        params = PgwParams(gamma=2.0, kappa=0.5)

        assert hazard_pgw(1.5, params) == pytest.approx(1.5 / math.sqrt(3.25), rel=1e-12)

    def test_density_is_hazard_times_survival(self):
        params = PgwParams(gamma=1.4, kappa=2.5, lam=0.3, phi=1.7)

        np.testing.assert_allclose(
            density_pgw(T_GRID, params),
            hazard_pgw(T_GRID, params) * survival_pgw(T_GRID, params),
            rtol=1e-12,
        )

    def test_density_integrates_to_one(self):
        params = PgwParams(gamma=0.8, kappa=1.5, lam=2.0, phi=0.5)

        mass, _ = integrate.quad(lambda t: density_pgw(t, params), 0.0, math.inf)

        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_quantile_round_trip(self):
        params = PgwParams(gamma=1.4, kappa=2.5, lam=0.3, phi=1.7)
        u = np.array([0.01, 0.3, 0.5, 0.97])

        np.testing.assert_allclose(survival_pgw(quantile_pgw(u, params), params), u, rtol=1e-12)

    @pytest.mark.parametrize(
        "kwargs",
        [
            pytest.param({"gamma": 0.0, "kappa": 1.0}, id="zero_gamma"),
            pytest.param({"gamma": 1.0, "kappa": -1.0}, id="negative_kappa"),
            pytest.param({"gamma": 1.0, "kappa": 1.0, "lam": math.inf}, id="infinite_lambda"),
        ],
    )
    def test_rejects_invalid_parameters(self, kwargs):
        with pytest.raises(DomainError):
            PgwParams(**kwargs)


class TestApgwChf:
    def test_tau_one_is_weibull(self):
        params = ApgwParams(gamma=1.7, tau=1.0, lam=0.4, phi=1.0)

        np.testing.assert_allclose(chf_apgw(T_GRID, params), 0.4 * T_GRID**1.7, rtol=1e-12)

    @pytest.mark.parametrize(
        "tau, expected",
        [
            pytest.param(0.0, math.log(2.0), id="burr_limit"),
            pytest.param(math.inf, math.e - 1.0, id="weibull_extension_limit"),
        ],
    )
    def test_limits(self, tau, expected):
        assert chf_apgw(1.0, ApgwParams(gamma=1.0, tau=tau)) == pytest.approx(expected, rel=1e-12)

    def test_continuous_near_burr_limit(self):
        burr = chf_apgw(T_GRID, ApgwParams(gamma=1.3, tau=0.0))
        for tau in (1e-6, 1e-8, -1e-7):
            np.testing.assert_allclose(chf_apgw(T_GRID, ApgwParams(gamma=1.3, tau=tau)), burr, atol=1e-5)

    def test_continuous_near_weibull_extension_limit(self):
        limit = chf_apgw(T_GRID, ApgwParams(gamma=1.0, tau=math.inf))

        np.testing.assert_allclose(chf_apgw(T_GRID, ApgwParams(gamma=1.0, tau=1e6)), limit, atol=1e-4)

    def test_pgw_is_rescaled_apgw(self):
        gamma, kappa, lam = 1.3, 2.0, 0.7
        pgw = PgwParams(gamma=gamma, kappa=kappa, lam=lam)
        apgw = ApgwParams(gamma=gamma, tau=kappa, lam=lam * kappa / (kappa + 1.0), phi=(kappa + 1.0) ** (1.0 / gamma))

        np.testing.assert_allclose(chf_apgw(T_GRID, apgw), chf_pgw(T_GRID, pgw), rtol=1e-12)

    def test_negative_time_is_rejected(self):
        with pytest.raises(DomainError):
            chf_apgw(-1.0, ApgwParams(gamma=1.0, tau=1.0))

    @pytest.mark.parametrize(
        "tau",
        [
            pytest.param(-1.0, id="minus_one"),
            pytest.param(-2.0, id="below_minus_one"),
            pytest.param(-math.inf, id="minus_infinity"),
            pytest.param(math.nan, id="nan"),
        ],
    )
    def test_tau_domain(self, tau):
        with pytest.raises(DomainError):
            ApgwParams(gamma=1.0, tau=tau)


class TestApgwSurvival:
    def test_survival_at_zero(self):
        assert survival_apgw(0.0, ApgwParams(gamma=0.8, tau=3.0, lam=2.0, phi=5.0)) == 1.0

    def test_exponential_hazard_is_constant(self):
        np.testing.assert_allclose(hazard_apgw(T_GRID, ApgwParams(gamma=1.0, tau=1.0)), 1.0, rtol=1e-12)

    def test_cure_model_levels_off(self):
        params = ApgwParams(gamma=2.0, tau=-0.5, lam=1.0)

        assert cure_fraction(params) == pytest.approx(math.exp(-1.0))
        assert survival_apgw(1e6, params) == pytest.approx(math.exp(-1.0), abs=1e-4)

    def test_proper_models_have_no_cure_fraction(self):
        assert cure_fraction(ApgwParams(gamma=1.0, tau=0.0)) == 0.0

    @pytest.mark.parametrize(
        "params",
        [
            pytest.param(ApgwParams(gamma=1.5, tau=2.0, lam=0.8, phi=1.2), id="apgw"),
            pytest.param(ApgwParams(gamma=1.2, tau=0.0, lam=2.0), id="burr"),
            pytest.param(ApgwParams(gamma=1.0, tau=math.inf, lam=0.5), id="gompertz"),
            pytest.param(ApgwParams(gamma=1.5, tau=-0.5, lam=1.0), id="cure"),
        ],
    )
    def test_density_integrates_to_proper_mass(self, params):
        mass, _ = integrate.quad(lambda t: density_apgw(t, params), 0.0, np.inf, limit=200)

        assert mass == pytest.approx(1.0 - cure_fraction(params), abs=1e-5)

    def test_hazard_matches_log_unit_hazard(self):
        params = ApgwParams(gamma=1.6, tau=0.4, lam=1.9, phi=0.6)
        expected = 1.9 * np.exp(log_unit_hazard(T_GRID, 1.6, 0.4, 0.6, MarginalFamily.APGW))

        np.testing.assert_allclose(hazard_apgw(T_GRID, params), expected, rtol=1e-12)


class TestApgwQuantile:
    def test_exponential_quantile(self):
        assert quantile_apgw(math.exp(-1.0), ApgwParams(gamma=1.0, tau=1.0)) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize(
        "params",
        [
            pytest.param(ApgwParams(gamma=1.3, tau=0.15, lam=0.2, phi=2.0), id="apgw"),
            pytest.param(ApgwParams(gamma=0.7, tau=0.0, lam=1.0), id="burr"),
            pytest.param(ApgwParams(gamma=2.0, tau=math.inf, lam=0.1), id="weibull_extension"),
            pytest.param(ApgwParams(gamma=1.0, tau=-0.4, lam=2.0), id="cure"),
        ],
    )
    def test_round_trip(self, params):
        u = np.array([0.999, 0.8, 0.5, 0.3]) * (1.0 - cure_fraction(params)) + cure_fraction(params)

        np.testing.assert_allclose(survival_apgw(quantile_apgw(u, params), params), u, rtol=1e-12, atol=1e-12)

    def test_quantile_tends_to_zero_near_one(self):
        assert quantile_apgw(1.0 - 1e-12, ApgwParams(gamma=1.0, tau=2.0)) < 1e-10

    def test_median_ratio_is_scale_ratio(self):
        common = {"gamma": math.exp(1.52), "tau": 0.15, "lam": math.exp(-5.57)}
        treated = quantile_apgw(0.5, ApgwParams(phi=math.exp(-0.07), **common))
        control = quantile_apgw(0.5, ApgwParams(phi=math.exp(0.98), **common))

        assert treated / control == pytest.approx(math.exp(1.05), rel=1e-10)
        assert treated / control == pytest.approx(2.84, abs=0.05)

    @pytest.mark.parametrize(
        "u",
        [pytest.param(0.0, id="zero"), pytest.param(1.0, id="one"), pytest.param(1.5, id="above_one")],
    )
    def test_rejects_levels_outside_unit_interval(self, u):
        with pytest.raises(DomainError):
            quantile_apgw(u, ApgwParams(gamma=1.0, tau=1.0))

    def test_level_below_cure_fraction_has_no_solution(self):
        with pytest.raises(NoSolutionError):
            quantile_apgw(0.2, ApgwParams(gamma=1.0, tau=-0.5, lam=1.0))


class TestPgwToApgwTransform:
    @pytest.mark.parametrize("tau", [pytest.param(0.3, id="small"), pytest.param(2.0, id="large")])
    def test_survival_is_preserved(self, tau):
        gamma, lam = 1.4, 0.9
        z = apgw_from_pgw_time(T_GRID, gamma, tau)

        np.testing.assert_allclose(
            survival_apgw(z, ApgwParams(gamma=gamma, tau=tau, lam=lam)),
            survival_pgw(T_GRID, PgwParams(gamma=gamma, kappa=tau, lam=lam)),
            rtol=1e-10,
        )

    def test_requires_finite_positive_tau(self):
        with pytest.raises(DomainError):
            apgw_from_pgw_time(1.0, 1.0, math.inf)


class TestSpecialCaseName:
    @pytest.mark.parametrize(
        "params, expected",
        [
            pytest.param(ApgwParams(gamma=1.0, tau=1.0), "exponential", id="exponential"),
            pytest.param(ApgwParams(gamma=2.0, tau=1.0), "Weibull", id="weibull"),
            pytest.param(ApgwParams(gamma=1.0, tau=2.0), "linear hazard", id="linear_hazard"),
            pytest.param(ApgwParams(gamma=1.5, tau=0.0), "log-logistic", id="log_logistic"),
            pytest.param(ApgwParams(gamma=1.5, tau=0.0, lam=2.0), "Burr XII", id="burr"),
            pytest.param(ApgwParams(gamma=1.0, tau=math.inf), "Gompertz", id="gompertz"),
            pytest.param(ApgwParams(gamma=0.5, tau=math.inf), "Weibull extension", id="weibull_extension"),
            pytest.param(ApgwParams(gamma=1.0, tau=-0.3), "cure model", id="cure"),
            pytest.param(ApgwParams(gamma=1.0, tau=0.7), "APGW", id="general"),
        ],
    )
    def test_names(self, params, expected):
        assert special_case_name(params) == expected


class TestHazardShape:
    @pytest.mark.parametrize(
        "gamma, kappa, expected",
        [
            pytest.param(1.0, 1.0, HazardShape.CONSTANT, id="constant"),
            pytest.param(2.0, 0.25, HazardShape.UP_THEN_DOWN, id="up_then_down"),
            pytest.param(0.5, 4.0, HazardShape.DOWN_THEN_UP, id="down_then_up"),
            pytest.param(0.5, 1.0, HazardShape.DECREASING, id="decreasing"),
            pytest.param(2.0, 1.0, HazardShape.INCREASING, id="increasing"),
            pytest.param(1.0, 0.5, HazardShape.DECREASING, id="tie_on_gamma_goes_monotone"),
            pytest.param(2.0, 0.5, HazardShape.INCREASING, id="tie_on_tail_goes_monotone"),
        ],
    )
    def test_classification(self, gamma, kappa, expected):
        assert classify_hazard_shape(gamma, kappa) == expected

    def test_rejects_nonpositive_parameters(self):
        with pytest.raises(DomainError):
            classify_hazard_shape(0.0, 1.0)

    def test_classification_agrees_with_hazard_scan(self):
        rng = np.random.default_rng(2024)
        grid = np.geomspace(1e-4, 1e6, 800)

        def away_from_one() -> float:
            return float(rng.uniform(0.3, 0.7) if rng.uniform() < 0.5 else rng.uniform(1.5, 2.5))

        for _ in range(100):
            gamma = away_from_one()
            kappa = away_from_one() / gamma
            log_hazard = log_unit_hazard(grid, gamma, kappa, 1.0, MarginalFamily.APGW)

            assert hazard_shape_from_scan(log_hazard) == classify_hazard_shape(gamma, kappa), (gamma, kappa)

    @pytest.mark.parametrize(
        "values, expected",
        [
            pytest.param([1.0, 1.0, 1.0], HazardShape.CONSTANT, id="flat"),
            pytest.param([1.0, 2.0, 2.0, 3.0], HazardShape.INCREASING, id="increasing_with_plateau"),
            pytest.param([3.0, 2.0, 1.0, 2.0], HazardShape.DOWN_THEN_UP, id="down_then_up"),
            pytest.param([1.0, 2.0, 1.0, 2.0], None, id="two_changes"),
        ],
    )
    def test_scan_labels(self, values, expected):
        assert hazard_shape_from_scan(np.array(values)) == expected
