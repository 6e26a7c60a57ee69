import math

import numpy as np
import pytest

from bivariate_pgw.errors import DomainError
from bivariate_pgw.models_schema import CovariateTerm, ModelSpec
from bivariate_pgw.param_vector import Link, ParamLayout, common_tau_value
from bivariate_pgw.univariate import MarginalFamily

NATURAL = {
    "lambda": 0.8,
    "omega": 0.3,
    "gamma1": 1.2,
    "gamma2": 0.9,
    "tau1": 0.5,
    "tau2": -0.4,
    "phi1": 0.05,
    "phi2": 0.02,
}


class TestParamLayout:
    @staticmethod
    def _make_spec(constraints=(), terms=(), **kwargs) -> ModelSpec:
        return ModelSpec(
            name="test",
            constraints=list(constraints),
            covariate_terms=[CovariateTerm(target=t, covariate=c) for t, c in terms],
            **kwargs,
        )

    @pytest.mark.parametrize(
        "constraints, terms, expected",
        [
            pytest.param(
                (),
                (),
                ["lambda", "omega", "gamma1", "gamma2", "tau1", "tau2", "phi1", "phi2"],
                id="reference_model",
            ),
            pytest.param(
                ("common_phi", "common_tau"),
                (),
                ["lambda", "omega", "gamma1", "gamma2", "tau", "phi"],
                id="common_phi_and_tau",
            ),
            pytest.param(
                ("common_phi",),
                (("phi", "D"),),
                ["lambda", "omega", "gamma1", "gamma2", "tau1", "tau2", "phi", "phi.D"],
                id="shared_phi_effect",
            ),
            pytest.param(
                (),
                (("phi1", "D"), ("lambda", "D")),
                ["lambda", "lambda.D", "omega", "gamma1", "gamma2", "tau1", "tau2", "phi1", "phi1.D", "phi2"],
                id="per_margin_effect",
            ),
            pytest.param(
                (),
                (("gamma", "D"),),
                ["lambda", "omega", "gamma1", "gamma2", "gamma.D", "tau1", "tau2", "phi1", "phi2"],
                id="shared_effect_on_unconstrained_pair",
            ),
        ],
    )
    def test_slot_names(self, constraints, terms, expected):
        layout = ParamLayout(self._make_spec(constraints, terms))

        assert layout.names == expected
        assert layout.dimension == len(expected)

    def test_fixed_tau_drops_tau_slot(self):
        layout = ParamLayout(self._make_spec(("common_tau",), fixed_tau=math.inf))

        assert "tau" not in layout.names
        assert layout.dimension == 7
        assert "tau fixed at inf" in layout.describe()

    def test_links(self):
        layout = ParamLayout(self._make_spec(terms=(("lambda", "D"),)))

        assert layout.link("lambda") is Link.LOG
        assert layout.link("omega") is Link.LOGIT
        assert layout.link("tau1") is Link.LOG_SHIFTED
        assert layout.link("lambda.D") is Link.IDENTITY

    def test_unknown_slot(self):
        with pytest.raises(DomainError):
            ParamLayout(self._make_spec()).index("kappa")

    def test_invalid_spec_is_rejected(self):
        with pytest.raises(DomainError):
            ParamLayout(self._make_spec(("common_phi",), (("phi2", "D"),)))

    def test_missing_covariate_column_is_rejected(self):
        with pytest.raises(DomainError):
            ParamLayout(self._make_spec(terms=(("lambda", "age"),)), covariate_names=["D"])

    def test_pack_inverts_natural_named(self):
        layout = ParamLayout(self._make_spec())
        theta = layout.pack(NATURAL)

        assert layout.natural_named(theta) == pytest.approx(NATURAL, rel=1e-12)

    def test_pack_defaults_coefficients_to_zero(self):
        layout = ParamLayout(self._make_spec(terms=(("omega", "D"),)))

        assert layout.pack(NATURAL)[layout.index("omega.D")] == 0.0

    def test_pack_requires_base_slots(self):
        layout = ParamLayout(self._make_spec())

        with pytest.raises(DomainError):
            layout.pack({"lambda": 1.0})

    def test_pack_rejects_values_outside_domain(self):
        layout = ParamLayout(self._make_spec())

        with pytest.raises(DomainError):
            layout.pack({**NATURAL, "omega": 1.0})

    def test_natural_parameters_apply_covariates(self):
        spec = self._make_spec(("common_phi",), (("phi", "D"), ("omega", "D")))
        layout = ParamLayout(spec)
        values = {**NATURAL, "phi": 0.05, "phi.D": math.log(2.0), "omega.D": -1.0}
        values.pop("phi1")
        values.pop("phi2")
        theta = layout.pack(values)
        d = np.array([0.0, 1.0])

        p = layout.natural_parameters(theta, {"D": d})

        np.testing.assert_allclose(p.phi1, [0.05, 0.1])
        np.testing.assert_allclose(p.phi2, [0.05, 0.1])
        assert p.omega[0] == pytest.approx(0.3)
        assert p.omega[1] == pytest.approx(1.0 / (1.0 + math.exp(-(math.log(0.3 / 0.7) - 1.0))))
        assert p.tau1 == pytest.approx(0.5)
        assert p.tau2 == pytest.approx(-0.4)

    def test_natural_parameters_need_covariates(self):
        layout = ParamLayout(self._make_spec(terms=(("lambda", "D"),)))

        with pytest.raises(DomainError):
            layout.natural_parameters(layout.pack(NATURAL))

    @pytest.mark.parametrize(
        "theta",
        [
            pytest.param(np.zeros(7), id="wrong_length"),
            pytest.param(np.array([0.0] * 7 + [math.nan]), id="nan_entry"),
        ],
    )
    def test_rejects_malformed_theta(self, theta):
        with pytest.raises(DomainError):
            ParamLayout(self._make_spec()).natural_parameters(theta)

    def test_model_carries_family_and_shared_lambda(self):
        layout = ParamLayout(self._make_spec(family=MarginalFamily.APGW))
        model = layout.model(layout.pack(NATURAL))

        assert model.lam == pytest.approx(0.8)
        assert model.marginal1.lam == model.lam
        assert model.marginal2.tau == pytest.approx(-0.4)
        assert model.family is MarginalFamily.APGW

    def test_common_tau_value(self):
        estimated = ParamLayout(self._make_spec(("common_tau",)))
        fixed = ParamLayout(self._make_spec(("common_tau",), fixed_tau=0.0))
        values = {k: v for k, v in NATURAL.items() if k not in ("tau1", "tau2")}

        assert common_tau_value(estimated, estimated.pack({**values, "tau": 1.5})) == pytest.approx(1.5)
        assert common_tau_value(fixed, fixed.pack(values)) == 0.0

    def test_common_tau_value_needs_common_tau(self):
        layout = ParamLayout(self._make_spec())

        with pytest.raises(DomainError):
            common_tau_value(layout, layout.pack(NATURAL))
