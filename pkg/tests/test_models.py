"""Model parsing, validation, serialization round trips, one-step affinities."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

import measurepair as mp
from measurepair import (
    ContinuousCoordinate,
    DepthExceeded,
    SchemaError,
    ValidationError,
)

from corpus import corpus_models


BERNOULLI = {"p": ["1/2", "1/2"], "q": ["3/4", "1/4"]}


class TestParseProduct:
    def test_direct_field_mapping(self):
        doc = {
            "type": "product",
            "product": {"coordinates": [{"p": [0.5, 0.5], "q": [0.75, 0.25]}]},
        }
        model = mp.parse_model(doc)
        assert isinstance(model, mp.ProductModel)
        assert model.alphabet.size == 2
        assert not model.exact
        assert model.coordinates[0].q == (0.75, 0.25)

    def test_rational_strings_activate_exact_mode(self):
        model = mp.parse_model({"type": "product", "product": {"coordinates": [BERNOULLI]}})
        assert model.exact
        assert model.coordinates[0].q == (Fraction(3, 4), Fraction(1, 4))

    def test_decimal_strings_parse_exactly_in_exact_mode(self):
        doc = {
            "type": "product",
            "product": {"coordinates": [{"p": ["0.1", "0.9"], "q": ["1/10", "9/10"]}]},
        }
        model = mp.parse_model(doc)
        assert model.coordinates[0].p == (Fraction(1, 10), Fraction(9, 10))
        assert model.coordinates[0].identical()

    def test_bernoulli_perturbation_generator_values(self):
        doc = {
            "type": "product",
            "product": {
                "coordinates": [],
                "tail": {"family": "bernoulli_perturbation", "base": 0.5, "c": 0.1, "alpha": 1},
            },
        }
        model = mp.parse_model(doc)
        # eps_n = 0.1 / n by hand for n = 1, 2, 3
        assert model.kernel(()).q[0] == pytest.approx(0.6)
        assert model.kernel((0,)).q[0] == pytest.approx(0.55)
        assert model.kernel((0, 1)).q[0] == pytest.approx(0.5 + 0.1 / 3)

    def test_generator_epsilon_out_of_range(self):
        doc = {
            "type": "product",
            "product": {
                "coordinates": [],
                "tail": {"family": "bernoulli_perturbation", "base": 0.7, "c": 0.4, "alpha": 1},
            },
        }
        with pytest.raises(ValidationError, match="base"):
            mp.parse_model(doc)

    def test_nonstochastic_row_rejected(self):
        doc = {"type": "product", "product": {"coordinates": [{"p": [0.5, 0.4], "q": [0.5, 0.5]}]}}
        with pytest.raises(ValidationError, match="sums to"):
            mp.parse_model(doc)

    def test_negative_probability_rejected(self):
        doc = {"type": "product", "product": {"coordinates": [{"p": [1.2, -0.2], "q": [0.5, 0.5]}]}}
        with pytest.raises(ValidationError, match="negative"):
            mp.parse_model(doc)


class TestParseMarkov:
    def test_mismatched_supports(self):
        doc = {
            "type": "markov",
            "markov": {
                "states": 3,
                "P": [[0.4, 0.4, 0.2], [0.3, 0.3, 0.4], [0.2, 0.2, 0.6]],
                "Q": [[0.5, 0.5, 0.0], [0.3, 0.3, 0.4], [0.2, 0.2, 0.6]],
            },
        }
        with pytest.raises(ValidationError, match="mismatched supports"):
            mp.parse_model(doc)

    def test_markov_kernel_reads_last_state(self):
        doc = {
            "type": "markov",
            "markov": {
                "states": 2,
                "P": [["9/10", "1/10"], ["1/10", "9/10"]],
                "Q": [["4/5", "1/5"], ["1/5", "4/5"]],
                "init_p": ["1/2", "1/2"],
                "init_q": ["1/2", "1/2"],
            },
        }
        model = mp.parse_model(doc)
        step = mp.conditional_kernels(model, (0, 1))
        assert step.p == (Fraction(1, 10), Fraction(9, 10))
        assert step.q == (Fraction(1, 5), Fraction(4, 5))

    def test_missing_init_defaults_to_uniform(self):
        doc = {
            "type": "markov",
            "markov": {"states": 2, "P": [[0.5, 0.5], [0.5, 0.5]], "Q": [[0.5, 0.5], [0.5, 0.5]]},
        }
        model = mp.parse_model(doc)
        assert model.init_p == (0.5, 0.5)


class TestParseTree:
    def test_missing_reachable_prefix(self):
        doc = {
            "type": "tree",
            "tree": {"alphabet": 2, "depth": 2, "kernels": {"": BERNOULLI}},
        }
        with pytest.raises(ValidationError, match="missing kernel"):
            mp.parse_model(doc)

    def test_depth_exceeded(self):
        doc = {
            "type": "tree",
            "tree": {
                "alphabet": 2,
                "depth": 1,
                "kernels": {"": BERNOULLI},
            },
        }
        model = mp.parse_model(doc)
        with pytest.raises(DepthExceeded):
            mp.conditional_kernels(model, (0,))

    def test_pruned_branches_need_no_kernels(self):
        doc = {
            "type": "tree",
            "tree": {
                "alphabet": 2,
                "depth": 2,
                "kernels": {
                    "": {"p": ["1", "0"], "q": ["1", "0"]},
                    "0": BERNOULLI,
                },
            },
        }
        model = mp.parse_model(doc)
        assert model.kernel((0,)).q[0] == Fraction(3, 4)


class TestSchemaErrors:
    def test_unknown_type(self):
        with pytest.raises(SchemaError, match="model type"):
            mp.parse_model({"type": "wiener"})

    def test_missing_section(self):
        with pytest.raises(SchemaError, match="section"):
            mp.parse_model({"type": "product"})

    def test_not_json(self):
        with pytest.raises(SchemaError, match="JSON"):
            mp.parse_model("{not json")

    def test_alphabet_must_be_positive(self):
        with pytest.raises(ValidationError):
            mp.Alphabet(0)


class TestGaussian:
    def test_no_finite_kernel(self):
        doc = {
            "type": "gaussian_product",
            "gaussian_product": {
                "coordinates": [{"mu": 0, "mu_q": 1, "sigma": 1, "sigma_q": 1}]
            },
        }
        model = mp.parse_model(doc)
        with pytest.raises(ContinuousCoordinate):
            mp.conditional_kernels(model, ())

    def test_sigma_must_be_positive(self):
        doc = {
            "type": "gaussian_product",
            "gaussian_product": {
                "coordinates": [{"mu": 0, "mu_q": 1, "sigma": 0, "sigma_q": 1}]
            },
        }
        with pytest.raises(ValidationError, match="sigma"):
            mp.parse_model(doc)

    def test_unit_gap_affinity_closed_form(self):
        doc = {
            "type": "gaussian_product",
            "gaussian_product": {
                "coordinates": [{"mu": 0, "mu_q": 1, "sigma": 1, "sigma_q": 1}]
            },
        }
        model = mp.parse_model(doc)
        assert mp.step_affinity(model, ()) == pytest.approx(math.exp(-0.125), abs=1e-12)

    @pytest.mark.parametrize(
        "mu,mu_q,sigma,sigma_q",
        [(0.0, 1.0, 1.0, 1.0), (0.3, -0.4, 0.8, 1.7), (2.0, 2.0, 1.0, 3.0)],
    )
    def test_affinity_against_quadrature_oracle(self, mu, mu_q, sigma, sigma_q):
        def integrand(x):
            d1 = math.exp(-((x - mu) ** 2) / (2 * sigma**2)) / (sigma * math.sqrt(2 * math.pi))
            d2 = math.exp(-((x - mu_q) ** 2) / (2 * sigma_q**2)) / (
                sigma_q * math.sqrt(2 * math.pi)
            )
            return math.sqrt(d1 * d2)

        oracle, _ = quad(integrand, -40, 40)
        coord = mp.GaussianCoordinate(mu, mu_q, sigma, sigma_q)
        assert coord.rho() == pytest.approx(oracle, abs=1e-10)


class TestStepAffinity:
    def test_identical_laws_give_exactly_one(self):
        doc = {"type": "product", "product": {"coordinates": [{"p": ["1/3", "2/3"], "q": ["1/3", "2/3"]}]}}
        model = mp.parse_model(doc)
        assert mp.step_affinity(model, ()) == 1

    def test_bernoulli_value(self):
        model = mp.parse_model({"type": "product", "product": {"coordinates": [BERNOULLI]}})
        rho = mp.step_affinity(model, ())
        assert float(rho) == pytest.approx(0.9659258262890682, abs=1e-15)

    def test_product_affinity_is_prefix_independent(self):
        for _, _, exact, _ in corpus_models(6, start=41):
            if not isinstance(exact, mp.ProductModel):
                continue
            root = exact.step_affinity(())
            rng = np.random.default_rng(7)
            support = exact.coordinates[0].support()
            for _ in range(10):
                length = int(rng.integers(0, 6))
                # stay inside the first coordinate's support for validity
                prefix = tuple(int(rng.choice(support)) for _ in range(length))
                step = exact.kernel(prefix)
                again = mp.models.rho_of_step(step, exact.exact)
                if length + 1 <= len(exact.coordinates):
                    expected = exact.coordinate_rho(length + 1)
                    assert again == expected


@given(
    numerators_p=st.lists(st.integers(min_value=1, max_value=9), min_size=2, max_size=4),
    numerators_q=st.lists(st.integers(min_value=1, max_value=9), min_size=2, max_size=4),
)
def test_affinity_bounds_property(numerators_p, numerators_q):
    size = min(len(numerators_p), len(numerators_q))
    p = [Fraction(n, sum(numerators_p[:size])) for n in numerators_p[:size]]
    q = [Fraction(n, sum(numerators_q[:size])) for n in numerators_q[:size]]
    step = mp.models.kernel_step(p, q, exact=True)
    rho = mp.models.rho_of_step(step, True)
    assert rho.sign() > 0
    assert (1 - rho).sign() >= 0
    assert (rho == 1) == (tuple(p) == tuple(q))


class TestSerialization:
    def test_round_trip_exact(self):
        for _, doc, exact, _ in corpus_models(8):
            assert mp.parse_model(mp.serialize_model(exact)) == exact

    def test_round_trip_float(self):
        for _, doc, _, floaty in corpus_models(8):
            assert mp.parse_model(mp.serialize_model(floaty)) == floaty

    def test_round_trip_generator_models(self):
        doc = {
            "type": "product",
            "product": {
                "coordinates": [{"p": [0.5, 0.5], "q": [0.6, 0.4]}],
                "tail": {"family": "bernoulli_perturbation", "base": 0.5, "c": 0.1, "alpha": 1.0},
            },
        }
        model = mp.parse_model(doc)
        assert mp.parse_model(mp.serialize_model(model)) == model

    def test_round_trip_gaussian(self):
        doc = {
            "type": "gaussian_product",
            "gaussian_product": {
                "coordinates": [{"mu": 0.0, "mu_q": 0.5, "sigma": 1.0, "sigma_q": 2.0}],
                "tail": {"family": "mean_gap", "c": 1.0, "alpha": 1.0},
            },
        }
        model = mp.parse_model(doc)
        assert mp.parse_model(mp.serialize_model(model)) == model
