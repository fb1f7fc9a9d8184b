"""Cylinder enumeration, likelihood ratios, conditional expectations."""

from fractions import Fraction

import pytest

import measurepair as mp
from measurepair import BudgetExceeded, IndexOutOfRange, ValidationError

from corpus import corpus_models


BERNOULLI = {"p": ["1/2", "1/2"], "q": ["3/4", "1/4"]}


@pytest.fixture
def bernoulli2():
    doc = {"type": "product", "product": {"coordinates": [BERNOULLI, BERNOULLI]}}
    return mp.parse_model(doc)


@pytest.fixture
def equal_pair():
    coord = {"p": ["1/3", "2/3"], "q": ["1/3", "2/3"]}
    return mp.parse_model({"type": "product", "product": {"coordinates": [coord, coord, coord]}})


class TestPhi:
    def test_empty_prefix_is_one(self, bernoulli2):
        assert mp.phi(bernoulli2, ()) == 1

    def test_single_step_ratio(self, bernoulli2):
        assert mp.phi(bernoulli2, (0,)) == Fraction(3, 2)

    def test_two_step_product(self, bernoulli2):
        assert mp.phi(bernoulli2, (0, 1)) == Fraction(3, 4)

    def test_float_mode_log_space(self):
        doc = {"type": "product", "product": {"coordinates": [{"p": [0.5, 0.5], "q": [0.75, 0.25]}] * 2}}
        model = mp.parse_model(doc)
        assert mp.phi(model, (0, 1)) == pytest.approx(0.75, abs=1e-14)
        assert mp.log_phi(model, (0, 1)) == pytest.approx(
            __import__("math").log(0.75), abs=1e-14
        )

    def test_density_state(self, bernoulli2):
        state = mp.density_state(bernoulli2, (0,))
        assert state.phi == Fraction(3, 2)
        assert state.log_phi == pytest.approx(0.4054651081081646)


class TestSmallPhi:
    def test_identical_measures_all_ones(self, equal_pair):
        for n in (1, 2, 3):
            assert mp.small_phi(equal_pair, (0, 1, 0), n) == 1

    def test_second_increment(self, bernoulli2):
        assert mp.small_phi(bernoulli2, (0, 1), 2) == Fraction(1, 2)

    def test_increments_multiply_to_phi(self, bernoulli2):
        prefix = (0, 1)
        product = Fraction(1)
        for n in (1, 2):
            product *= mp.small_phi(bernoulli2, prefix, n)
        assert product == mp.phi(bernoulli2, prefix)

    def test_index_out_of_range(self, bernoulli2):
        with pytest.raises(IndexOutOfRange):
            mp.small_phi(bernoulli2, (0,), 2)
        with pytest.raises(IndexOutOfRange):
            mp.small_phi(bernoulli2, (0,), 0)


class TestEnumerateCylinders:
    def test_depth_zero_single_atom(self, bernoulli2):
        weights = mp.enumerate_cylinders(bernoulli2, 0)
        assert weights.entries == {(): (Fraction(1), Fraction(1))}

    def test_depth_one_masses(self, bernoulli2):
        weights = mp.enumerate_cylinders(bernoulli2, 1)
        assert weights.entries[(0,)] == (Fraction(1, 2), Fraction(3, 4))
        assert weights.entries[(1,)] == (Fraction(1, 2), Fraction(1, 4))

    def test_change_of_measure_at_depth_two(self, bernoulli2):
        weights = mp.enumerate_cylinders(bernoulli2, 2)
        for prefix, (p_mass, q_mass) in weights.entries.items():
            assert q_mass == p_mass * mp.phi(bernoulli2, prefix)

    def test_budget_exceeded(self, bernoulli2):
        with pytest.raises(BudgetExceeded):
            mp.enumerate_cylinders(bernoulli2, 2, budget=3)

    def test_budget_env_override(self, bernoulli2, monkeypatch):
        monkeypatch.setenv("MEASUREPAIR_ATOM_BUDGET", "3")
        with pytest.raises(BudgetExceeded):
            mp.enumerate_cylinders(bernoulli2, 2)

    def test_normalization_on_corpus(self):
        for _, _, exact, floaty in corpus_models(10):
            weights = mp.enumerate_cylinders(exact, 3)
            assert weights.p_total() == 1
            assert weights.q_total() == 1
            weights_f = mp.enumerate_cylinders(floaty, 3)
            assert abs(weights_f.p_total() - 1) <= 1e-12
            assert abs(weights_f.q_total() - 1) <= 1e-12

    def test_matched_zeros_are_pruned(self):
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
        weights = mp.enumerate_cylinders(model, 2)
        assert set(weights.atoms()) == {(0, 0), (0, 1)}
        assert weights.p_total() == 1


class TestConditionalExpectation:
    def test_constant_is_preserved(self, bernoulli2):
        atoms = mp.enumerate_cylinders(bernoulli2, 2).atoms()
        f = {atom: Fraction(7, 3) for atom in atoms}
        for n in (1, 2, 3):
            for value in mp.conditional_expectation(bernoulli2, f, n).values():
                assert value == Fraction(7, 3)

    def test_one_step_increment_averages_to_one(self):
        # E(phi_n | level-n atoms) = 1 for every atom
        for _, _, exact, _ in corpus_models(6):
            depth = 3
            atoms = mp.enumerate_cylinders(exact, depth).atoms()
            increments = {atom: mp.small_phi(exact, atom, depth) for atom in atoms}
            conditioned = mp.conditional_expectation(exact, increments, depth)
            for value in conditioned.values():
                assert value == 1

    def test_leaf_indicator_recovers_mass(self, bernoulli2):
        weights = mp.enumerate_cylinders(bernoulli2, 2)
        target = (0, 1)
        f = {atom: Fraction(int(atom == target)) for atom in weights.atoms()}
        result = mp.conditional_expectation(bernoulli2, f, 1)
        assert result[()] == weights.entries[target][0] == Fraction(1, 8)

    def test_dual_flag_uses_q_weights(self, bernoulli2):
        weights = mp.enumerate_cylinders(bernoulli2, 2)
        target = (0, 1)
        f = {atom: Fraction(int(atom == target)) for atom in weights.atoms()}
        result = mp.conditional_expectation(bernoulli2, f, 1, under="q")
        assert result[()] == weights.entries[target][1] == Fraction(3, 16)

    def test_tower_property_on_corpus(self):
        for _, _, exact, _ in corpus_models(8):
            depth = 4
            weights = mp.enumerate_cylinders(exact, depth)
            f = {atom: mp.phi(exact, atom) for atom in weights.atoms()}
            for n in (1, 2):
                via_middle = mp.conditional_expectation(
                    exact, mp.conditional_expectation(exact, f, 3), n
                )
                direct = mp.conditional_expectation(exact, f, n)
                assert via_middle == direct

    def test_density_martingale_step(self):
        # conditioning the level-(n+1) ratio one level down returns the
        # level-n ratio on every atom
        for _, _, exact, _ in corpus_models(8):
            n = 3
            atoms = mp.enumerate_cylinders(exact, n).atoms()
            f = {atom: mp.phi(exact, atom) for atom in atoms}
            conditioned = mp.conditional_expectation(exact, f, n)
            for atom, value in conditioned.items():
                assert value == mp.phi(exact, atom)

    def test_identity_when_n_equals_depth_plus_one(self, bernoulli2):
        atoms = mp.enumerate_cylinders(bernoulli2, 2).atoms()
        f = {atom: mp.phi(bernoulli2, atom) for atom in atoms}
        assert mp.conditional_expectation(bernoulli2, f, 3) == f

    def test_mixed_depth_keys_rejected(self, bernoulli2):
        with pytest.raises(ValidationError):
            mp.conditional_expectation(bernoulli2, {(0,): 1, (0, 1): 1}, 1)
