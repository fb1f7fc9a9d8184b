"""Exact radical-sum algebra: canonicalization, arithmetic, signs."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from measurepair.radicals import RadicalSum, sign_of, sqrt_rational


class TestCanonicalization:
    def test_sqrt_of_three_eighths(self):
        # sqrt(3/8) = sqrt(6)/4
        value = sqrt_rational(Fraction(3, 8))
        assert value.terms == {6: Fraction(1, 4)}

    def test_perfect_square_collapses_to_rational(self):
        assert sqrt_rational(Fraction(4)).rational_value() == 2
        assert sqrt_rational(Fraction(1, 36)).rational_value() == Fraction(1, 6)
        assert sqrt_rational(Fraction(9, 16)).rational_value() == Fraction(3, 4)

    def test_sqrt_zero(self):
        assert sqrt_rational(Fraction(0)).is_zero()

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            sqrt_rational(Fraction(-1, 2))

    def test_floats_rejected(self):
        with pytest.raises(TypeError):
            sqrt_rational(0.5)
        with pytest.raises(TypeError):
            RadicalSum.from_rational(0.5)


class TestArithmetic:
    def test_product_of_radicals_recanonicalizes(self):
        # sqrt(6)*sqrt(2) = 2*sqrt(3)
        product = sqrt_rational(6) * sqrt_rational(2)
        assert product.terms == {3: Fraction(2)}

    def test_square_of_binomial(self):
        # (sqrt(6)/4 + sqrt(2)/4)^2 = (2 + sqrt(3)) / 4
        rho = sqrt_rational(Fraction(3, 8)) + sqrt_rational(Fraction(1, 8))
        squared = rho * rho
        assert squared == RadicalSum.from_rational(Fraction(1, 2)) + (
            sqrt_rational(3) * Fraction(1, 4)
        )

    def test_pow_matches_repeated_multiplication(self):
        value = sqrt_rational(Fraction(2, 3)) + Fraction(1, 5)
        assert value**3 == value * value * value
        assert value**0 == RadicalSum.from_rational(1)

    def test_mixed_scalar_arithmetic(self):
        value = Fraction(1, 3) * sqrt_rational(2) + 1
        assert value - 1 == sqrt_rational(2) * Fraction(1, 3)
        assert float(value) == pytest.approx(1 + math.sqrt(2) / 3)

    def test_sum_builtin_with_zero_start(self):
        parts = [sqrt_rational(Fraction(1, 2)), sqrt_rational(Fraction(1, 8))]
        total = sum(parts)
        # sqrt(1/2) + sqrt(1/8) = (3/4) sqrt(2) wait: sqrt(2)/2 + sqrt(2)/4
        assert total.terms == {2: Fraction(3, 4)}


class TestEqualityAndSign:
    def test_linear_independence(self):
        assert sqrt_rational(2) + sqrt_rational(3) != sqrt_rational(5)
        assert (sqrt_rational(2) + sqrt_rational(3) - sqrt_rational(5)).sign() != 0

    def test_sign_fast_paths(self):
        assert (sqrt_rational(2) + sqrt_rational(3)).sign() == 1
        assert (-(sqrt_rational(2) + sqrt_rational(3))).sign() == -1
        assert RadicalSum().sign() == 0

    def test_sign_near_tie(self):
        # 99/70 is the classic upper convergent: sqrt(2) < 99/70
        diff = sqrt_rational(2) - Fraction(99, 70)
        assert diff.sign() == -1
        assert (Fraction(99, 70) - sqrt_rational(2)).sign() == 1

    def test_sign_needs_interval_escalation(self):
        # Pell convergents p/q of sqrt(2) satisfy |sqrt(2) - p/q| ~ 1/(2.4 q^2),
        # far below what certified float evaluation can separate at q ~ 1e16
        p, q = 1, 1
        while q < 10**16:
            p, q = p + 2 * q, p + q
        assert p * p - 2 * q * q in (-1, 1)
        diff = sqrt_rational(2) - Fraction(p, q)
        assert diff.sign() == (1 if 2 * q * q > p * p else -1)

    def test_comparison_operators(self):
        assert sqrt_rational(2) < sqrt_rational(3)
        assert sqrt_rational(Fraction(1, 4)) <= Fraction(1, 2)
        assert sqrt_rational(5) > 2
        assert sign_of(sqrt_rational(7) - sqrt_rational(7)) == 0


@given(
    nums=st.lists(st.integers(min_value=0, max_value=50), min_size=2, max_size=5),
    dens=st.integers(min_value=1, max_value=50),
)
def test_float_agreement(nums, dens):
    values = [Fraction(n, dens) for n in nums]
    total = sum((sqrt_rational(v) for v in values), start=RadicalSum())
    expected = sum(math.sqrt(float(v)) for v in values)
    assert float(total) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(
    a=st.fractions(min_value=0, max_value=10),
    b=st.fractions(min_value=0, max_value=10),
)
def test_sqrt_multiplicativity(a, b):
    assert sqrt_rational(a) * sqrt_rational(b) == sqrt_rational(a * b)
