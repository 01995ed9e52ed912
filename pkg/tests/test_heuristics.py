import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from centralbinom.heuristics import (
    BORDERLINE,
    EXPECT_FINITE,
    EXPECT_INFINITE,
    condition_sum,
    predicted_count,
    prime_exponent,
)

ODD_PRIMES = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]


def sigma_float(primes):
    return math.fsum(-math.log(0.5 + 0.5 / p) / math.log(p) for p in primes)


def test_three_primes():
    rep = condition_sum([3, 5, 7])
    assert rep.verdict == EXPECT_INFINITE
    assert abs(rep.sigma - 0.9740) <= 0.0005
    assert rep.sigma == pytest.approx(sigma_float([3, 5, 7]), abs=1e-12)
    # rounded exponents 0.37, 0.32, 0.29
    assert [round(float(x), 2) for x in rep.per_prime_exponent] == [0.37, 0.32, 0.29]


def test_single_prime():
    rep = condition_sum([3])
    assert rep.sigma == pytest.approx(-math.log(2 / 3) / math.log(3), abs=1e-12)
    assert rep.verdict == EXPECT_INFINITE


def test_five_primes_finite():
    rep = condition_sum([3, 5, 7, 11, 13])
    assert rep.sigma > 1
    assert rep.verdict == EXPECT_FINITE


def test_borderline_verdict_exists():
    assert BORDERLINE not in (EXPECT_FINITE, EXPECT_INFINITE)


def test_predicted_count_examples():
    s = sigma_float([3, 5, 7])
    assert predicted_count([3, 5, 7], 10**6) == pytest.approx(10 ** (6 * (1 - s)), rel=1e-9)
    assert 1.3 < predicted_count([3, 5, 7], 10**6) < 1.5
    assert math.log10(predicted_count([3], 10**6)) == pytest.approx(3.79, abs=0.01)
    assert predicted_count([3, 5, 7], 1) == 1


@given(st.lists(st.sampled_from(ODD_PRIMES), min_size=1, max_size=6, unique=True), st.randoms())
def test_permutation_invariant_and_monotone(primes, rnd):
    shuffled = primes[:]
    rnd.shuffle(shuffled)
    a, b = condition_sum(primes).sigma, condition_sum(shuffled).sigma
    assert a == pytest.approx(b, abs=1e-15)
    extra = next(p for p in ODD_PRIMES + [53] if p not in primes)
    assert condition_sum(primes + [extra]).sigma > a


@pytest.mark.parametrize("p", [3, 101, 10007, 999983])
def test_exponent_range(p):
    e = float(prime_exponent(p))
    assert 0 < e < math.log(2) / math.log(p)


def test_exponent_limit():
    p = 999983
    assert float(prime_exponent(p)) / (math.log(2) / math.log(p)) > 0.9999
