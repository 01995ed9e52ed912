import io
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from centralbinom.core_arith import kummer_valuation
from centralbinom.digit_search import (
    DigitConstraintProblem,
    census,
    checkpoint_load,
    checkpoint_resume,
    checkpoint_save,
    decode_checkpoint,
    encode_checkpoint,
    enumerate_prefix_pruned,
    enumerate_qualifying,
    PrefixSearch,
    resolve_caps,
    run_partitioned,
)
from centralbinom.errors import CheckpointCorrupt, FingerprintMismatch


def digits_ok(n, primes, caps):
    for p, c in zip(primes, caps):
        m = n
        while m:
            m, d = divmod(m, p)
            if d > c:
                return False
    return True


def brute(primes, caps, limit):
    return [n for n in range(1, limit + 1) if digits_ok(n, primes, caps)]


def test_cap_presets():
    assert resolve_caps_list([3, 5, 7], "half") == [1, 2, 3]
    assert resolve_caps_list([3, 5, 7], "third") == [1, 1, 2]
    assert resolve_caps_list([3, 5], [0, 4]) == [0, 4]


def resolve_caps_list(primes, caps):
    from centralbinom.core_arith import PrimeSet

    return list(resolve_caps(PrimeSet(primes), caps))


def test_small_limit_example():
    got = enumerate_qualifying(DigitConstraintProblem.create([3, 5, 7], 20))
    assert 1 in got and 10 in got and 2 not in got
    assert got == brute([3, 5, 7], [1, 2, 3], 20)


def test_contains_756_757():
    got = enumerate_prefix_pruned(DigitConstraintProblem.create([3, 5, 7], 1000))
    assert {756, 757} <= set(got)


def test_zero_cap_empty():
    assert enumerate_qualifying(DigitConstraintProblem.create([3], 100, caps=[0])) == []
    assert enumerate_prefix_pruned(DigitConstraintProblem.create([3], 100, caps=[0])) == []


def test_limit_1e7_contains_3160():
    got = enumerate_prefix_pruned(DigitConstraintProblem.create([3, 5, 7], 10**7))
    assert 3160 in got
    assert all(digits_ok(n, [3, 5, 7], [1, 2, 3]) for n in got)


def test_fewer_primes_superset():
    a = set(enumerate_qualifying(DigitConstraintProblem.create([3, 5, 7], 10**4)))
    b = set(enumerate_qualifying(DigitConstraintProblem.create([3, 5], 10**4)))
    assert a <= b


def test_kummer_equivalence_1e5():
    prob = DigitConstraintProblem.create([3, 5, 7], 10**5)
    got = set(enumerate_qualifying(prob))
    oracle = {n for n in range(1, 10**5 + 1) if all(kummer_valuation(n, p).valuation == 0 for p in (3, 5, 7))}
    assert got == oracle


def test_base3_structure():
    prob = DigitConstraintProblem.create([3, 5, 7], 10**6)
    for n in enumerate_prefix_pruned(prob):
        m = n
        while m:
            m, d = divmod(m, 3)
            assert d in (0, 1)


@given(
    st.lists(st.sampled_from([3, 5, 7, 11, 13]), min_size=1, max_size=3, unique=True),
    st.integers(1, 3000),
    st.sampled_from(["half", "third"]),
)
def test_enumerators_agree(primes, limit, caps):
    prob = DigitConstraintProblem.create(primes, limit, caps=caps)
    a = enumerate_qualifying(prob)
    assert a == enumerate_prefix_pruned(prob)
    assert a == brute(prob.primes, prob.caps, limit)


@given(st.floats(0.01, 0.99), st.integers(1, 3000))
def test_relaxed_superset(eps, limit):
    exact = set(enumerate_qualifying(DigitConstraintProblem.create([3, 5, 7], limit)))
    relaxed = DigitConstraintProblem.create([3, 5, 7], limit, relax_epsilon=eps)
    got = enumerate_qualifying(relaxed)
    assert exact <= set(got)
    assert got == enumerate_prefix_pruned(relaxed)
    for n in got[:50]:
        for j, p in enumerate(relaxed.primes):
            bad, count = relaxed.violations(n, j)
            assert bad <= math.ceil(eps * count)


def test_census_base3():
    prob = DigitConstraintProblem.create([3], 3**10)
    rows = census(prob)
    assert rows[-1].bound == 3**10
    assert rows[-1].count == 2**10  # 3**10 itself is [0,...,0,1]
    prob2 = DigitConstraintProblem.create([3], 3**10 - 1)
    assert census(prob2)[-1].count == 2**10 - 1


def test_census_monotone():
    rows = census(DigitConstraintProblem.create([3, 5], 2**20))
    counts = [r.count for r in rows]
    assert counts == sorted(counts)
    assert rows[-1].bound == 2**20


def test_census_three_primes():
    rows = census(DigitConstraintProblem.create([3, 5, 7], 10**4))
    assert rows[-1].count >= 4


def test_checkpoint_round_trip_and_resume():
    prob = DigitConstraintProblem.create([3, 5, 7], 10**6)
    full = enumerate_prefix_pruned(prob)
    search = PrefixSearch(prob)
    search.run(node_budget=1)
    total_nodes = PrefixSearch(prob)
    total_nodes.run()
    budget = total_nodes.state.nodes // 2
    search = PrefixSearch(prob)
    assert search.run(node_budget=budget) is False
    blob = encode_checkpoint(search.state)
    restored = decode_checkpoint(blob)
    assert restored.frontier == search.state.frontier
    assert restored.found == search.state.found
    buf = io.BytesIO()
    checkpoint_save(search.state, buf)
    buf.seek(0)
    state = checkpoint_resume(buf, prob)
    resumed = PrefixSearch(prob, state)
    assert resumed.run() is True
    assert resumed.result() == full


def test_checkpoint_fingerprint_mismatch():
    prob = DigitConstraintProblem.create([3, 5, 7], 10**6)
    search = PrefixSearch(prob)
    search.run(node_budget=10)
    buf = io.BytesIO()
    checkpoint_save(search.state, buf)
    buf.seek(0)
    with pytest.raises(FingerprintMismatch):
        checkpoint_resume(buf, DigitConstraintProblem.create([3, 5, 7], 10**6, caps="third"))


def test_checkpoint_corruption():
    prob = DigitConstraintProblem.create([3, 5, 7], 10**6)
    search = PrefixSearch(prob)
    search.run(node_budget=10)
    blob = encode_checkpoint(search.state)
    with pytest.raises(CheckpointCorrupt):
        decode_checkpoint(blob[:-9])
    flipped = bytearray(blob)
    flipped[50] ^= 1
    with pytest.raises(CheckpointCorrupt):
        decode_checkpoint(bytes(flipped))
    with pytest.raises(CheckpointCorrupt):
        checkpoint_load(io.BytesIO(b"XXXX" + blob[4:]))


def test_partitioned_matches_serial():
    prob = DigitConstraintProblem.create([3, 5, 7], 10**6)
    serial = enumerate_prefix_pruned(prob)
    st = run_partitioned(prob, workers=2)
    assert st.done and st.found == serial
