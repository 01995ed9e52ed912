import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from centralbinom.fourier import (
    ExpCurve,
    FourierInstance,
    LemmaInstance,
    alternating_curve,
    build_A,
    counterexample_remark,
    discretize_curve,
    epsilon_for,
    exceptional_set,
    find_witness,
    lemma_constant,
    lemma_lower_bound,
    spectrum,
    tightness_example,
    tightness_instance,
    transform,
    triple_sumset,
    verify_conclusion,
)


def A_oracle(p, P, H):
    """Direct enumeration of sum d_i ceil(P / p**i) + x."""
    weights = [-(-P // p**i) for i in range(1, H + 1)]
    digs = range(0, (p - 1) // 10 + 1)
    out = set()
    for ds in itertools.product(digs, repeat=H):
        base = sum(d * w for d, w in zip(ds, weights))
        out.update((base + x) % P for x in range(weights[-1]))
    return sorted(out)


def test_build_A_p11():
    A = build_A(11, 1009, 1)
    assert list(A) == A_oracle(11, 1009, 1)
    assert len(A) >= 1009 / 10
    assert len(A) == len(set(A.tolist()))


def test_build_A_p31():
    A = build_A(31, 1009, 1)
    assert list(A) == A_oracle(31, 1009, 1)
    assert (31 - 1) // 10 == 3


@pytest.mark.parametrize("p,P,H", [(11, 1009, 1), (31, 1009, 1), (11, 14669, 2), (13, 28573, 2), (41, 1693, 1)])
def test_build_A_distinct_above_threshold(p, P, H):
    assert P > p ** (2 * H)
    A = build_A(p, P, H)
    assert len(np.unique(A)) == len(A)
    assert list(A) == A_oracle(p, P, H)


def test_build_A_rejects():
    with pytest.raises(ValueError):
        build_A(11, 1009, 0)
    with pytest.raises(ValueError):
        build_A(11, 101, 1)


def test_epsilon():
    assert 1009 ** epsilon_for(1009, 1) == pytest.approx(10)


def test_discretize_one_dim():
    F = discretize_curve(ExpCurve((1.0,), (2.0,)), 101)
    expected = sorted({math.floor(101 * 2**t) % 101 for t in np.linspace(0, 1, 200_001)[:-1]})
    assert sorted(F[:, 0].tolist()) == expected
    assert len(F) == 101


def step_scan(curve, P, steps):
    t = np.linspace(0, 1, steps, endpoint=False)
    cells = np.floor(P * curve(t)).astype(np.int64) % P
    return {tuple(c) for c in cells.tolist()}


def test_discretize_two_dim_vs_scan():
    curve = ExpCurve((1.0, 1.0), (2.0, 3.0))
    F = discretize_curve(curve, 101)
    got = {tuple(c) for c in F.tolist()}
    scan = step_scan(curve, 101, 400_000)
    assert scan <= got
    assert len(got - scan) <= 2
    assert 101 / 2 <= len(F) <= 3 * 101
    assert len(F) > 101 / math.log(101)


@given(st.floats(0.2, 3.0), st.floats(1.1, 6.0), st.sampled_from([53, 101, 211]))
def test_discretize_scan_subset(z, th, P):
    curve = ExpCurve((z,), (th,))
    got = {tuple(c) for c in discretize_curve(curve, P).tolist()}
    scan = step_scan(curve, P, 50_000)
    assert scan <= got


def test_discretize_decreasing_curve():
    curve = alternating_curve(2)
    F = discretize_curve(curve, 211)
    scan = step_scan(curve, 211, 200_000)
    assert scan <= {tuple(c) for c in F.tolist()}


@pytest.mark.parametrize("P", [101, 1009, 2003])
def test_parseval_exact_angles(P):
    rng = np.random.default_rng(P)
    A = np.unique(rng.integers(0, P, P // 3))
    T = transform(A, P)
    assert abs((np.abs(T) ** 2).sum() - P * len(A)) <= 1e-6 * P * len(A)
    assert T[0] == pytest.approx(len(A))


def test_transform_matches_definition():
    P = 211
    A = np.array([0, 3, 17, 100])
    T = transform(A, P)
    for s in (1, 5, 210):
        ref = sum(np.exp(2j * np.pi * a * s / P) for a in A)
        assert T[s] == pytest.approx(ref, abs=1e-10)


def test_fft_branch_agrees():
    P = 2011
    A = build_A(11, P, 1)
    T = transform(A, P)
    s = np.arange(0, P, 97)
    ref = np.exp(2j * np.pi * np.outer(s, A) / P).sum(axis=1)
    assert np.allclose(T[s], ref, atol=1e-8)
    assert abs((np.abs(T) ** 2).sum() - P * len(A)) <= 1e-6 * P * len(A)


def test_separability():
    P = 101
    rng = np.random.default_rng(5)
    A1, A2 = np.unique(rng.integers(0, P, 20)), np.unique(rng.integers(0, P, 15))
    T1, T2 = transform(A1, P), transform(A2, P)
    for s1, s2 in rng.integers(0, P, (1000, 2)):
        direct = np.exp(2j * np.pi * (np.add.outer(A1 * s1, A2 * s2) % P) / P).sum()
        prod = T1[s1] * T2[s2]
        assert abs(direct - prod) <= 1e-9 * max(1.0, abs(direct))


@pytest.mark.parametrize("p,P,H", [(11, 1009, 1), (31, 1009, 1), (11, 2003, 1)])
def test_triple_sumset(p, P, H):
    A = build_A(p, P, H)
    direct = np.zeros(P, dtype=bool)
    pair = np.unique(np.add.outer(A, A).ravel() % P)
    direct[np.unique(np.add.outer(pair, A).ravel() % P)] = True
    assert np.array_equal(triple_sumset(A, P), direct)


@pytest.mark.parametrize("p,P,H", [(11, 1009, 1), (31, 1009, 1), (11, 14669, 2)])
def test_triple_sumset_scaled_digits(p, P, H):
    """Each integer sum of three elements of A, divided by P, is within 4/p**H above a number with digits <= 3p/10."""
    A = build_A(p, P, H)
    sums = np.unique(np.add.outer(np.add.outer(A, A).ravel(), A).ravel())
    digit_max = math.floor(3 * p / 10)
    tops = [sum(e * p ** (H - 1 - i) for i, e in enumerate(es)) for es in itertools.product(range(digit_max + 1), repeat=H)]
    tops = np.array(sorted(tops), dtype=float) / p**H
    y = sums / P
    idx = np.searchsorted(tops, y, side="right") - 1
    assert np.all(idx >= 0)
    assert np.all(y - tops[idx] < 4 / p**H)


def desk_instance():
    return FourierInstance.from_digits([11], 1009, 1, ExpCurve((1 / 11,), (11.0,)))


def test_spectrum_desk_instance():
    inst = desk_instance()
    spectrum_report = spectrum(inst)
    assert (0,) in spectrum_report.Q_prime
    # |Q| against Parseval with slack 4
    assert spectrum_report.Q_count <= 4 * spectrum_report.parseval_bound
    mags = np.abs(inst.transforms[0])
    assert spectrum_report.Q_count == int((mags >= inst.q_threshold * (1 - 1e-9)).sum())


def test_full_set_spectrum():
    inst = FourierInstance.custom(101, [np.arange(101)], ExpCurve((1.0,), (2.0,)), 0.01)
    spectrum_report = spectrum(inst)
    assert spectrum_report.Q_prime == [(0,)]
    assert spectrum_report.Q_count == 1
    assert not exceptional_set(inst, spectrum_report).any()


def test_spectrum_two_dims_vs_brute():
    curve = ExpCurve((1.0, 1.0), (2.0, 3.0))
    rng = np.random.default_rng(2)
    A = [np.unique(rng.integers(0, 101, 30)), np.unique(rng.integers(0, 101, 40))]
    inst = FourierInstance.custom(101, A, curve, 0.05)
    spectrum_report = spectrum(inst)
    m1, m2 = (np.abs(t) for t in inst.transforms)
    thr = inst.q_threshold * (1 - 1e-9)
    assert spectrum_report.Q_count == int((np.outer(m1, m2) >= thr).sum())
    cent = np.where(np.arange(101) > 50, np.arange(101) - 101, np.arange(101))
    brute = sorted(
        (int(cent[a]), int(cent[b]))
        for a, b in zip(*np.nonzero(np.outer(m1, m2) >= thr))
        if abs(cent[a]) <= inst.q_prime_bound and abs(cent[b]) <= inst.q_prime_bound
    )
    assert spectrum_report.Q_prime == brute


def test_exceptional_desk_instance():
    inst = desk_instance()
    E = exceptional_set(inst)
    assert E.sum() / len(inst.F) <= 0.2


def test_exceptional_adversarial_curve():
    P = 1009
    eps = 0.08
    A = np.arange(math.ceil(P ** (1 - eps)))
    inst = FourierInstance.custom(P, [A, A], alternating_curve(2), eps)
    spectrum_report = spectrum(inst)
    E = exceptional_set(inst, spectrum_report)
    assert E.any()
    _, times = discretize_curve(inst.curve, P, with_times=True)
    assert np.median(times[E]) < np.median(times)
    # brute force definition of E
    thr = inst.e_threshold
    for i, x in enumerate(inst.F):
        near = any(
            min((x @ np.array(s)) % P, P - (x @ np.array(s)) % P) / P < thr for s in spectrum_report.Q_prime if any(s)
        )
        assert near == E[i]


def test_verify_conclusion_desk():
    inst = desk_instance()
    rep = verify_conclusion(inst, 100, seed=0)
    assert rep.trials == 100
    assert rep.rate >= 0.95


def test_witness_without_delta_slack():
    """Stricter than the conclusion: delta = 0, i.e. n x + beta must land in 3A itself."""
    inst = desk_instance()
    windows = [triple_sumset(a, inst.P) for a in inst.A_sets]
    rng = np.random.default_rng(1)
    hits = 0
    for _ in range(100):
        x = inst.F[rng.integers(len(inst.F))]
        beta = rng.integers(0, inst.P, 1)
        hits += find_witness(inst, x, beta, windows) is not None
    assert hits >= 95


def test_least_witness_is_one():
    inst = desk_instance()
    three = triple_sumset(inst.A_sets[0], inst.P)
    x = int(np.flatnonzero(three)[5])
    n, deltas = find_witness(inst, [x], [0])
    assert n == 1 and deltas == (0,)


def test_verify_is_deterministic():
    inst = desk_instance()
    a = verify_conclusion(inst, 30, seed=4)
    b = verify_conclusion(inst, 30, seed=4)
    assert a == b


def test_remark_r2():
    rep = counterexample_remark(2, 10007)
    assert rep.coordinatewise_hits == 0
    assert rep.origin_degenerate
    assert rep.cells_checked > 0
    assert rep.first_coordinatewise_n_beyond is not None
    assert rep.first_coordinatewise_n_beyond > rep.n_max


def test_remark_rejects_r1():
    with pytest.raises(ValueError):
        counterexample_remark(1, 1009)


def test_lemma_examples():
    rep = lemma_lower_bound(LemmaInstance((5.0,), (2.0,), (0.3, 0.6)))
    assert rep.bound == pytest.approx(5.0)
    assert rep.holds and rep.value >= 5.0
    rep2 = lemma_lower_bound(LemmaInstance((1.0, -1.0), (2.0, 3.0), (0.1, 0.3, 0.5, 0.7)))
    assert rep2.holds
    top = max(abs(2**v - 3**v) for v in (0.1, 0.3, 0.5, 0.7))
    assert rep2.value == pytest.approx(top, rel=1e-12)


def test_lemma_constant_one_term():
    assert lemma_constant([0.5], [3.0]) == 0.5
    assert lemma_constant([4.0], [3.0]) == 1.0


def test_lemma_constant_recursion_by_hand():
    # one level: i0 = 0 (largest |c|), j0 = 1; ratio x_0/x_1 = 2/3
    c = lemma_constant([2.0, 3.0], [5.0, 1.0])
    ratio = 2 / 3
    expected = abs(math.log(ratio)) * min(1.0, 3.0) * min(1.0, ratio)
    assert c == pytest.approx(expected)
    assert lemma_constant([2.0, 3.0], [5.0, 1.0], halve=True) == pytest.approx(expected / 2)


def test_lemma_instance_validation():
    with pytest.raises(ValueError):
        LemmaInstance((1.0,), (2.0,), (0.1,))
    with pytest.raises(ValueError):
        LemmaInstance((1.0, 1.0), (2.0, 2.0), (0.1, 0.2, 0.3, 0.4))
    with pytest.raises(ValueError):
        LemmaInstance((1.0,), (2.0,), (0.5, 0.2))


def test_tightness_scaling():
    rows = [tightness_example(3, d) for d in (1e-2, 1e-3, 1e-4)]
    ratios = [q for _, q in rows]
    cap = (2**3) ** 2
    for d, q in zip((1e-2, 1e-3, 1e-4), ratios):
        assert q <= cap * math.exp(2 * 2**3 * d)
    assert ratios[0] >= ratios[1] >= ratios[2]


def test_tightness_instance_matches():
    inst = tightness_instance(3, 1e-3)
    top, _ = tightness_example(3, 1e-3)
    rep = lemma_lower_bound(inst)
    assert rep.value == pytest.approx(top, rel=1e-9)
    assert rep.holds
