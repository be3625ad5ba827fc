import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eahdim import InputError
from eahdim.symbolic import (
    DoublingBlocks,
    ExplicitPrefix,
    FloorWindow,
    Periodic,
    PowerWindow,
    Semantics,
    decompose_matches,
    eah_feasible,
    estimate_rates,
    g_violations,
    in_lambda_t_prefix,
    is_in_G_up_to,
    match_lengths,
    target_digit,
    z_function,
)

from reference import brute_feasible, brute_g_violations

ONE = Periodic((1,))
word_st = st.lists(st.integers(1, 2), min_size=1, max_size=24)


def test_target_digits():
    assert target_digit(Periodic((1,)), 10**9) == 1
    assert target_digit(Periodic((1, 2)), 3) == 1
    with pytest.raises(InputError):
        target_digit(ONE, 0)
    with pytest.raises(InputError):
        Periodic(())
    t = ExplicitPrefix((2, 1, 2), 1)
    assert [t.digit(n) for n in range(1, 7)] == [2, 1, 2, 1, 1, 1]
    assert t.prefix(6).tolist() == [2, 1, 2, 1, 1, 1]


def test_doubling_blocks_schedule():
    # head digit, then blocks of lengths 2, 4, 16, ... alternating letters
    t = DoublingBlocks((3,), (1, 2))
    literal = "3" + "1" * 2 + "2" * 4 + "1" * 16 + "2" * 256
    assert "".join(map(str, t.prefix(len(literal)))) == literal
    assert [t.digit(n) for n in range(1, len(literal) + 1)] == [int(c) for c in literal]
    assert t.digit(279) == 2 and t.digit(280) == 1
    with pytest.raises(InputError):
        DoublingBlocks((1,), (1, 2, 3))


def test_target_validation():
    with pytest.raises(InputError):
        Periodic((1, 3)).validate(2)
    Periodic((1, 2)).validate(2)


def test_floor_window_is_exact():
    assert FloorWindow(0.29)(100) == 29
    assert FloorWindow(Fraction(1, 3))(3) == 1
    assert FloorWindow(1.2).rate == 1.2
    assert PowerWindow(1, 2)(7) == 49 and PowerWindow(1, 2).rate == float("inf")
    assert PowerWindow(1, 0.5).rate == 0.0


def test_z_function_naive():
    rng = random.Random(3)
    for _ in range(50):
        s = [rng.randint(1, 3) for _ in range(rng.randint(1, 40))]
        z = z_function(s)
        for i in range(len(s)):
            k = 0
            while i + k < len(s) and s[k] == s[i + k]:
                k += 1
            assert z[i] == k


def test_g_examples():
    assert is_in_G_up_to(ONE, 1, 10**4).ok
    assert is_in_G_up_to(Periodic((1, 2)), 1, 10**4) == (True, None)
    ok, first = is_in_G_up_to(Periodic((1, 1, 2)), 1, 100)
    assert not ok and tuple(first) == (3, 2, 1)
    viol = g_violations(Periodic((1, 1, 2)), 1, 100)
    assert [tuple(v) for v in viol] == [(n, n - 1, 1) for n in range(3, 101, 3)]
    with pytest.raises(InputError):
        is_in_G_up_to(ONE, 5, 5)


@pytest.mark.parametrize("word", [(1, 1, 2), (1, 2), (1, 2, 1, 1), (2, 1, 1), (1, 2, 2, 1, 2, 1)])
def test_g_matches_literal_definition(word):
    t = Periodic(word)
    got = [tuple(v) for v in g_violations(t, 1, 40)]
    assert got == brute_g_violations(t.prefix(40).tolist(), 1, 40)


def test_decompose_shifted_target():
    e = [2] + [1] * 30 + [2]
    d = decompose_matches(e, ONE)
    assert d.n_prime == [1] and d.m_prime == [32]
    trunc = decompose_matches([2] + [1] * 30, ONE)
    assert trunc.n_prime == [] and trunc.truncated == (1, 30)


def test_decompose_geometric_runs():
    depth = 4**6
    e = np.full(depth, 2)
    runs = {}
    for k in range(1, 6):
        start = 4**k
        e[start : start + 2 ** (k - 1)] = 1  # 1-based positions 4^k+1 .. 4^k+2^{k-1}
        runs[start] = 2 ** (k - 1)
    d = decompose_matches(e, ONE)
    gaps = [m - n - 1 for n, m in zip(d.n_filtered, d.m_filtered)]
    assert d.n_filtered == sorted(runs)
    assert gaps == [runs[n] for n in sorted(runs)]
    assert all(b > a for a, b in zip(gaps, gaps[1:]))
    assert d.check(e, ONE) == []


def test_decompose_no_target_letter():
    d = decompose_matches([2, 2, 2], ONE)
    assert d.n_prime == [] and d.n_filtered == [] and d.truncated is None


@settings(max_examples=200)
@given(word_st, st.sampled_from([(1,), (1, 2), (2, 1), (1, 2, 2)]))
def test_decompose_runs_are_maximal_and_disjoint(e, word):
    t = Periodic(word)
    assert is_in_G_up_to(t, 1, 200).ok
    d = decompose_matches(e, t)
    assert d.check(e, t) == []
    for (n1, m1), (n2, _) in zip(zip(d.n_prime, d.m_prime), zip(d.n_prime[1:], d.m_prime[1:])):
        assert m1 - 1 <= n2
    # every position carrying t_1 outside earlier runs starts a run
    tp = t.prefix(len(e) + 1)
    covered = set()
    for n, m in zip(d.n_prime, d.m_prime):
        covered.update(range(n, m - 1))
    starts = set(d.n_prime) | ({d.truncated[0]} if d.truncated else set())
    limit = d.truncated[0] if d.truncated else len(e)
    for p in range(limit):
        if e[p] == tp[0] and p not in covered:
            assert p in starts


def test_left_maximality_needs_class_G():
    # 112 is outside G: the second greedy run can be pushed one letter left
    t = Periodic((1, 1, 2))
    assert not is_in_G_up_to(t, 1, 10).ok
    d = decompose_matches([1, 1, 1, 2], t)
    assert list(zip(d.n_prime, d.m_prime)) == [(0, 3), (2, 4)]
    assert any("left" in p for p in d.check([1, 1, 1, 2], t))


def test_estimate_rates_geometric():
    # runs of length n_k/2 - 1 at n_k = 4^k: (m - n)/n -> 1/2 and (m - n)/n_{k+1} -> 1/8
    depth = 4**10
    e = np.full(depth, 2)
    for k in range(2, 10):
        n = 4**k
        e[n : n + n // 2 - 1] = 1
    r = estimate_rates(decompose_matches(e, ONE), tail_window=4)
    assert r.v_s_hat == pytest.approx(0.5)
    assert r.v_e_hat == pytest.approx(1 / 8)
    empty = estimate_rates(decompose_matches([2, 2], ONE))
    assert (empty.v_e_hat, empty.v_s_hat) == (0.0, 0.0)
    with pytest.raises(InputError):
        estimate_rates(decompose_matches([2], ONE), 0)


def test_eah_feasible_examples():
    rng = random.Random(11)
    e = [rng.randint(1, 2) for _ in range(20)]
    assert eah_feasible(e, ONE, lambda n: 0)
    assert eah_feasible([1] * 30, ONE, FloorWindow(0.5), semantics=Semantics.OPTIMISTIC)
    assert eah_feasible([1] * 30, ONE, FloorWindow(0.5), semantics=Semantics.PESSIMISTIC)
    with pytest.raises(InputError):
        eah_feasible(e, ONE, lambda n: 0, N_start=0)


def test_eah_feasible_matches_double_loop_length_14():
    rng = random.Random(5)
    a = FloorWindow(0.4)
    for _ in range(300):
        e = [rng.randint(1, 2) for _ in range(14)]
        for t in (ONE, Periodic((1, 2))):
            tp = t.prefix(14).tolist()
            for sem in Semantics:
                assert eah_feasible(e, t, a, semantics=sem) == brute_feasible(e, tp, a, sem is Semantics.OPTIMISTIC)


@settings(max_examples=150)
@given(word_st, st.floats(0.05, 1.3), st.floats(0.0, 1.0))
def test_semantics_and_window_monotonicity(e, v, shrink):
    t = Periodic((1, 2))
    a, b = FloorWindow(round(v, 3)), FloorWindow(round(v * shrink, 3))
    for sem in Semantics:
        if eah_feasible(e, t, a, semantics=sem):
            assert eah_feasible(e, t, b, semantics=sem)
    if eah_feasible(e, t, a, semantics=Semantics.PESSIMISTIC):
        assert eah_feasible(e, t, a, semantics=Semantics.OPTIMISTIC)


def test_in_lambda_examples():
    assert in_lambda_t_prefix(ONE.prefix(100), ONE) == 0
    t12 = Periodic((1, 2))
    assert in_lambda_t_prefix([2, 1] + t12.prefix(98).tolist(), t12) == 2
    # against an all-ones target the 1 in "21" already starts the copy
    assert in_lambda_t_prefix([2, 1] + [1] * 98, ONE) == 1
    assert in_lambda_t_prefix([1, 2] * 50, ONE) is None
    assert in_lambda_t_prefix([], ONE) == 0


def _run_schedule(rng, v, depth, free=2):
    """A point whose maximal copies of the all-ones target satisfy v_e >= v."""
    e = np.full(depth, free)
    n = rng.randint(5, 40)
    length = max(2, int(n * rng.uniform(v / (1 - v), 3.0 * v / (1 - v) + 0.5)))
    while n + length + 1 <= depth:
        e[n : n + length] = 1
        m = n + length + 1
        nxt = rng.randint(m + 1, max(m + 1, int(length / v)))
        n = nxt
        length = max(length + 1, int(length * rng.uniform(1.0, 2.5)))
    return e


def test_rates_relation_on_constructed_families():
    # limsup rate is at least v_e/(1 - v_e) along run schedules
    rng = random.Random(2024)
    checked = 0
    for _ in range(200):
        v = rng.uniform(0.1, 0.6)
        e = _run_schedule(rng, v, 10**5)
        r = estimate_rates(decompose_matches(e, ONE))
        if 0 < r.v_e_hat < 1:
            assert r.v_s_hat >= r.v_e_hat / (1 - r.v_e_hat) - 0.02
            checked += 1
    assert checked > 100


def test_rates_on_random_points():
    # away from shifted target copies, a random e has v_e_hat <= v_s_hat up to truncation slack
    rng = random.Random(9)
    for _ in range(200):
        e = [rng.randint(1, 2) for _ in range(rng.randint(50, 2000))]
        for t in (ONE, Periodic((1, 2))):
            if in_lambda_t_prefix(e, t) is not None:
                continue
            r = estimate_rates(decompose_matches(e, t))
            assert r.v_e_hat <= r.v_s_hat + 2 / r.tail_window


def test_match_lengths_against_scan():
    rng = random.Random(4)
    e = np.array([rng.randint(1, 2) for _ in range(60)])
    tp = Periodic((1, 1, 2)).prefix(60)
    ell = match_lengths(e, tp)
    for p in range(60):
        k = 0
        while p + k < 60 and e[p + k] == tp[k]:
            k += 1
        assert ell[p] == k
