import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eahdim import InputError, ResourceError
from eahdim.dimension import omega_bounds
from eahdim.ifs import Similarity
from eahdim.oracle import (
    CountResult,
    L_coefficient,
    admissible_words,
    build_L,
    count_eah_words,
    cylinder_mass_bound_check,
    cylinder_mass_ratios,
    dim_bracket_from_counts,
    dim_bracket_series,
    discrete_measure,
    forced_positions,
    sum_inequality_threshold,
    verify_sum_inequality,
)
from eahdim.symbolic import (
    FloorWindow,
    Periodic,
    Semantics,
    decompose_matches,
    eah_feasible,
    estimate_rates,
)

from reference import brute_count

ONE = Periodic((1,))
P, O = Semantics.PESSIMISTIC, Semantics.OPTIMISTIC
HALF_W, THIRD_W = FloorWindow(Fraction(1, 2)), FloorWindow(Fraction(1, 3))


# frozen from the exhaustive reference in tests/reference.py
FROZEN = [
    (2, ONE, HALF_W, 14, 447, 1216),
    (2, ONE, THIRD_W, 14, 4858, 5586),
    (2, Periodic((1, 2)), FloorWindow(0.3), 8, 243, 248),
    (2, Periodic((1, 2)), FloorWindow(0.3), 11, 1400, 1781),
    (3, Periodic((1, 2)), HALF_W, 7, 322, 540),
]


@pytest.mark.parametrize("S,t,w,n,pess,opt", FROZEN)
def test_frozen_counts(S, t, w, n, pess, opt):
    for method in ("dp", "enumerate"):
        assert count_eah_words(S, t, w, n, P, method).count == pess
        assert count_eah_words(S, t, w, n, O, method).count == opt


def test_frozen_counts_match_reference_loop():
    for S, t, w, n, pess, opt in FROZEN:
        if S**n > 5000:
            continue
        tp = t.prefix(n + 1).tolist()
        assert brute_count(S, tp, w, n, False) == pess
        assert brute_count(S, tp, w, n, True) == opt


def test_count_zero_window():
    r = count_eah_words(2, ONE, lambda n: 0, 10)
    assert r.count == 1024 and r.log_rate == pytest.approx(math.log(2))
    assert count_eah_words(2, ONE, lambda n: 0, 10, method="enumerate").count == 1024


def test_count_errors():
    with pytest.raises(InputError):
        count_eah_words(1, ONE, HALF_W, 5)
    with pytest.raises(InputError):
        count_eah_words(2, ONE, HALF_W, 0)
    with pytest.raises(InputError):
        count_eah_words(2, ONE, HALF_W, 5, method="magic")
    with pytest.raises(InputError):
        count_eah_words(2, Periodic((3,)), HALF_W, 5)
    with pytest.raises(InputError):
        count_eah_words(2, ONE, lambda n: -1, 5)
    with pytest.raises(ResourceError):
        count_eah_words(2, ONE, HALF_W, 15, method="enumerate")
    with pytest.raises(ResourceError):
        count_eah_words(2, ONE, lambda n: n, 3000)


@pytest.mark.parametrize("S", [2, 3])
@pytest.mark.parametrize("v", [Fraction(3, 10), Fraction(1, 2)])
@pytest.mark.parametrize("t", [ONE, Periodic((1, 2))], ids=["1", "12"])
def test_dp_equals_enumeration(S, v, t):
    w = FloorWindow(v)
    for n in range(1, 15):
        for sem in Semantics:
            assert count_eah_words(S, t, w, n, sem).count == count_eah_words(S, t, w, n, sem, "enumerate").count


def test_large_counts_and_long_horizons():
    assert count_eah_words(2, ONE, HALF_W, 24, O).count == 47371
    assert count_eah_words(2, ONE, HALF_W, 24, P).count == 16165
    big = count_eah_words(2, ONE, lambda n: 0, 70)
    assert big.count == 2**70 and isinstance(big.count, int)


def test_collapse_above_rate_one():
    for n in range(10, 31):
        assert count_eah_words(2, ONE, FloorWindow(1.2), n, P).count <= n + 1


@settings(max_examples=60)
@given(st.lists(st.integers(1, 2), min_size=2, max_size=30), st.floats(0.05, 1.0))
def test_optimistic_feasibility_is_prefix_closed(e, v):
    w = FloorWindow(round(v, 3))
    t = Periodic((1, 2))
    if eah_feasible(e, t, w, semantics=O):
        assert eah_feasible(e[:-1], t, w, semantics=O)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.fractions(0, 1, max_denominator=8), st.fractions(0, 1, max_denominator=8))
def test_count_monotone_in_window(n, p, q):
    hi, lo = max(p, q), min(p, q)
    for sem in Semantics:
        a = count_eah_words(2, Periodic((1, 2)), FloorWindow(hi), n, sem).count
        b = count_eah_words(2, Periodic((1, 2)), FloorWindow(lo), n, sem).count
        assert a <= b
    assert count_eah_words(2, ONE, FloorWindow(hi), n, P).count <= count_eah_words(2, ONE, FloorWindow(hi), n, O).count


def test_dim_bracket():
    full = [count_eah_words(2, ONE, lambda n: 0, 20, s) for s in Semantics]
    assert dim_bracket_from_counts(full, 0.5) == pytest.approx((1.0, 1.0))
    counts = [count_eah_words(2, ONE, HALF_W, n, s) for n in range(10, 25) for s in Semantics]
    series = dim_bracket_series(counts, 0.5)
    assert [row[0] for row in series] == list(range(10, 25))
    assert all(lo <= hi for _, lo, hi in series)
    zero = [CountResult(5, 0, -math.inf, P), CountResult(5, 3, math.log(3) / 5, O)]
    assert dim_bracket_from_counts(zero, 0.5)[0] == 0.0
    with pytest.raises(InputError):
        dim_bracket_series(counts[:1], 0.5)
    with pytest.raises(InputError):
        dim_bracket_series(counts + counts[:1], 0.5)
    with pytest.raises(InputError):
        dim_bracket_series(counts, 1.5)


def test_L_examples():
    Lc = build_L(ONE, 2, 0.25, 1000)
    assert Lc.a == 5.5 == L_coefficient(2, 0.25)
    assert Lc.n_k[0] == 11 and Lc.m_k[0] == 16
    assert all(m - n >= 2 for n, m in zip(Lc.n_k, Lc.m_k))
    assert all(b - a >= 2 for a, b in zip(Lc.m_k, Lc.n_k[1:]))
    with pytest.raises(InputError):
        build_L(ONE, 1.2, 0.25, 100)
    with pytest.raises(InputError):
        build_L(ONE, 2, 1.0, 100)
    with pytest.raises(InputError):
        build_L(ONE, 2, 0.25, 0)


@pytest.mark.parametrize(
    "t,theta,v,S",
    [(ONE, 2, 0.25, 2), (Periodic((1, 2)), 3, 0.4, 2), (Periodic((1, 2, 2)), 2.5, 0.3, 3), (Periodic((2, 1)), 6, 0.7, 2)],
)
def test_L_round_trip(t, theta, v, S):
    Lc = build_L(t, theta, v, 10**6, S)
    e = Lc.witness_prefix
    tp = t.prefix(10**6)
    for n, m in zip(Lc.n_k, Lc.m_k):
        assert (e[n : m - 1] == tp[: m - n - 1]).all()
        assert e[m - 1] != tp[m - n - 1]
        assert e[n - 1] != tp[0]
    d = decompose_matches(e, t)
    assert d.n_filtered == Lc.n_k and d.m_filtered == Lc.m_k
    r = estimate_rates(d)
    assert abs(r.v_s_hat - theta * v) <= 0.05
    assert abs(r.v_e_hat - v) <= 0.05


def test_forced_positions():
    Lc = build_L(ONE, 2, 0.25, 40)
    mask = forced_positions(Lc, 40)
    assert np.flatnonzero(mask).tolist() == list(range(11, 15)) + list(range(22, 32))


def test_sum_inequality_on_witness():
    d = decompose_matches(build_L(ONE, 2, 0.25, 10**5).witness_prefix, ONE)
    assert verify_sum_inequality(d, 2, 0.25, 0.05, 0.05, 6)
    single = decompose_matches([2] * 10 + [1] * 5 + [2], ONE)
    assert verify_sum_inequality(single, 2, 0.25, 0.05, 0.05, 2)
    with pytest.raises(InputError):
        verify_sum_inequality(d, 2, 0.25, 0.05, 0.05, 0)


def test_sum_inequality_transition():
    # a negligible early run followed by long geometric ones
    e = np.full(5000, 2)
    e[100:102] = 1
    for n in (200, 400, 800, 1600, 3200):
        e[n : n + n // 2] = 1
    d = decompose_matches(e, ONE)
    assert len(d.n_filtered) == 6
    assert not verify_sum_inequality(d, 2, 0.25, 0.05, 0.05, 1)
    k = sum_inequality_threshold(d, 2, 0.25, 0.05, 0.05)
    assert k == 2
    assert verify_sum_inequality(d, 2, 0.25, 0.05, 0.05, k)


def test_discrete_measure_homogeneous_uniform():
    Lc = build_L(ONE, 2, 0.25, 40)
    mu = discrete_measure(Similarity((0.5, 0.5)), Lc, 16, 0.7)
    assert np.allclose(mu.weights, mu.weights[0], rtol=1e-12)
    assert abs(mu.weights.sum() - 1) <= 1e-12
    assert len(mu.atoms) == 2**12


def test_discrete_measure_forced_block():
    Lc = build_L(ONE, 2, 0.25, 40)
    at_entry = admissible_words(Lc, 12)
    inside = admissible_words(Lc, 14)
    # positions 12..14 are forced, so no new branching inside the block
    assert len(inside) == len(at_entry) == 2**11
    assert (inside[:, 11:14] == 1).all()


def test_discrete_measure_weight_ratios():
    ifs = Similarity((0.5, 0.25))
    Lc = build_L(ONE, 2, 0.25, 40)
    s = 0.4
    for level in (3, 9, 20):
        mu = discrete_measure(ifs, Lc, level, s)
        assert abs(mu.weights.sum() - 1) <= 1e-12
        assert (mu.weights > 0).all()
        i, j = 0, len(mu.words) - 1
        expect = math.exp(s * (mu.log_norms[j] - mu.log_norms[i]))
        assert mu.weights[j] / mu.weights[i] == pytest.approx(expect, rel=1e-12)
    with pytest.raises(InputError):
        discrete_measure(ifs, Lc, 5, 0.0)
    with pytest.raises(InputError):
        discrete_measure(Similarity((0.5, 0.2, 0.1)), Lc, 5, 0.5)
    with pytest.raises(ResourceError):
        admissible_words(build_L(ONE, 2, 0.25, 100), 60)


def test_cylinder_mass_bound():
    Lc = build_L(ONE, 2, 0.25, 40)
    half = Similarity((0.5, 0.5))
    assert cylinder_mass_bound_check(half, Lc, 5, 11, 1.0)
    assert cylinder_mass_bound_check(half, Lc, 7, 8, 0.3)
    ifs = Similarity((0.5, 0.25))
    s_minus = omega_bounds(ifs, ONE, 0.25).omega_minus_bound
    assert cylinder_mass_bound_check(ifs, Lc, 8, 16, s_minus)
    ratios = cylinder_mass_ratios(ifs, Lc, 8, 16, s_minus)
    assert np.allclose(ratios, 1.0, rtol=1e-12)
    with pytest.raises(InputError):
        cylinder_mass_ratios(ifs, Lc, 8, 8, s_minus)
    with pytest.raises(InputError):
        cylinder_mass_ratios(ifs, Lc, 2, 4, s_minus, K=0.5)
