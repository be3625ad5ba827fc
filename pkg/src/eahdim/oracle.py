"""Brute-force and automaton checks at desk scale.

Counting feasible words runs two independent ways: exhaustive enumeration
over all ``S**n`` words, and a dynamic program over a KMP automaton.  The
rest of the module builds the explicit lower-bound set ``L`` and checks the
covering and mass inequalities on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, ResourceError
from .ifs import ENUMERATION_CAP, IfsSpec, Similarity, log_deriv_norm
from .symbolic import MatchDecomposition, Semantics, TargetSpec, Window
from .dimension import epsilon_prime

#: Largest ``(n+1) * (H+1)`` state table the counting DP will allocate.
DP_STATE_CAP = 4_000_000
#: Longest exhaustive reference.
ENUMERATION_MAX_N = 14


@dataclass(frozen=True)
class CountResult:
    n: int
    count: int
    log_rate: float
    semantics: Semantics


def _windows(window: Window, n: int) -> list[int]:
    a = [0] + [int(window(N)) for N in range(1, n + 1)]
    if any(x < 0 for x in a):
        raise InputError("window values must be >= 0")
    return a


def _kmp_table(p: np.ndarray, S: int) -> np.ndarray:
    """``delta[k, c-1]``: automaton state after reading letter ``c`` in state ``k``."""
    n = len(p)
    fail = [0] * (n + 1)
    delta = np.zeros((n + 1, S), dtype=np.int64)
    for k in range(n + 1):
        for c in range(1, S + 1):
            if k < n and p[k] == c:
                delta[k, c - 1] = k + 1
            elif k == 0:
                delta[k, c - 1] = 0
            else:
                delta[k, c - 1] = delta[fail[k], c - 1]
        if 0 < k < n:
            fail[k + 1] = delta[fail[k], p[k] - 1]
    return delta


def _count_dp(S: int, t: TargetSpec, a: list[int], n: int, semantics: Semantics) -> int:
    """Automaton DP over states ``(k, h)``.

    ``k`` is the length of the longest suffix that is a prefix of ``t`` and
    ``h`` the largest ``k`` seen so far (capped at ``max a``).  A match of
    ``t|_1^a`` that starts at ``m + 1 <= N + 1`` is complete by time
    ``N + a``, and conversely any ``k >= a`` seen by then starts early enough,
    so requirement ``N`` reads ``h_{N + a_N} >= a_N``.
    """
    H = max(a)
    if (n + 1) * (H + 1) > DP_STATE_CAP:
        raise ResourceError(f"DP table {(n + 1)} x {(H + 1)} exceeds cap {DP_STATE_CAP}")
    delta = _kmp_table(t.prefix(n), S)
    need = [0] * (n + 1)
    late = []  # requirements that end past the horizon
    for N in range(1, n + 1):
        if a[N] == 0:
            continue
        if N + a[N] <= n:
            need[N + a[N]] = max(need[N + a[N]], a[N])
        else:
            late.append((N, a[N]))
    big = S**n >= 2**62
    table = np.zeros((n + 1, H + 1), dtype=object if big else np.int64)
    table[0, 0] = 1
    hs = np.arange(H + 1)
    for tau in range(1, n + 1):
        new = np.zeros_like(table)
        for k in range(min(tau, n + 1)):
            row = table[k]
            if not row.any():
                continue
            for c in range(S):
                k2 = int(delta[k, c])
                cap = min(k2, H)
                new[k2, cap:] += row[cap:]
                new[k2, cap] += row[:cap].sum()
        if need[tau]:
            new[:, : need[tau]] = 0
        table = new
    ks = np.arange(n + 1)[:, None]
    ok = np.ones((n + 1, H + 1), dtype=bool)
    for N, aN in late:
        cond = hs[None, :] >= aN
        if semantics is Semantics.OPTIMISTIC:
            cond = cond | (n - ks <= N)
        ok &= cond
    return int(table[ok].sum())


def _count_enumerate(S: int, t: TargetSpec, a: list[int], n: int, semantics: Semantics) -> int:
    """Vectorized exhaustive count, chunked by the first letters."""
    if n > ENUMERATION_MAX_N or S**n > ENUMERATION_CAP:
        raise ResourceError(f"enumeration of {S}**{n} words exceeds the reference cap")
    tp = t.prefix(n).astype(np.uint8)
    lead = max(0, n - 10)
    tail_len = n - lead
    tails = np.array(np.unravel_index(np.arange(S**tail_len), (S,) * tail_len)).T + 1 if tail_len else np.zeros((1, 0), int)
    total = 0
    optimistic = semantics is Semantics.OPTIMISTIC
    for head_idx in range(S**lead):
        head = np.array(np.unravel_index(head_idx, (S,) * lead)) + 1 if lead else np.zeros(0, int)
        W = np.concatenate([np.broadcast_to(head, (len(tails), lead)), tails], axis=1).astype(np.uint8)
        best = np.full(len(W), -1)
        alive = np.zeros(len(W), dtype=bool)
        feasible = np.ones(len(W), dtype=bool)
        for m in range(0, n + 1):
            if m < n:
                eq = W[:, m:] == tp[: n - m]
                ell = np.logical_and.accumulate(eq, axis=1).sum(axis=1)
            else:
                ell = np.zeros(len(W), dtype=np.int64)
            best = np.maximum(best, ell)
            alive |= ell == n - m
            if m >= 1 and a[m]:
                hit = best >= a[m]
                if optimistic:
                    hit |= alive
                feasible &= hit
        total += int(feasible.sum())
    return total


def count_eah_words(
    S: int,
    t: TargetSpec,
    window: Window,
    n: int,
    semantics: Semantics = Semantics.PESSIMISTIC,
    method: str = "dp",
) -> CountResult:
    """Number of length-``n`` words over ``1..S`` that hit ``t`` in every window."""
    if S < 2:
        raise InputError("alphabet size must be >= 2")
    if n < 1:
        raise InputError("n must be >= 1")
    t.validate(S)
    semantics = Semantics(semantics)
    a = _windows(window, n)
    if method == "dp":
        count = _count_dp(S, t, a, n, semantics)
    elif method == "enumerate":
        count = _count_enumerate(S, t, a, n, semantics)
    else:
        raise InputError(f"unknown counting method {method!r}")
    log_rate = math.log(count) / n if count else -math.inf
    return CountResult(n, count, log_rate, semantics)


def dim_bracket_series(counts: Sequence[CountResult], ratio: float) -> list[tuple[int, float, float]]:
    """``(n, lower, upper)`` per ladder rung from Pessimistic/Optimistic counts.

    Both ends are ``log count / (n log(1/r))``, which equals the attractor
    dimension for the full shift; a zero count maps to 0.
    """
    if not 0 < ratio < 1:
        raise InputError("ratio must lie in (0, 1)")
    by_n: dict[int, dict[Semantics, int]] = {}
    for c in counts:
        slot = by_n.setdefault(c.n, {})
        if c.semantics in slot:
            raise InputError(f"duplicate {c.semantics.value} count at n = {c.n}")
        slot[c.semantics] = c.count
    scale = -math.log(ratio)
    out = []
    for n in sorted(by_n):
        slot = by_n[n]
        if len(slot) != 2:
            raise InputError(f"n = {n} needs both semantics")
        lo, hi = (math.log(x) / (n * scale) if x else 0.0 for x in (slot[Semantics.PESSIMISTIC], slot[Semantics.OPTIMISTIC]))
        out.append((n, lo, hi))
    return out


def dim_bracket_from_counts(counts: Sequence[CountResult], ratio: float) -> tuple[float, float]:
    """Bracket at the largest ``n`` present."""
    n, lo, hi = dim_bracket_series(counts, ratio)[-1]
    return lo, hi


# -- the explicit set L ------------------------------------------------------


@dataclass(frozen=True)
class LConstruction:
    theta: float
    v: float
    a: float
    n_k: list
    m_k: list
    witness_prefix: np.ndarray
    depth: int
    S: int
    target: TargetSpec


def L_coefficient(theta: float, v: float) -> float:
    return max((5.0 + theta * v) / ((theta - theta * v - 1.0) * theta), (5.0 + theta * v) / (theta**2 * v))


def _smallest_letter_not_in(banned: set, S: int) -> Optional[int]:
    for c in range(1, S + 1):
        if c not in banned:
            return c
    return None


def build_L(t: TargetSpec, theta: float, v: float, depth: int, S: int = 2) -> LConstruction:
    """Run schedule ``n_k = floor(a theta^k)``, ``m_k = floor((theta v + 1) n_k)`` and one point of ``L``.

    Positions strictly inside ``(n_k, m_k)`` copy the target.  Position
    ``m_k`` avoids ``t_{m_k - n_k}`` (and ``t_1`` when the alphabet allows);
    every other position takes the smallest letter other than ``t_1``.
    """
    if not 0 < v < 1:
        raise InputError(f"v must lie in (0, 1), got {v}")
    if not theta * (1.0 - v) > 1.0:
        raise InputError(f"theta = {theta} must exceed 1/(1-v)")
    if S < 2 or depth < 1:
        raise InputError("need S >= 2 and depth >= 1")
    t.validate(S)
    a = L_coefficient(theta, v)
    n_k, m_k = [], []
    k = 1
    while True:
        n = math.floor(a * theta**k)
        m = math.floor((theta * v + 1.0) * n)
        if m > depth:
            break
        n_k.append(n)
        m_k.append(m)
        k += 1
    for i, (n, m) in enumerate(zip(n_k, m_k)):
        nxt = n_k[i + 1] if i + 1 < len(n_k) else None
        if m - n < 2 or (nxt is not None and nxt - m < 2):
            raise InputError(f"run schedule not separated at k = {i + 1}")
    tp = t.prefix(depth + 1)
    t1 = int(tp[0])
    free = _smallest_letter_not_in({t1}, S)
    e = np.full(depth, free, dtype=np.int64)
    for n, m in zip(n_k, m_k):
        e[n : m - 1] = tp[: m - n - 1]
        target_letter = int(tp[m - n - 1])
        e[m - 1] = _smallest_letter_not_in({target_letter, t1}, S) or _smallest_letter_not_in({target_letter}, S)
    return LConstruction(theta, v, a, n_k, m_k, e, depth, S, t)


def forced_positions(Lc: LConstruction, length: int) -> np.ndarray:
    """Boolean mask of positions ``1..length`` fixed by membership in ``L``."""
    mask = np.zeros(length, dtype=bool)
    for n, m in zip(Lc.n_k, Lc.m_k):
        if n >= length:
            break
        mask[n : min(m - 1, length)] = True
    return mask


# -- inequality checks -------------------------------------------------------


def sum_inequality_margins(d: MatchDecomposition, theta: float, v: float, delta: float, epsilon: float) -> list[float]:
    """``sum_{j<=k} (m_j - n_j - 2) - n_k ((theta+delta)v/(theta+delta-1) - eps')`` per filtered ``k``."""
    td = theta + delta
    rate = td * v / (td - 1.0) - epsilon_prime(theta, delta, epsilon)
    out, acc = [], 0
    for n, m in zip(d.n_filtered, d.m_filtered):
        acc += m - n - 2
        out.append(acc - n * rate)
    return out


def verify_sum_inequality(d: MatchDecomposition, theta: float, v: float, delta: float, epsilon: float, k_hat: int) -> bool:
    """Whether the covering inequality holds for every filtered index ``k >= k_hat`` (1-based)."""
    if k_hat < 1:
        raise InputError("k_hat must be >= 1")
    margins = sum_inequality_margins(d, theta, v, delta, epsilon)
    return all(x >= 0 for x in margins[k_hat - 1 :])


def sum_inequality_threshold(d: MatchDecomposition, theta: float, v: float, delta: float, epsilon: float) -> int:
    """Smallest ``k_hat`` from which the inequality holds up to the observed depth."""
    margins = sum_inequality_margins(d, theta, v, delta, epsilon)
    k = len(margins)
    while k > 0 and margins[k - 1] >= 0:
        k -= 1
    return k + 1


# -- discrete measures on L --------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atoms of ``mu_l``: ``words[i]`` carries ``weights[i]``."""

    level: int
    words: np.ndarray
    weights: np.ndarray
    log_norms: np.ndarray

    @property
    def atoms(self) -> dict:
        return {tuple(int(x) for x in w): float(p) for w, p in zip(self.words, self.weights)}


def admissible_words(Lc: LConstruction, l: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """All length-``l`` prefixes of points of ``L``, in lexicographic order."""
    if l < 1:
        raise InputError("level must be >= 1")
    mask = forced_positions(Lc, l)
    n_free = int((~mask).sum())
    S = Lc.S
    if S**n_free > cap:
        raise ResourceError(f"{S}**{n_free} admissible words exceed the cap {cap}")
    tp = Lc.target.prefix(l)
    forced = np.zeros(l, dtype=np.int64)
    for n, m in zip(Lc.n_k, Lc.m_k):
        if n >= l:
            break
        hi = min(m - 1, l)
        forced[n:hi] = tp[: hi - n]
    count = S**n_free
    free_letters = np.array(np.unravel_index(np.arange(count), (S,) * n_free)).T + 1 if n_free else np.zeros((1, 0), int)
    words = np.broadcast_to(forced, (count, l)).copy()
    words[:, ~mask] = free_letters
    return words


def _word_log_norms(ifs: IfsSpec, words: np.ndarray) -> np.ndarray:
    if isinstance(ifs, Similarity):
        return ifs.log_ratios[words - 1].sum(axis=1)
    return np.array([log_deriv_norm(ifs, w) for w in words])


def _normalize(logw: np.ndarray) -> np.ndarray:
    x = np.exp(logw - logw.max())
    return x / x.sum()


def discrete_measure(ifs: IfsSpec, Lc: LConstruction, l: int, s: float) -> DiscreteMeasure:
    """``mu_l(w)`` proportional to ``||f'_w||^s`` over the admissible words of length ``l``."""
    if not s > 0:
        raise InputError("s must be positive")
    if ifs.S != Lc.S:
        raise InputError("alphabet of the IFS and of the construction differ")
    words = admissible_words(Lc, l)
    if len(words) == 0:
        raise InputError("no admissible words at this level")
    logn = _word_log_norms(ifs, words)
    return DiscreteMeasure(l, words, _normalize(s * logn), logn)


def _logsumexp(x: np.ndarray) -> float:
    m = float(x.max())
    return m + math.log(float(np.exp(x - m).sum()))


def cylinder_mass_ratios(ifs: IfsSpec, Lc: LConstruction, k_prime: int, k: int, s: float, K: float = 1.0) -> np.ndarray:
    """``mu_k([p]) / (K^2 ||f'_p||^s / Z_{k'})`` for every admissible ``p`` of length ``k'``."""
    if not k > k_prime >= 1:
        raise InputError("need k > k_prime >= 1")
    if K < 1:
        raise InputError("K must be >= 1")
    coarse = discrete_measure(ifs, Lc, k_prime, s)
    fine = discrete_measure(ifs, Lc, k, s)
    S = Lc.S
    # base-S code of the first k' letters; both arrays are lexicographic
    powers = S ** np.arange(k_prime - 1, -1, -1, dtype=np.int64)
    code_c = (coarse.words - 1) @ powers
    code_f = (fine.words[:, :k_prime] - 1) @ powers
    order = np.searchsorted(code_c, code_f)
    if not np.array_equal(code_c[order], code_f):
        raise InputError("level-k words do not restrict to admissible level-k' words")
    mass = np.bincount(order, weights=fine.weights, minlength=len(code_c))
    bound = K**2 * coarse.weights
    return mass / bound


def cylinder_mass_bound_check(
    ifs: IfsSpec, Lc: LConstruction, k_prime: int, k: int, s: float, K: float = 1.0, rtol: float = 1e-12
) -> bool:
    ratios = cylinder_mass_ratios(ifs, Lc, k_prime, k, s, K)
    return bool(np.all(ratios <= 1.0 + rtol))
