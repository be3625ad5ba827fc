"""Symbolic dynamics of a point ``e`` against a target sequence ``t``.

Words are 1-based letter sequences; positions in docstrings are 1-based as
well, so ``e|_i^j`` means letters ``i..j`` inclusive.  Internally arrays are
0-based numpy int64.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InputError


class Semantics(str, enum.Enum):
    """How a finite prefix treats windows that run past its end."""

    OPTIMISTIC = "optimistic"
    PESSIMISTIC = "pessimistic"


def _letters(word, what: str) -> tuple[int, ...]:
    out = tuple(int(x) for x in word)
    if any(x < 1 for x in out):
        raise InputError(f"{what}: letters are 1-based positive integers")
    return out


class TargetSpec:
    """A deterministic infinite target sequence ``t``."""

    def digit(self, n: int) -> int:
        raise NotImplementedError

    def prefix(self, length: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def letters(self) -> set[int]:
        raise NotImplementedError

    def validate(self, S: int) -> None:
        bad = [x for x in self.letters if not 1 <= x <= S]
        if bad:
            raise InputError(f"target letters {sorted(bad)} outside alphabet 1..{S}")


@dataclass(frozen=True)
class Periodic(TargetSpec):
    word: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "word", _letters(self.word, "Periodic"))
        if not self.word:
            raise InputError("periodic target needs a nonempty word")

    @property
    def period(self) -> int:
        return len(self.word)

    @property
    def letters(self):
        return set(self.word)

    def digit(self, n):
        return self.word[(n - 1) % len(self.word)]

    def prefix(self, length):
        return np.resize(np.asarray(self.word, dtype=np.int64), length)


@dataclass(frozen=True)
class ExplicitPrefix(TargetSpec):
    prefix_word: tuple[int, ...]
    tail_fill: int

    def __post_init__(self):
        object.__setattr__(self, "prefix_word", _letters(self.prefix_word, "ExplicitPrefix"))
        _letters([self.tail_fill], "ExplicitPrefix")

    @property
    def letters(self):
        return set(self.prefix_word) | {self.tail_fill}

    def digit(self, n):
        return self.prefix_word[n - 1] if n <= len(self.prefix_word) else self.tail_fill

    def prefix(self, length):
        out = np.full(length, self.tail_fill, dtype=np.int64)
        k = min(length, len(self.prefix_word))
        out[:k] = self.prefix_word[:k]
        return out


@dataclass(frozen=True)
class DoublingBlocks(TargetSpec):
    """``head`` followed by blocks of lengths 2, 4, 16, 256, ... = ``2**(2**i)``.

    Blocks alternate between ``block_letters[0]`` and ``block_letters[1]``,
    so each block is the square of the previous one in length and dominates
    everything before it.
    """

    head: tuple[int, ...]
    block_letters: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "head", _letters(self.head, "DoublingBlocks head"))
        bl = _letters(self.block_letters, "DoublingBlocks block_letters")
        if len(bl) != 2:
            raise InputError("DoublingBlocks needs exactly two block letters")
        object.__setattr__(self, "block_letters", bl)

    @property
    def letters(self):
        return set(self.head) | set(self.block_letters)

    def digit(self, n):
        if n <= len(self.head):
            return self.head[n - 1]
        offset = n - len(self.head)
        i = 0
        while offset > 2 ** (2**i):
            offset -= 2 ** (2**i)
            i += 1
        return self.block_letters[i % 2]

    def prefix(self, length):
        out = np.empty(length, dtype=np.int64)
        k = min(length, len(self.head))
        out[:k] = self.head[:k]
        pos, i = k, 0
        while pos < length:
            size = min(2 ** (2**i), length - pos)
            out[pos : pos + size] = self.block_letters[i % 2]
            pos += size
            i += 1
        return out


def target_digit(t: TargetSpec, n: int) -> int:
    if n < 1:
        raise InputError("target digits are indexed from 1")
    return t.digit(n)


# -- windows a_n -------------------------------------------------------------


def _exact(x) -> Fraction:
    # decimal literals such as 0.29 are taken at face value: floor(0.29 * 100) == 29
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class FloorWindow:
    """``a_n = floor(v n)``, computed in exact rational arithmetic.

    ``v`` may be a :class:`~fractions.Fraction`; a float is read as the decimal
    it prints as.
    """

    v: float | Fraction

    @property
    def rate(self) -> float:
        return float(self.v)

    def __call__(self, n: int) -> int:
        return math.floor(_exact(self.v) * n)


@dataclass(frozen=True)
class PowerWindow:
    """``a_n = floor(c n**p)``; its rate ``lim a_n/n`` is 0, ``c`` or infinity."""

    coeff: float = 1.0
    power: float = 2.0

    @property
    def rate(self) -> float:
        if self.power > 1:
            return math.inf
        if self.power < 1:
            return 0.0
        return float(self.coeff)

    def __call__(self, n: int) -> int:
        return math.floor(self.coeff * n**self.power)


Window = Callable[[int], int]


# -- string machinery --------------------------------------------------------


def z_function(seq) -> list[int]:
    """``z[i]`` = length of the longest common prefix of ``seq`` and ``seq[i:]``."""
    s = list(seq)
    n = len(s)
    z = [0] * n
    if n:
        z[0] = n
    left = right = 0
    for i in range(1, n):
        if i < right:
            z[i] = min(right - i, z[i - left])
        while i + z[i] < n and s[z[i]] == s[i + z[i]]:
            z[i] += 1
        if i + z[i] > right:
            left, right = i, i + z[i]
    return z


def match_lengths(e: np.ndarray, t_prefix: np.ndarray) -> list[int]:
    """``out[p]`` = longest ``l`` with ``e[p:p+l] == t_prefix[:l]`` (0-based ``p``)."""
    L = len(e)
    if L == 0:
        return []
    z = z_function(np.concatenate([t_prefix[:L], [-1], e]).tolist())
    return [min(z[L + 1 + p], L - p) for p in range(L)]


def _lcp_at(e: np.ndarray, p: int, tp: np.ndarray) -> int:
    L = len(e)
    n, step = 0, 8
    while p + n < L:
        k = min(step, L - p - n)
        neq = np.flatnonzero(e[p + n : p + n + k] != tp[n : n + k])
        if neq.size:
            return n + int(neq[0])
        n += k
        step *= 4
    return n


# -- class G -----------------------------------------------------------------


class GViolation(NamedTuple):
    n: int
    m: int
    j: int


class GCheck(NamedTuple):
    ok: bool
    first_violation: Optional[GViolation]


def g_violations(t: TargetSpec, N0: int, n_max: int) -> list[GViolation]:
    """All ``(n, m, j)`` with ``N0 < n <= n_max`` where changing ``t_n`` to ``j``
    makes ``t|_m^n`` a prefix of ``t``, sorted lexicographically.

    ``t(n,j)|_m^n = t|_1^{n-m+1}`` needs ``t|_m^{n-1} = t|_1^{n-m}`` and
    ``j = t_{n-m+1} != t_n``; that is exactly ``lcp(t|_m, t) == n - m``, so one
    Z-array of the prefix locates every violation.
    """
    if not 1 <= N0 < n_max:
        raise InputError("need 1 <= N0 < n_max")
    tp = t.prefix(n_max)
    z = z_function(tp.tolist())
    out = []
    for m in range(2, n_max + 1):
        k = z[m - 1]
        n = m + k
        if k >= 1 and N0 < n <= n_max:
            out.append(GViolation(n, m, int(tp[k])))
    out.sort()
    return out


def is_in_G_up_to(t: TargetSpec, N0: int, n_max: int) -> GCheck:
    viol = g_violations(t, N0, n_max)
    return GCheck(not viol, viol[0] if viol else None)


# -- match decomposition -----------------------------------------------------


@dataclass(frozen=True)
class MatchDecomposition:
    """Maximal runs ``e|_{n'+1}^{m'-1} = t|_1^{m'-n'-1}`` and their record subsequence."""

    n_prime: list[int]
    m_prime: list[int]
    n_filtered: list[int]
    m_filtered: list[int]
    depth: int
    truncated: Optional[tuple[int, int]] = None  # (n', matched length) of a run hitting the end

    def check(self, e_prefix, t: TargetSpec) -> list[str]:
        """Problems with this decomposition against ``e_prefix``; empty when consistent."""
        e = np.asarray(e_prefix, dtype=np.int64)
        tp = t.prefix(len(e) + 1)
        problems = []
        for n, m in zip(self.n_prime, self.m_prime):
            if not n < m <= len(e):
                problems.append(f"bad bounds ({n}, {m})")
                continue
            if not np.array_equal(e[n : m - 1], tp[: m - n - 1]):
                problems.append(f"run ({n}, {m}) does not copy the target")
            if e[m - 1] == tp[m - n - 1]:
                problems.append(f"run ({n}, {m}) extends to the right")
            if n >= 1 and np.array_equal(e[n - 1 : m - 1], tp[: m - n]):
                problems.append(f"run ({n}, {m}) extends to the left")
        gaps = [m - n for n, m in zip(self.n_filtered, self.m_filtered)]
        if any(b <= a for a, b in zip(gaps, gaps[1:])):
            problems.append("filtered run lengths not strictly increasing")
        return problems


def decompose_matches(e_prefix, t: TargetSpec) -> MatchDecomposition:
    """Greedy left-to-right decomposition of ``e_prefix`` into maximal target copies.

    A run starts at every position carrying ``t_1`` that is not inside the
    previous run; scanning resumes at the mismatch letter that ended a run.
    A run still matching at the end of the prefix is reported in
    ``truncated`` and not emitted.
    """
    e = np.asarray(e_prefix, dtype=np.int64)
    L = len(e)
    tp = t.prefix(L + 1)
    n_prime, m_prime = [], []
    truncated = None
    pos = 0
    for p in np.flatnonzero(e == tp[0]).tolist():
        if p < pos:
            continue
        length = _lcp_at(e, p, tp)
        if p + length >= L:
            truncated = (p, length)
            break
        n_prime.append(p)
        m_prime.append(p + length + 1)
        pos = p + length
    n_f, m_f = [], []
    for n, m in zip(n_prime, m_prime):
        if not n_f or m - n > m_f[-1] - n_f[-1]:
            n_f.append(n)
            m_f.append(m)
    return MatchDecomposition(n_prime, m_prime, n_f, m_f, L, truncated)


@dataclass(frozen=True)
class RateEstimate:
    v_e_hat: float
    v_s_hat: float
    depth: int
    tail_window: int


def estimate_rates(d: MatchDecomposition, tail_window: int = 8) -> RateEstimate:
    """Finite-depth proxies for ``v_s = limsup (m_k-n_k)/n_k`` and
    ``v_e = liminf (m_k-n_k)/n_{k+1}`` over the last ``tail_window`` records."""
    if tail_window < 1:
        raise InputError("tail_window must be >= 1")
    n, m = d.n_filtered, d.m_filtered
    idx = range(max(0, len(n) - tail_window), len(n))
    vs = [(m[k] - n[k]) / n[k] for k in idx if n[k] > 0]
    ve = [(m[k] - n[k]) / n[k + 1] for k in idx if k + 1 < len(n)]
    return RateEstimate(min(ve) if ve else 0.0, max(vs) if vs else 0.0, d.depth, tail_window)


# -- hitting -----------------------------------------------------------------


def eah_feasible(
    e_prefix,
    t: TargetSpec,
    window: Window,
    N_start: int = 1,
    semantics: Semantics = Semantics.PESSIMISTIC,
) -> bool:
    """Whether every ``N_start <= n <= len(e)`` has some ``m <= n`` with
    ``e|_{m+1}^{m+a_n} = t|_1^{a_n}``.

    Letters past the end of the prefix match anything under OPTIMISTIC and
    nothing under PESSIMISTIC.
    """
    if N_start < 1:
        raise InputError("N_start must be >= 1")
    semantics = Semantics(semantics)
    e = np.asarray(e_prefix, dtype=np.int64)
    L = len(e)
    ell = match_lengths(e, t.prefix(L)) + [0]  # m = L: empty remainder
    optimistic = semantics is Semantics.OPTIMISTIC
    best, alive = -1, False
    for n in range(0, L + 1):
        best = max(best, ell[n])
        alive = alive or ell[n] == L - n
        if n < N_start:
            continue
        a = window(n)
        if a < 0:
            raise InputError(f"window value a_{n} = {a} is negative")
        if a and best < a and not (optimistic and alive):
            return False
    return True


def in_lambda_t_prefix(e_prefix, t: TargetSpec) -> Optional[int]:
    """Smallest shift ``M <= len/2`` with ``e|_{M+1}^{len} = t|_1^{len-M}``."""
    e = np.asarray(e_prefix, dtype=np.int64)
    L = len(e)
    if L == 0:
        return 0
    ell = match_lengths(e, t.prefix(L))
    for M in range(0, L // 2 + 1):
        if ell[M] == L - M:
            return M
    return None
