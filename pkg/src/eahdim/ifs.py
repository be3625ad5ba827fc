"""Iterated function systems at the level of derivative norms.

An IFS is seen only through ``log ||f'_w||`` for finite words ``w`` over the
alphabet ``1..S``.  Similarities carry one ratio per letter and have exact
pressure; conformal systems are supplied as a word-norm callback together with
a distortion constant and only ever get a pressure *bracket*.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, NumericError, ResourceError

Word = Sequence[int]

#: Largest number of words ``S**n`` that ``pressure_bracket`` will enumerate.
ENUMERATION_CAP = 2**24


@dataclass(frozen=True)
class PressureSolverConfig:
    abs_tol: float = 1e-12
    max_iter: int = 200
    s_upper_seed: float = 64.0

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise InputError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_iter < 1:
            raise InputError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.s_upper_seed > 0:
            raise InputError("s_upper_seed must be positive")


class IfsSpec:
    """Common interface of the two kinds of systems."""

    S: int
    distortion_log_K: float

    def _log_norm(self, w: np.ndarray) -> float:
        raise NotImplementedError

    @property
    def log_norm_max(self) -> float:
        """``log ||f'_max||``."""
        raise NotImplementedError

    @property
    def log_norm_min(self) -> float:
        """``log ||f'_min||``."""
        raise NotImplementedError


@dataclass(frozen=True)
class Similarity(IfsSpec):
    """Self-similar system given by its contraction ratios."""

    ratios: tuple[float, ...]

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        object.__setattr__(self, "ratios", ratios)
        if len(ratios) < 2:
            raise InputError("an IFS needs at least two maps")
        for r in ratios:
            if not 0.0 < r < 1.0:
                raise InputError(f"contraction ratio {r} not in (0, 1)")

    @property
    def S(self) -> int:
        return len(self.ratios)

    @property
    def distortion_log_K(self) -> float:
        return 0.0

    @cached_property
    def log_ratios(self) -> np.ndarray:
        return np.log(np.asarray(self.ratios))

    @property
    def log_norm_max(self) -> float:
        return float(self.log_ratios.max())

    @property
    def log_norm_min(self) -> float:
        return float(self.log_ratios.min())

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.ratios)) == 1

    def _log_norm(self, w: np.ndarray) -> float:
        return float(np.sum(self.log_ratios[w - 1]))


@dataclass(frozen=True)
class ConformalOracle(IfsSpec):
    """Conformal system known through ``log ||f'_w||`` and a distortion bound.

    ``word_log_norm`` receives a tuple of letters.  The caller promises
    ``log||f'_uw|| <= log||f'_u|| + log||f'_w||`` and the reverse inequality
    up to ``2 * distortion_log_K``; :meth:`distortion_violations` tests this
    on sample pairs.
    """

    S: int
    word_log_norm: Callable[[tuple[int, ...]], float] = field(compare=False)
    distortion_log_K: float = 0.0
    name: str = "oracle"

    def __post_init__(self):
        if self.S < 2:
            raise InputError("an IFS needs at least two maps")
        if not self.distortion_log_K >= 0:
            raise InputError("distortion_log_K must be >= 0")

    @classmethod
    def from_similarity(cls, ratios: Sequence[float], distortion_log_K: float = 0.0):
        sim = Similarity(tuple(ratios))
        return cls(
            S=sim.S,
            word_log_norm=lambda w: sim._log_norm(np.asarray(w, dtype=np.int64)),
            distortion_log_K=distortion_log_K,
            name="similarity",
        )

    @cached_property
    def _letter_log_norms(self) -> np.ndarray:
        return np.array([self.word_log_norm((i,)) for i in range(1, self.S + 1)])

    @property
    def log_norm_max(self) -> float:
        return float(self._letter_log_norms.max())

    @property
    def log_norm_min(self) -> float:
        # sup-norms only bound the infimum of |f'| up to the distortion factor
        return float(self._letter_log_norms.min()) - 2.0 * self.distortion_log_K

    def _log_norm(self, w: np.ndarray) -> float:
        return float(self.word_log_norm(tuple(int(x) for x in w)))

    def distortion_violations(self, pairs, atol: float = 1e-12):
        """Return the word pairs on which the sub/super-multiplicativity fails."""
        bad = []
        for u, w in pairs:
            lu = log_deriv_norm(self, u)
            lw = log_deriv_norm(self, w)
            luw = log_deriv_norm(self, tuple(u) + tuple(w))
            if luw > lu + lw + atol or luw < lu + lw - 2.0 * self.distortion_log_K - atol:
                bad.append((tuple(u), tuple(w)))
        return bad


def continued_fraction_oracle(S: int = 2) -> ConformalOracle:
    """Oracle for the maps ``f_i(x) = 1 / (i + 1 + x)`` on ``[0, 1]``.

    Compositions are Moebius maps whose derivative has sup-norm ``1/u**2`` on
    ``[0, 1]``, ``u`` being the lower-right entry of the matrix product.  The
    ratio between sup and inf of ``|f'_w|`` is at most ``9/4``, hence
    ``K = 3/2``.
    """

    def word_log_norm(w):
        if not w:
            return 0.0
        r, u = 1.0, float(w[0] + 1)
        log_scale = 0.0
        for a in w[1:]:
            r, u = u, r + (a + 1) * u
            if u > 1e150:
                r /= u
                log_scale += math.log(u)
                u = 1.0
        return -2.0 * (math.log(u) + log_scale)

    return ConformalOracle(
        S=S,
        word_log_norm=word_log_norm,
        distortion_log_K=math.log(1.5),
        name="continued_fraction",
    )


def as_word(ifs: IfsSpec, w: Word) -> np.ndarray:
    """Validate ``w`` against the alphabet of ``ifs`` and return it as an array."""
    arr = np.asarray(w, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 1 or arr.max() > ifs.S):
        raise InputError(f"word letters must lie in 1..{ifs.S}")
    return arr


def log_deriv_norm(ifs: IfsSpec, w: Word) -> float:
    arr = as_word(ifs, w)
    if arr.size == 0:
        return 0.0
    return ifs._log_norm(arr)


def _require_similarity(ifs: IfsSpec, what: str) -> Similarity:
    if not isinstance(ifs, Similarity):
        raise InputError(f"{what} needs a Similarity system; use pressure_bracket for oracles")
    return ifs


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    if not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(x - m))))


def pressure(ifs: IfsSpec, s: float) -> float:
    """``P(s) = log sum_i r_i**s``."""
    sim = _require_similarity(ifs, "pressure")
    if s < 0:
        raise InputError(f"pressure is defined for s >= 0, got {s}")
    return _logsumexp(s * sim.log_ratios)


def pressure_derivative(ifs: IfsSpec, s: float) -> float:
    sim = _require_similarity(ifs, "pressure_derivative")
    if s < 0:
        raise InputError(f"pressure is defined for s >= 0, got {s}")
    x = s * sim.log_ratios
    w = np.exp(x - x.max())
    return float(np.dot(w, sim.log_ratios) / w.sum())


def word_log_norms(ifs: IfsSpec, n: int, cap: int = ENUMERATION_CAP) -> list[np.ndarray]:
    """``log ||f'_w||`` for all words of length ``n``, one array per first letter."""
    if n < 1:
        raise InputError("word length must be >= 1")
    if ifs.S**n > cap:
        raise ResourceError(f"S**n = {ifs.S}**{n} exceeds enumeration cap {cap}")
    if isinstance(ifs, Similarity):
        tail = np.zeros(1)
        for _ in range(n - 1):
            tail = (tail[:, None] + ifs.log_ratios[None, :]).reshape(-1)
        return [lr + tail for lr in ifs.log_ratios]
    letters = range(1, ifs.S + 1)
    parts = []
    for first in letters:
        parts.append(
            np.fromiter(
                (ifs.word_log_norm((first,) + rest) for rest in itertools.product(letters, repeat=n - 1)),
                dtype=float,
                count=ifs.S ** (n - 1),
            )
        )
    return parts


def _combine(parts: list[np.ndarray], s: float) -> float:
    # partition sums are reduced separately, then merged in first-letter order
    return _logsumexp(np.array([_logsumexp(s * p) for p in parts]))


def pressure_bracket(ifs: IfsSpec, s: float, n: int, cap: int = ENUMERATION_CAP) -> tuple[float, float]:
    """Interval containing ``P(s)`` from all words of length ``n``.

    With ``a_n = log sum_{|w|=n} ||f'_w||**s``, submultiplicativity makes
    ``a_n`` subadditive and the distortion bound makes ``a_n - 2 s log K``
    superadditive, so ``a_n/n - 2 s log K / n <= P(s) <= a_n/n``.
    """
    if s < 0:
        raise InputError(f"pressure is defined for s >= 0, got {s}")
    a_n = _combine(word_log_norms(ifs, n, cap), s)
    upper = a_n / n
    return upper - 2.0 * s * ifs.distortion_log_K / n, upper


def _bisect_decreasing(F: Callable[[float], float], cfg: PressureSolverConfig) -> float:
    """Root of a continuous strictly decreasing ``F`` with ``F(0) > 0``."""
    lo, hi = 0.0, cfg.s_upper_seed
    f_hi = F(hi)
    doublings = 0
    while f_hi > 0:
        lo, hi = hi, 2.0 * hi
        f_hi = F(hi)
        doublings += 1
        if doublings > 64 or not math.isfinite(f_hi):
            raise NumericError("no sign change found while expanding the root bracket")
    for _ in range(cfg.max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = F(mid)
        if hi - lo <= cfg.abs_tol and abs(f_mid) <= cfg.abs_tol:
            return mid
        if mid in (lo, hi):
            return mid
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
    raise NumericError(f"bisection did not converge in {cfg.max_iter} iterations (bracket [{lo}, {hi}])")


def dim_attractor(ifs: IfsSpec, cfg: PressureSolverConfig = PressureSolverConfig()) -> float:
    """Moran root ``P(s) = 0``."""
    _require_similarity(ifs, "dim_attractor")
    return _bisect_decreasing(lambda s: pressure(ifs, s), cfg)


def pressure_linear_root(
    ifs: IfsSpec, slope_g: float, cfg: PressureSolverConfig = PressureSolverConfig()
) -> float:
    """The unique ``s >= 0`` with ``P(s) = slope_g * s``."""
    _require_similarity(ifs, "pressure_linear_root")
    if not (slope_g > 0 and math.isfinite(slope_g)):
        raise InputError(f"slope must be positive and finite, got {slope_g}")
    return _bisect_decreasing(lambda s: pressure(ifs, s) - slope_g * s, cfg)


def linear_root_bracket(
    ifs: IfsSpec,
    slope_g: float,
    n: int,
    cfg: PressureSolverConfig = PressureSolverConfig(),
    cap: int = ENUMERATION_CAP,
) -> tuple[float, float]:
    """Bracket for the root of ``P(s) = slope_g * s`` from length-``n`` words.

    Works for any system; ``slope_g = 0`` brackets the attractor dimension.
    """
    if not (slope_g >= 0 and math.isfinite(slope_g)):
        raise InputError(f"slope must be non-negative and finite, got {slope_g}")
    parts = word_log_norms(ifs, n, cap)
    penalty = 2.0 * ifs.distortion_log_K / n

    def upper(s):
        return _combine(parts, s) / n - slope_g * s

    def lower(s):
        return upper(s) - penalty * s

    return _bisect_decreasing(lower, cfg), _bisect_decreasing(upper, cfg)


def pressure_linear_roots(
    ifs: IfsSpec, slopes, cfg: PressureSolverConfig = PressureSolverConfig()
) -> np.ndarray:
    """Vectorized :func:`pressure_linear_root` over an array of slopes."""
    sim = _require_similarity(ifs, "pressure_linear_roots")
    g = np.atleast_1d(np.asarray(slopes, dtype=float))
    if g.size == 0:
        return g.copy()
    if not (np.all(g > 0) and np.all(np.isfinite(g))):
        raise InputError("slopes must be positive and finite")
    lr = sim.log_ratios

    def F(s):
        x = s[:, None] * lr[None, :]
        m = x.max(axis=1)
        return m + np.log(np.exp(x - m[:, None]).sum(axis=1)) - g * s

    lo = np.zeros_like(g)
    hi = np.full_like(g, cfg.s_upper_seed)
    for _ in range(65):
        pos = F(hi) > 0
        if not pos.any():
            break
        lo = np.where(pos, hi, lo)
        hi = np.where(pos, 2.0 * hi, hi)
    else:
        raise NumericError("no sign change found while expanding the root bracket")
    for _ in range(cfg.max_iter):
        mid = 0.5 * (lo + hi)
        if np.all(hi - lo <= cfg.abs_tol) or np.all((mid == lo) | (mid == hi)):
            return mid
        up = F(mid) > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    raise NumericError(f"vectorized bisection did not converge in {cfg.max_iter} iterations")
