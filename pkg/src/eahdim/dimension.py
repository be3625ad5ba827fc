"""Dimension bounds for eventually-always-hitting sets.

The chain is: concatenated target words ``G(M, t, theta, v)`` give the rates
``Omega+/-``; each rate defines a line ``P(s) = g s`` whose root is
``s+/-(theta)``; maximizing over ``theta`` gives ``s_hat+/-`` and, capped by
the attractor dimension, the bounds ``omega+/-``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InputError, NumericError
from .ifs import (
    IfsSpec,
    PressureSolverConfig,
    Similarity,
    dim_attractor,
    log_deriv_norm,
    pressure,
    pressure_derivative,
    pressure_linear_root,
    pressure_linear_roots,
)
from .symbolic import FloorWindow, Periodic, PowerWindow, TargetSpec

# floor(x) is taken as floor(x * (1 + _GUARD)) so that products such as
# 0.3 * 1000 / 1.0 land on the integer they represent
_GUARD = 1e-12


def _floor(x):
    return np.floor(np.asarray(x, dtype=float) * (1.0 + _GUARD)).astype(np.int64)


def _ifloor(x: float) -> int:
    return int(math.floor(x * (1.0 + _GUARD)))


def _check_v(v: float) -> None:
    if not 0.0 < v < 1.0:
        raise InputError(f"v must lie in (0, 1), got {v}")


def _check_theta_admissible(theta: float, v: float) -> None:
    _check_v(v)
    if not theta * (1.0 - v) - 1.0 > 0.0:
        raise InputError(f"theta = {theta} must exceed 1/(1-v) = {1.0 / (1.0 - v)}")


@dataclass(frozen=True)
class DimParams:
    v: float
    theta: float
    delta: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.v <= 1.0:
            raise InputError(f"v must lie in [0, 1], got {self.v}")
        if self.delta < 0 or self.epsilon < 0:
            raise InputError("delta and epsilon must be >= 0")
        if not self.theta > 0:
            raise InputError("theta must be positive")


# -- G words and Omega -------------------------------------------------------


def g_segment_lengths(theta: float, v: float, M: int) -> list[int]:
    """Segment lengths of ``G(M, t, theta, v)``; empty segments are dropped."""
    if not theta > 1.0:
        raise InputError("theta must exceed 1")
    _check_v(v)
    if M < 1 or _ifloor(theta * v * M) < 1:
        raise InputError(f"M = {M} is below 1/(theta v) = {1.0 / (theta * v)}")
    lengths = []
    j = 0
    while _ifloor(v * M / theta**j) >= 1:
        lengths.append(_ifloor(v * M / theta**j))
        j += 1
    lengths.reverse()
    lengths.append(_ifloor(v * M * theta))
    return lengths


def build_G_word(t: TargetSpec, theta: float, v: float, M: int) -> np.ndarray:
    lengths = g_segment_lengths(theta, v, M)
    full = t.prefix(max(lengths))
    return np.concatenate([full[:n] for n in lengths])


@dataclass(frozen=True)
class OmegaEstimate:
    omega_plus: float
    omega_minus: float
    exact: bool
    M_lo: int = 0
    M_hi: int = 0
    stride: int = 0
    samples: list = field(default_factory=list)


class _PrefixSums:
    """Partial sums ``C[k] = sum_{i<=k} log r_{t_i}`` grown on demand."""

    def __init__(self, ifs: Similarity, t: TargetSpec):
        self.ifs, self.t = ifs, t
        self.C = np.zeros(1)

    def upto(self, n: int) -> np.ndarray:
        if len(self.C) <= n:
            size = max(n + 1, 2 * len(self.C))
            vals = self.ifs.log_ratios[self.t.prefix(size - 1) - 1]
            self.C = np.concatenate([[0.0], np.cumsum(vals)])
        return self.C


def _omega_ratios(ifs: IfsSpec, t: TargetSpec, theta: float, v: float, Ms: np.ndarray, sums=None) -> np.ndarray:
    """``log ||f'_{G(M)}|| / M`` for every ``M`` in ``Ms``."""
    if isinstance(ifs, Similarity):
        sums = sums or _PrefixSums(ifs, t)
        vM = v * Ms.astype(float)
        top = _floor(vM * theta)
        C = sums.upto(int(top.max()))
        total = C[top].copy()
        j = 0
        while True:
            idx = _floor(vM / theta**j)
            if idx.max() == 0:
                break
            total += C[idx]
            j += 1
        return total / Ms
    return np.array([log_deriv_norm(ifs, build_G_word(t, theta, v, int(M))) / M for M in Ms])


def _sample_grid(theta: float, v: float, M_lo: int, M_hi: int, stride: int) -> np.ndarray:
    if stride < 1:
        raise InputError("stride must be >= 1")
    if not M_lo < M_hi:
        raise InputError("need M_lo < M_hi")
    if _ifloor(theta * v * M_lo) < 1:
        raise InputError(f"M_lo = {M_lo} is below 1/(theta v) = {1.0 / (theta * v)}")
    return np.arange(M_lo, M_hi + 1, stride, dtype=np.int64)


def _tail_extremes(Ms: np.ndarray, vals: np.ndarray, M_lo: int, M_hi: int) -> tuple[float, float]:
    tail = Ms >= 0.5 * (M_lo + M_hi)
    if not tail.any():
        tail = Ms == Ms[-1]
    return float(vals[tail].max()), float(vals[tail].min())


def omega_estimate(
    ifs: IfsSpec,
    t: TargetSpec,
    theta: float,
    v: float,
    M_lo: int = 1000,
    M_hi: int = 100_000,
    stride: int = 97,
) -> OmegaEstimate:
    """Sampled ``Omega+`` (max) and ``Omega-`` (min) over the upper half of the M grid."""
    if not theta > 1.0:
        raise InputError("theta must exceed 1")
    _check_v(v)
    Ms = _sample_grid(theta, v, M_lo, M_hi, stride)
    vals = _omega_ratios(ifs, t, theta, v, Ms)
    hi, lo = _tail_extremes(Ms, vals, M_lo, M_hi)
    samples = [(int(M), float(x)) for M, x in zip(Ms, vals)]
    return OmegaEstimate(hi, lo, False, int(M_lo), int(M_hi), int(stride), samples)


def periodic_mean_log_ratio(ifs: Similarity, t: Periodic) -> float:
    return float(np.mean(ifs.log_ratios[np.asarray(t.word) - 1]))


def omega_exact_periodic(ifs: IfsSpec, t: TargetSpec, theta: float, v: float) -> OmegaEstimate:
    """Closed-form limit ``c_bar * v theta^2 / (theta - 1)`` for periodic targets.

    Every segment of ``G(M)`` is a prefix of a periodic word, so its log-norm
    is its length times the period average ``c_bar`` up to O(1); the segment
    lengths add up to ``v M theta^2/(theta-1) + O(log M)``.
    """
    if not isinstance(ifs, Similarity):
        raise InputError("omega_exact_periodic needs a Similarity system")
    if not isinstance(t, Periodic):
        raise InputError("omega_exact_periodic needs a Periodic target")
    if not theta > 1.0:
        raise InputError("theta must exceed 1")
    _check_v(v)
    t.validate(ifs.S)
    val = periodic_mean_log_ratio(ifs, t) * v * theta**2 / (theta - 1.0)
    return OmegaEstimate(val, val, True)


# -- roots -------------------------------------------------------------------


def line_slope(omega, theta, v):
    """``((theta-1)/(theta - theta v - 1)) * (-omega)``, the slope of the s-equation."""
    theta = np.asarray(theta, dtype=float)
    out = (theta - 1.0) / (theta - theta * v - 1.0) * -np.asarray(omega, dtype=float)
    return float(out) if out.ndim == 0 else out


def solve_s(
    ifs: IfsSpec, omega: float, theta: float, v: float, cfg: PressureSolverConfig = PressureSolverConfig()
) -> float:
    """Root of ``P(s) = -s (theta-1)/(theta-theta v-1) * omega``."""
    _check_theta_admissible(theta, v)
    if not omega < 0:
        raise InputError(f"omega must be negative, got {omega}")
    return pressure_linear_root(ifs, line_slope(omega, theta, v), cfg)


def delta_hat(ifs: IfsSpec, v: float) -> float:
    """Width of the left strip of ``theta`` values that cannot host the supremum.

    Near ``1/(1-v)`` the slope is at least ``v log(1/|f'_max|) / ((1-v)^3 x)``
    for ``theta = 1/(1-v) + x``, while at ``theta = 2/(1-v)`` it is at most
    ``4 v log(1/|f'_min|)/(1-v)^2``; the two meet at the returned ``x``.
    """
    _check_v(v)
    return ifs.log_norm_max / ifs.log_norm_min / (4.0 * (1.0 - v))


# -- theta optimization ------------------------------------------------------


class Sign(str, enum.Enum):
    PLUS = "plus"
    MINUS = "minus"


@dataclass(frozen=True)
class SearchConfig:
    grid_points: int = 256
    theta_tol: float = 1e-8
    decay: float = 0.9
    max_doublings: int = 60
    M_lo: int = 1000
    M_hi: int = 100_000
    stride: int = 97
    exact: Optional[bool] = None  # None: closed form whenever it applies
    pressure: PressureSolverConfig = PressureSolverConfig()

    def __post_init__(self):
        if self.grid_points < 3:
            raise InputError("grid_points must be >= 3")
        if not 0 < self.decay < 1:
            raise InputError("decay must lie in (0, 1)")


def golden_section_min(f: Callable[[float], float], a: float, b: float, tol: float = 1e-8, max_iter: int = 500) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    else:
        raise NumericError(f"golden section did not reach tolerance {tol} on [{a}, {b}]")
    return 0.5 * (a + b)


class _OmegaSource:
    """``theta -> (Omega+, Omega-)``, exact for periodic targets of similarities."""

    def __init__(self, ifs: IfsSpec, t: TargetSpec, v: float, cfg: SearchConfig):
        self.ifs, self.t, self.v, self.cfg = ifs, t, v, cfg
        can_exact = isinstance(ifs, Similarity) and isinstance(t, Periodic)
        self.exact = can_exact if cfg.exact is None else cfg.exact
        if self.exact and not can_exact:
            raise InputError("exact Omega needs a Similarity system and a Periodic target")
        if self.exact:
            self.c_bar = periodic_mean_log_ratio(ifs, t)
        elif isinstance(ifs, Similarity):
            self.sums = _PrefixSums(ifs, t)
        else:
            self.sums = None

    def __call__(self, theta: float) -> tuple[float, float]:
        v = self.v
        if self.exact:
            val = self.c_bar * v * theta**2 / (theta - 1.0)
            return val, val
        cfg = self.cfg
        M_lo = max(cfg.M_lo, math.ceil(1.0 / (theta * v)))
        Ms = _sample_grid(theta, v, M_lo, max(cfg.M_hi, M_lo + 1), cfg.stride)
        vals = _omega_ratios(self.ifs, self.t, theta, v, Ms, self.sums)
        return _tail_extremes(Ms, vals, M_lo, max(cfg.M_hi, M_lo + 1))

    @property
    def rel_tol(self) -> float:
        return 1e-6 if self.exact else 1e-2


@dataclass
class _Optimum:
    s_hat: float
    theta_star: float


def _optimize(ifs, source: _OmegaSource, v: float, cfg: SearchConfig):
    pcfg = cfg.pressure
    lo = 1.0 / (1.0 - v) + delta_hat(ifs, v)
    hi = max(4.0 / (1.0 - v), 2.0 * lo)
    for _ in range(cfg.max_doublings + 1):
        grid = np.geomspace(lo, hi, cfg.grid_points)
        om = np.array([source(th) for th in grid])
        slopes = line_slope(om, grid[:, None], v)
        sp = pressure_linear_roots(ifs, slopes[:, 0], pcfg)
        sm = pressure_linear_roots(ifs, slopes[:, 1], pcfg)
        if sp[-1] < cfg.decay * sp.max() and sm[-1] < cfg.decay * sm.max():
            break
        hi *= 2.0
    else:
        raise NumericError(
            f"s(theta) did not decay below {cfg.decay} of its maximum up to theta = {hi}; "
            f"v = {v}, left edge {lo}"
        )

    optima = []
    for col, s_grid in ((0, sp), (1, sm)):
        i = int(np.argmin(slopes[:, col]))
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        th = golden_section_min(lambda x: float(line_slope(source(x)[col], x, v)), a, b, cfg.theta_tol)
        s_ref = pressure_linear_root(ifs, float(line_slope(source(th)[col], th, v)), pcfg)
        # sampled Omega is not smooth in theta; keep the grid point if it is better
        if s_grid[i] > s_ref:
            th, s_ref = float(grid[i]), float(s_grid[i])
        optima.append(_Optimum(float(s_ref), float(th)))
    cond5 = bool(np.all(np.abs(om[:, 0] - om[:, 1]) <= source.rel_tol * np.abs(om[:, 1])))
    theta_grid = [(float(a), float(b), float(c)) for a, b, c in zip(grid, sp, sm)]
    return optima, theta_grid, cond5


def s_hat(
    ifs: IfsSpec,
    t: TargetSpec,
    v: float,
    sign: Sign = Sign.PLUS,
    search_cfg: SearchConfig = SearchConfig(),
) -> tuple[float, float]:
    """``sup_theta s+/-(theta)`` and the maximizing ``theta``."""
    _check_v(v)
    t.validate(ifs.S)
    optima, _, _ = _optimize(ifs, _OmegaSource(ifs, t, v, search_cfg), v, search_cfg)
    opt = optima[0] if Sign(sign) is Sign.PLUS else optima[1]
    return opt.s_hat, opt.theta_star


# -- reports -----------------------------------------------------------------


class Case(str, enum.Enum):
    RANGE01 = "Range01"
    EMPTY = "Empty"
    COUNTABLE = "Countable"


def classify_case(v) -> Case:
    """Regime of a window with rate ``v = lim a_n / n``."""
    if isinstance(v, (FloorWindow, PowerWindow)):
        v = v.rate
    v = float(v)
    if math.isnan(v) or v < 0:
        raise InputError(f"window rate must be >= 0, got {v}")
    if v <= 1.0:
        return Case.RANGE01
    if math.isinf(v):
        return Case.COUNTABLE
    return Case.EMPTY


def theorem2_emptiness(v: float, theta: float) -> bool:
    """True when ``theta < 1/(1-v)``: no point has both rates ``v`` and ``theta v``."""
    _check_v(v)
    if not theta > 0:
        raise InputError("theta must be positive")
    # compared exactly so that v = 0.9, theta = 10 sits on the boundary
    return Fraction(repr(float(theta))) * (1 - Fraction(repr(float(v)))) < 1


@dataclass
class DimensionReport:
    dim_lambda: float
    theta_grid: list
    s_hat_plus: Optional[float]
    s_hat_minus: Optional[float]
    omega_plus_bound: Optional[float]
    omega_minus_bound: Optional[float]
    case: Case
    condition5_holds: Optional[bool]
    v: Optional[float] = None
    theta_star_plus: Optional[float] = None
    theta_star_minus: Optional[float] = None


def omega_bounds(
    ifs: IfsSpec,
    t: TargetSpec,
    v: float,
    search_cfg: SearchConfig = SearchConfig(),
) -> DimensionReport:
    if not 0.0 <= v <= 1.0:
        raise InputError(f"omega_bounds needs v in [0, 1], got {v}; see classify_case")
    t.validate(ifs.S)
    dim = dim_attractor(ifs, search_cfg.pressure)
    if v == 0.0:
        return DimensionReport(dim, [], None, None, dim, dim, Case.RANGE01, None, 0.0)
    if v == 1.0:
        return DimensionReport(dim, [], None, None, 0.0, 0.0, Case.RANGE01, None, 1.0)
    source = _OmegaSource(ifs, t, v, search_cfg)
    (plus, minus), grid, cond5 = _optimize(ifs, source, v, search_cfg)
    return DimensionReport(
        dim_lambda=dim,
        theta_grid=grid,
        s_hat_plus=plus.s_hat,
        s_hat_minus=minus.s_hat,
        omega_plus_bound=min(plus.s_hat, dim),
        omega_minus_bound=min(minus.s_hat, dim),
        case=Case.RANGE01,
        condition5_holds=cond5,
        v=v,
        theta_star_plus=plus.theta_star,
        theta_star_minus=minus.theta_star,
    )


# -- perturbed root and the O(delta) gap ------------------------------------


def _omega_plus(ifs, t, theta, v, omega_plus):
    if omega_plus is not None:
        return float(omega_plus)
    if isinstance(ifs, Similarity) and isinstance(t, Periodic):
        return omega_exact_periodic(ifs, t, theta, v).omega_plus
    return omega_estimate(ifs, t, theta, v).omega_plus


def solve_s_bar(
    ifs: IfsSpec,
    t: TargetSpec,
    theta: float,
    v: float,
    delta: float,
    cfg: PressureSolverConfig = PressureSolverConfig(),
    omega_plus: Optional[float] = None,
) -> float:
    """Root of ``s [Omega+ + L delta (1 + v/(theta-1)^2)] + c_delta P(s) = 0``.

    ``L = log(1/|f'_min|)`` and ``c_delta = ((theta+delta)(1-v)-1)/(theta+delta-1)``.
    """
    _check_v(v)
    if delta < 0:
        raise InputError("delta must be >= 0")
    td = theta + delta
    if not td * (1.0 - v) - 1.0 > 0:
        raise InputError("need (theta+delta)(1-v) > 1")
    om = _omega_plus(ifs, t, theta, v, omega_plus)
    c_delta = (td * (1.0 - v) - 1.0) / (td - 1.0)
    perturbation = -ifs.log_norm_min * delta * (1.0 + v / (theta - 1.0) ** 2)
    g = -(om + perturbation) / c_delta
    if not g > 0:
        raise NumericError(f"perturbed slope {g} is not positive (delta = {delta} too large)")
    return pressure_linear_root(ifs, g, cfg)


@dataclass(frozen=True)
class GapRow:
    delta: float
    s_bar: float
    gap: float
    bound: float
    ratio: float  # bound / gap, the safety factor
    ok: bool


@dataclass(frozen=True)
class GapReport:
    theta: float
    v: float
    s_plus: float
    constant: float
    constant_sharp: float
    rows: list
    ok: bool


def gap_constant(ifs: IfsSpec, v: float, cfg: PressureSolverConfig = PressureSolverConfig()) -> float:
    """``12 log(1/|f'_min|) dim / ((1-v) |P'(dim)|) / delta_hat``."""
    dim = dim_attractor(ifs, cfg)
    return 12.0 * -ifs.log_norm_min * dim / ((1.0 - v) * abs(pressure_derivative(ifs, dim))) / delta_hat(ifs, v)


def gap_bound_check(
    ifs: IfsSpec,
    t: TargetSpec,
    theta: float,
    v: float,
    delta_list: Sequence[float],
    cfg: PressureSolverConfig = PressureSolverConfig(),
) -> GapReport:
    """Check ``0 <= s_bar(delta) - s+ <= C delta`` for every ``delta`` in the list."""
    _check_v(v)
    if theta < 1.0 / (1.0 - v) + delta_hat(ifs, v):
        raise InputError(f"theta = {theta} lies inside the excluded strip next to 1/(1-v)")
    om = _omega_plus(ifs, t, theta, v, None)
    s_plus = solve_s(ifs, om, theta, v, cfg)
    C = gap_constant(ifs, v, cfg)
    sharp = (
        4.0 * s_plus**2 * -ifs.log_norm_min
        / (pressure(ifs, s_plus) - s_plus * pressure_derivative(ifs, s_plus))
        * (2.0 * theta - 1.0) / (theta - theta * v - 1.0)
    )
    rows = []
    for d in delta_list:
        sb = solve_s_bar(ifs, t, theta, v, d, cfg, omega_plus=om)
        gap = sb - s_plus
        bound = C * d
        ratio = math.inf if gap <= 0 else bound / gap
        # root tolerance can make a zero gap show up as -abs_tol
        rows.append(GapRow(d, sb, gap, bound, ratio, -2 * cfg.abs_tol <= gap <= bound))
    return GapReport(theta, v, s_plus, C, sharp, rows, all(r.ok for r in rows))


# -- root test exponent of the covering argument -----------------------------


def epsilon_prime(theta: float, delta: float, epsilon: float) -> float:
    td = theta + delta
    return epsilon * ((td**2 + 1.0) / (td - 1.0) ** 2 + 1.0)


def free_letter_count(N: int, theta: float, v: float, delta: float, epsilon: float) -> int:
    td = theta + delta
    return N - _ifloor(N * (td * v / (td - 1.0) - epsilon_prime(theta, delta, epsilon)))


def fixed_segment_lengths(N: int, theta: float, v: float, delta: float, epsilon: float, k_star: int, k_prime: int) -> list[int]:
    """Lengths of the prescribed target copies inside a length-N cover cylinder.

    There are ``k_star - k_prime`` geometrically shrinking copies with ratio
    ``q = (v-eps)/((theta+delta)v+eps)``, the largest of length
    ``floor((v-eps)N) - 1``, followed by one of length
    ``floor(((theta-delta)v - eps) N)``.
    """
    if k_star < k_prime:
        raise InputError("need k_star >= k_prime")
    q = (v - epsilon) / ((theta + delta) * v + epsilon)
    segs = [max(_ifloor(q**i * (v - epsilon) * N) - 1, 0) for i in range(k_star - k_prime)]
    segs.reverse()
    segs.append(max(_ifloor(((theta - delta) * v - epsilon) * N), 0))
    return segs


def upper_bound_exponent(
    ifs: IfsSpec,
    t: TargetSpec,
    theta: float,
    v: float,
    delta: float,
    epsilon: float,
    s: float,
    N: int,
    k_star: int,
    k_prime: int,
) -> float:
    """``(s/N) log ||f'_{i*}|| + (1/N) log sum_{|w| = t_free} ||f'_w||^s``.

    For similarities the free-letter sum is exactly ``t_free * P(s)``.
    """
    if not isinstance(ifs, Similarity):
        raise InputError("upper_bound_exponent needs a Similarity system")
    _check_v(v)
    if N < 1:
        raise InputError("N must be >= 1")
    t_free = free_letter_count(N, theta, v, delta, epsilon)
    if t_free < 0:
        raise InputError(f"negative free-letter count {t_free}")
    segs = fixed_segment_lengths(N, theta, v, delta, epsilon, k_star, k_prime)
    C = _PrefixSums(ifs, t).upto(max(segs))
    log_fixed = float(sum(C[n] for n in segs))
    return s * log_fixed / N + t_free * pressure(ifs, s) / N
