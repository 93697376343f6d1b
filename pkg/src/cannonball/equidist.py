"""Exponential sums, discrepancy, and equidistribution diagnostics.

Phases for e(m * sqrt(P_n)) come from the exact fixed-point fractional
parts: the integer m*f part of m*sqrt(P_n) contributes nothing to e(.), so
each phase is (m * mantissa) mod 2**bits scaled back to [0, 1).  That
product is reduced in two 48-bit limbs so the whole phase table vectorizes
in int64 without ever overflowing, and the only inexactness left is the
documented fixed-point error plus one float rounding.

The star discrepancy is the exact sorted-points supremum for the given
point set; D(N) follows the unnormalized convention (anchored-interval
count minus N*alpha), with d_star = D(N)/N reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exactseq import DEFAULT_BITS, FixedFrac

_LIMB = 48
_LOW_MASK = (1 << _LIMB) - 1
_FAST_M_CAP = (1 << 15) - 1  # keeps m*limb inside int64


class PrecisionError(ValueError):
    """Raised when the requested harmonic exceeds the fixed-point budget."""


@dataclass(frozen=True)
class ExpSum:
    m: int
    lo: int
    hi: int
    re: float
    im: float
    modulus_err: float            # absolute error bound on the modulus
    kn_bound: Optional[float] = None

    @property
    def modulus(self) -> float:
        return math.hypot(self.re, self.im)


@dataclass(frozen=True)
class DiscrepancyResult:
    N: int
    d_unnormalized: float         # D(N), anchored-interval convention
    d_star: float                 # D(N) / N
    K: Optional[int] = None
    et_bound: Optional[float] = None
    slack: Optional[float] = None # accumulated phase-error budget


@dataclass(frozen=True)
class DerivBounds:
    n: float
    h1: float                     # h'(n) for h(x) = sqrt(P_x)
    h2: float                     # h''(n); positive and decreasing for n >= 1


@dataclass(frozen=True)
class HistogramResult:
    x: int
    bins: int
    counts: tuple
    flagged: int                  # exact boundary hits, kept in the lower bin


@dataclass(frozen=True)
class PhasePoints:
    """A point set in [0,1) with optional exact fixed-point limbs."""

    values: np.ndarray            # float64 views of the points
    bits: int
    hi: Optional[np.ndarray] = None   # top mantissa limbs (int64)
    lo: Optional[np.ndarray] = None   # low 48-bit limbs (int64)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def exact(self) -> bool:
        return self.hi is not None


# Incrementally grown tables of {sqrt(P_n)} per fixed-point precision.
_tables: dict[int, dict] = {}


def _ensure_table(n: int, bits: int) -> dict:
    if bits > 2 * _LIMB:
        raise ValueError(f"limb cache supports at most {2*_LIMB} bits")
    t = _tables.get(bits)
    if t is None:
        t = {"n": 0, "p": 0,
             "floats": np.empty(0), "hi": np.empty(0, np.int64), "lo": np.empty(0, np.int64)}
        _tables[bits] = t
    if t["n"] >= n:
        return t
    start, p = t["n"] + 1, t["p"]
    scale = float(1 << bits)
    two_bits = 2 * bits
    isq = math.isqrt
    new_f, new_hi, new_lo = [], [], []
    for i in range(start, n + 1):
        p += i * i
        f = isq(p)
        mant = isq(p << two_bits) - (f << bits)
        new_f.append(mant / scale)
        new_hi.append(mant >> _LIMB)
        new_lo.append(mant & _LOW_MASK)
    t["n"], t["p"] = n, p
    t["floats"] = np.concatenate([t["floats"], np.array(new_f, np.float64)])
    t["hi"] = np.concatenate([t["hi"], np.array(new_hi, np.int64)])
    t["lo"] = np.concatenate([t["lo"], np.array(new_lo, np.int64)])
    return t


def sqrt_frac_points(n: int, bits: int = DEFAULT_BITS, lo: int = 1) -> PhasePoints:
    """{sqrt(P_i)} for lo <= i <= n, with exact mantissa limbs attached."""
    if lo < 1 or n < lo:
        raise ValueError("need 1 <= lo <= n")
    t = _ensure_table(n, bits)
    sl = slice(lo - 1, n)
    return PhasePoints(t["floats"][sl], bits, t["hi"][sl], t["lo"][sl])


def as_phase_points(points, bits: int = DEFAULT_BITS) -> PhasePoints:
    """Coerce raw floats or FixedFrac values into a PhasePoints set."""
    if isinstance(points, PhasePoints):
        return points
    seq = list(points)
    if seq and isinstance(seq[0], FixedFrac):
        b = seq[0].bits
        if any(ff.bits != b for ff in seq):
            raise ValueError("mixed fixed-point precisions in one point set")
        if b > 2 * _LIMB:
            raise ValueError(f"at most {2*_LIMB} fixed-point bits supported here")
        scale = float(1 << b)
        vals = np.array([ff.mantissa / scale for ff in seq], np.float64)
        hi = np.array([ff.mantissa >> _LIMB for ff in seq], np.int64)
        lo_ = np.array([ff.mantissa & _LOW_MASK for ff in seq], np.int64)
        return PhasePoints(vals, b, hi, lo_)
    vals = np.asarray(seq, np.float64)
    return PhasePoints(vals, bits)


def _phase_fractions(pts: PhasePoints, m: int) -> np.ndarray:
    """(m * x_n) mod 1 as float64, exactly reduced when limbs are present."""
    if not pts.exact:
        return np.mod(m * pts.values, 1.0)
    if abs(m) <= _FAST_M_CAP:
        # (m*mant) mod 2^bits in two limbs; int64 two's complement makes the
        # masked low parts and arithmetic carry shifts valid for m < 0 too
        c = m * pts.lo
        if pts.bits <= _LIMB:  # whole mantissa fits in the low limb
            return (c & ((1 << pts.bits) - 1)) * (2.0 ** -pts.bits)
        low = c & _LOW_MASK
        d = m * pts.hi + (c >> _LIMB)
        high = d & ((1 << (pts.bits - _LIMB)) - 1)
        return high * (2.0 ** (_LIMB - pts.bits)) + low * (2.0 ** -pts.bits)
    modulus = 1 << pts.bits
    scale = float(modulus)
    mants = (pts.hi.astype(object) << _LIMB) | pts.lo.astype(object)
    return np.array([(m * int(v)) % modulus for v in mants], np.float64) / scale


def _sum_exp(pts: PhasePoints, m: int) -> complex:
    ph = _phase_fractions(pts, m)
    return complex(np.exp(2j * np.pi * ph).sum())


def exp_sum(lo: int, hi: int, m: int, bits: int = DEFAULT_BITS,
            attach_bound: bool = False) -> ExpSum:
    """S = sum over lo <= n <= hi of e(m * sqrt(P_n)).

    The integer part of m*sqrt(P_n) never matters, so phases stay small and
    cancellation-free.  The modulus carries an absolute error bound built
    from the per-term phase budget.
    """
    if m == 0:
        raise ValueError("harmonic m must be nonzero")
    if lo < 1 or hi < lo:
        raise ValueError("need 1 <= lo <= hi")
    if abs(m) * 2.0 ** -bits >= 1e-12:
        needed = math.ceil(math.log2(abs(m) * 1e12))
        raise PrecisionError(
            f"m={m} needs at least {needed} fixed-point bits (have {bits})")
    pts = sqrt_frac_points(hi, bits, lo=lo)
    s = _sum_exp(pts, m)
    count = hi - lo + 1
    err = count * 2 * math.pi * (abs(m) * 2.0 ** -bits + 2.0 ** -52)
    bound = kn_bound(lo, hi, abs(m)) if (attach_bound and lo < hi) else None
    return ExpSum(m, lo, hi, s.real, s.imag, err, bound)


def deriv_bounds(n: float) -> DerivBounds:
    """First and second derivatives of h(x) = sqrt(P_x) at x = n."""
    if n < 1:
        raise ValueError("derivatives evaluated for n >= 1 only")
    prod = n * (n + 1) * (2 * n + 1)
    num = 6.0 * n * n + 6.0 * n + 1.0
    s6 = math.sqrt(6.0)
    sp = math.sqrt(prod)
    h1 = num / (2.0 * s6 * sp)
    h2 = (12.0 * n + 6.0) / (2.0 * s6 * sp) - num * num / (4.0 * s6 * prod * sp)
    return DerivBounds(n, h1, h2)


def kn_bound(lo: int, hi: int, m: int) -> float:
    """Second-derivative bound for |sum e(m*sqrt(P_n))| over [lo, hi].

    Uses rho = m * h''(hi); h'' is positive and decreasing, so this is a
    valid curvature lower bound on the whole range.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not lo < hi:
        raise ValueError("need lo < hi")
    h1_lo = deriv_bounds(lo).h1
    h1_hi = deriv_bounds(hi).h1
    rho = m * deriv_bounds(hi).h2
    return (m * abs(h1_hi - h1_lo) + 2.0) * (4.0 / math.sqrt(rho) + 3.0)


def star_discrepancy(points) -> DiscrepancyResult:
    """Exact star discrepancy of a finite point set in [0, 1)."""
    pts = as_phase_points(points)
    u = np.sort(pts.values)
    n = len(u)
    if n < 1:
        raise ValueError("empty point set")
    if u[0] < 0.0 or u[-1] >= 1.0:
        raise ValueError("points must lie in [0, 1)")
    i = np.arange(1, n + 1, dtype=np.float64)
    d_star = float(max((i / n - u).max(), (u - (i - 1) / n).max()))
    return DiscrepancyResult(n, n * d_star, d_star)


def erdos_turan(points, K: int, bits: int = DEFAULT_BITS) -> DiscrepancyResult:
    """Exact D(N) next to its truncated exponential-sum upper bound.

    et_bound = N/(K+1) + 3 * sum_{m<=K} |S_m| / m.  The inequality
    D(N) <= et_bound + slack is asserted, where slack is the accumulated
    phase-error budget of the computed sums.
    """
    if K < 1:
        raise ValueError("truncation K must be >= 1")
    pts = as_phase_points(points, bits)
    if K * 2.0 ** -pts.bits >= 1e-12 and pts.exact:
        needed = math.ceil(math.log2(K * 1e12))
        raise PrecisionError(
            f"K={K} needs at least {needed} fixed-point bits (have {pts.bits})")
    base = star_discrepancy(pts)
    n = base.N
    total = n / (K + 1)
    slack = 0.0
    for m in range(1, K + 1):
        s = abs(_sum_exp(pts, m))
        per_term = m * 2.0 ** -pts.bits if pts.exact else m * 2.0 ** -52
        err = n * 2 * math.pi * (per_term + 2.0 ** -52)
        total += 3.0 * s / m
        slack += 3.0 * err / m
    slack += 64 * 2.0 ** -52 * n  # float summation slop
    if base.d_unnormalized > total + slack:
        raise AssertionError("discrepancy exceeded its exponential-sum bound")
    return DiscrepancyResult(n, base.d_unnormalized, base.d_star, K, float(total), float(slack))


def weyl_profile(N: int, m_max: int, bits: int = DEFAULT_BITS) -> list[tuple[int, float]]:
    """|S_m(N)| / N for each harmonic m in [1, m_max]."""
    if N < 1 or m_max < 1:
        raise ValueError("need N >= 1 and m_max >= 1")
    pts = sqrt_frac_points(N, bits)
    return [(m, abs(_sum_exp(pts, m)) / N) for m in range(1, m_max + 1)]


def half_distance_histogram(x: int, bins: int) -> HistogramResult:
    """Histogram of |sqrt(P_n) - y_n| over [0, 1/2] in equal-width bins.

    Bins are left-open right-closed; membership comes from comparing
    (2*bins)^2 * P_n against exact squares, so no value is ever rounded
    across an edge.  Exact boundary hits (only the zero distances of the
    perfect squares, by a parity argument) are flagged and kept in bin 1.
    """
    if x < 1:
        raise ValueError("x must be >= 1")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    L = 2 * bins
    ll = L * L
    counts = [0] * (bins + 1)
    flagged = 0
    p = 0
    isq = math.isqrt
    for n in range(1, x + 1):
        p += n * n
        f = isq(p)
        d = p - f * f
        if d == 0:
            counts[1] += 1
            flagged += 1
            continue
        r = isq(ll * p)
        j = r - L * f + 1 if d <= f else L * (f + 1) - r
        counts[j] += 1
    return HistogramResult(x, bins, tuple(counts[1:]), flagged)


def doubled_distance_points(x: int, bits: int = DEFAULT_BITS) -> PhasePoints:
    """The sequence 2*|sqrt(P_n) - y_n| for n <= x as points in [0, 1).

    Used to control histogram deviations through the discrepancy of the
    doubled distances.  The below/above-half split is exact (top limb
    against 2^(bits-49)); float values that round up to 1.0 are pulled one
    ulp down since the true values are strictly below 1.
    """
    pts = sqrt_frac_points(x, bits)
    if bits > _LIMB:
        below = pts.hi < (1 << (bits - _LIMB - 1))
    else:
        below = pts.lo < (1 << (bits - 1))
    vals = np.where(below, 2.0 * pts.values, 2.0 * (1.0 - pts.values))
    vals[vals >= 1.0] = np.nextafter(1.0, 0.0)
    return PhasePoints(vals, bits)
