"""Exact integer core for square pyramidal numbers and their nearest squares.

Everything in this module is decided by integer comparisons: no floating
point result ever determines a classification.  The only floats appear in
certified prefilters whose error bounds are argued inline.

Conventions used throughout:

  p = pyramidal(n)            the n-th square pyramidal number
  f = isqrt(p)                so f^2 <= p < (f+1)^2
  d = p - f^2                 offset above the lower square
  a = min(d, 2f+1-d)          distance to the nearest square
  {sqrt(p)} < 1/2 exactly when d <= f, i.e. 4p < (2f+1)^2.  Equality never
  happens: 4p is even while (2f+1)^2 is odd.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator

DEFAULT_BITS = 96


class Side(Enum):
    """Which side of 1/2 the fractional part of sqrt(P_n) falls on.

    Perfect squares ({sqrt(P_n)} = 0, n in {1, 24}) are BELOW_HALF by
    convention.
    """

    BELOW_HALF = "below"
    ABOVE_HALF = "above"


@dataclass(frozen=True)
class Term:
    """One fully resolved element of the nearest-square distance sequence."""

    n: int
    p: int       # n-th square pyramidal number
    f: int       # floor(sqrt(p))
    y: int       # root of the square closest to p (f or f+1)
    a: int       # |p - y^2|
    side: Side


@dataclass(frozen=True)
class FixedFrac:
    """Fractional part of sqrt(P_n) as a guaranteed-error fixed-point value.

    value = mantissa / 2**bits, with |value - {sqrt(P_n)}| <= err_ulps / 2**bits.
    The constructor used by frac_sqrt always yields err_ulps = 1 (floor
    rounding of the true fractional part).
    """

    mantissa: int
    bits: int
    err_ulps: int = 1

    def __post_init__(self):
        if not 0 <= self.mantissa < (1 << self.bits):
            raise ValueError("mantissa out of range for declared bits")

    def __float__(self) -> float:
        return self.mantissa / (1 << self.bits)

    @property
    def value(self) -> float:
        return float(self)

    def as_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.bits)


@dataclass(frozen=True)
class RangeSpec:
    """An inclusive index range [lo, hi] with a work-splitting granularity."""

    lo: int
    hi: int
    chunk: int = 1 << 16

    def __post_init__(self):
        if self.lo < 1 or self.hi < self.lo:
            raise ValueError(f"invalid range [{self.lo}, {self.hi}]")
        if self.chunk < 1:
            raise ValueError("chunk must be positive")

    def chunks(self) -> Iterator[tuple[int, int]]:
        """Disjoint (lo, hi) sub-ranges of at most `chunk` indices, in order."""
        lo = self.lo
        while lo <= self.hi:
            hi = min(lo + self.chunk - 1, self.hi)
            yield lo, hi
            lo = hi + 1


def pyramidal(n: int) -> int:
    """n-th square pyramidal number n(n+1)(2n+1)/6, exactly."""
    if n < 0:
        raise ValueError("pyramidal index must be nonnegative")
    # among n, n+1, 2n+1 there is always a factor 2 and a factor 3
    return n * (n + 1) * (2 * n + 1) // 6


def isqrt(n: int) -> int:
    """Floor integer square root, exact for any size of input."""
    if n < 0:
        raise ValueError("isqrt of negative number")
    return math.isqrt(n)


def nearest_square_root(p: int) -> int:
    """The y minimizing |p - y^2|.

    Ties would go to the smaller root, but cannot occur: equality needs
    2p = f^2 + (f+1)^2, whose right side is odd.
    """
    if p < 0:
        raise ValueError("no nearest square below zero")
    f = math.isqrt(p)
    return f if 2 * p <= f * f + (f + 1) * (f + 1) else f + 1


def term(n: int) -> Term:
    """Fully resolved sequence element for index n >= 1."""
    if n < 1:
        raise ValueError("term index must be >= 1")
    p = pyramidal(n)
    f = math.isqrt(p)
    d = p - f * f
    if 4 * p < (2 * f + 1) ** 2:
        return Term(n, p, f, f, d, Side.BELOW_HALF)
    return Term(n, p, f, f + 1, 2 * f + 1 - d, Side.ABOVE_HALF)


def stream_terms(spec: RangeSpec) -> Iterator[Term]:
    """Yield Term for every n in [lo, hi] in order.

    The square pyramidal number is carried incrementally (p += n^2), so a
    full streaming pass costs one exact isqrt per index.  Disjoint chunks
    from spec.chunks() can be processed by independent workers and merged
    by index; any aggregation layered on top must be associative and
    commutative over disjoint ranges.
    """
    p = pyramidal(spec.lo - 1)
    for n in range(spec.lo, spec.hi + 1):
        p += n * n
        f = math.isqrt(p)
        d = p - f * f
        if d <= f:  # 4p < (2f+1)^2
            yield Term(n, p, f, f, d, Side.BELOW_HALF)
        else:
            yield Term(n, p, f, f + 1, 2 * f + 1 - d, Side.ABOVE_HALF)


def terms_block(lo: int, hi: int) -> list[Term]:
    """Materialized stream_terms over one chunk; picklable worker unit."""
    return list(stream_terms(RangeSpec(lo, hi, chunk=hi - lo + 1)))


def frac_sqrt(n: int, bits: int = DEFAULT_BITS) -> FixedFrac:
    """{sqrt(P_n)} in fixed point: mantissa = floor(2**bits * {sqrt(P_n)}).

    isqrt(p << 2*bits) is floor(2**bits * sqrt(p)), so the result is the
    floor of the true fractional part scaled by 2**bits and the error is
    strictly below one ulp.
    """
    if n < 1:
        raise ValueError("index must be >= 1")
    if bits < 32:
        raise ValueError("need at least 32 bits of fixed-point precision")
    p = pyramidal(n)
    f = math.isqrt(p)
    mant = math.isqrt(p << (2 * bits)) - (f << bits)
    return FixedFrac(mant, bits, 1)


def in_exceptional(n: int) -> bool:
    """Whether the nearest-square root differs from the nearest integer to sqrt(P_n).

    Both memberships are decided by exact integer comparisons:
      nearest square is f^2    <=>  2p <= f^2 + (f+1)^2
      nearest integer is f     <=>  4p < (2f+1)^2
    For integer p both reduce to p <= f^2 + f, so the scan is expected to
    come back empty; the operation still evaluates the two sides
    independently so the definition is checked, not assumed.
    """
    if n < 1:
        raise ValueError("index must be >= 1")
    p = pyramidal(n)
    f = math.isqrt(p)
    root_is_lower = 2 * p <= f * f + (f + 1) * (f + 1)
    int_is_lower = 4 * p < (2 * f + 1) ** 2
    return root_is_lower != int_is_lower


def exceptional_indices(x: int) -> list[int]:
    """All n <= x with in_exceptional(n), by exhaustive exact scan."""
    if x < 1:
        raise ValueError("scan bound must be >= 1")
    out = []
    p = 0
    for n in range(1, x + 1):
        p += n * n
        f = math.isqrt(p)
        if (2 * p <= f * f + (f + 1) * (f + 1)) != (4 * p < (2 * f + 1) ** 2):
            out.append(n)
    return out


def half_window_check(n: int) -> bool:
    """True iff {sqrt(P_n)} lies within 1/sqrt(P_n) of 1/2, decided exactly.

    Any member of the exceptional set must satisfy this window (it is the
    union of the two one-sided membership windows); the check multiplies
    |{sqrt(p)} - 1/2| < 1/sqrt(p) through by 2*sqrt(p) and squares, so only
    integers are compared.
    """
    p = pyramidal(n)
    f = math.isqrt(p)
    g = 2 * p  # |g - (2f+1) sqrt(p)| < 2  <=>  the window condition
    h = 2 * f + 1
    if g >= 2 and (g - 2) ** 2 >= h * h * p:
        return False
    return h * h * p < (g + 2) ** 2


def near_half_count(x: int, bits: int = DEFAULT_BITS) -> tuple[int, int]:
    """Count n <= x with |{sqrt(P_n)} - 1/2| <= x^(-3/4), in fixed point.

    Returns (count, borderline).  The window threshold is the exact integer
    T = floor(2**bits * x^(-3/4)) obtained from two nested integer square
    roots.  Margins within 2 ulps of T are reported as borderline instead
    of being silently classified.  Perfect squares (fractional part 0) are
    excluded by convention.

    A certified float prefilter skips indices whose margin provably clears
    the window: the margin equals |4p - (2f+1)^2| / (4(sqrt(p)+f+1/2)) with
    an exact integer numerator, so a small safety factor on the float
    denominator gives a one-sided bound.
    """
    if x < 1:
        raise ValueError("scan bound must be >= 1")
    if bits < 32:
        raise ValueError("need at least 32 bits of fixed-point precision")
    scale = 1 << bits
    # T = floor(2^bits / x^(3/4)) = floor((2^(4 bits) / x^3)^(1/4))
    t_int = math.isqrt(math.isqrt((1 << (4 * bits)) // (x * x * x)))
    half = scale >> 1
    cutoff = (t_int + 4) / scale  # strictly above the window + flag zone
    count = 0
    borderline = 0
    p = 0
    two_bits = 2 * bits
    for n in range(1, x + 1):
        p += n * n
        f = math.isqrt(p)
        g = 4 * p - (2 * f + 1) ** 2
        if g == 0:
            continue  # parity: cannot happen
        d = p - f * f
        if d == 0:
            continue  # perfect square, excluded from the window
        den_up = 8.0 * math.sqrt(p) * (1.0 + 1e-12) + 4.0
        if abs(g) > cutoff * den_up:
            continue  # margin certainly exceeds T + 2 ulps
        mant = math.isqrt(p << two_bits) - (f << bits)
        m = abs(mant - half)
        if abs(m - t_int) <= 2:
            borderline += 1
        elif m < t_int:
            count += 1
    return count, borderline
