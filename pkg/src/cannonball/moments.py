"""Exact moments of the nearest-square distance sequence and their asymptotics.

M_k(x) = sum of a_n^k over n <= x is accumulated as a Python integer, so
every reported moment is exact.  Main terms are evaluated with mpmath at
WORK_PREC bits; residuals are exact-minus-main at that precision.

The sandwich bounds bracket M_k(x) rigorously: bin weights are exact
rationals and the per-term weights (sqrt(P_n)+y_n)^k are accumulated from
floor/ceiling fixed-point mantissas, so `lower <= exact <= upper` is an
integer-arithmetic fact, not an approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from multiprocessing import get_context

import mpmath as mp

from .exactseq import pyramidal

K_MAX = 12          # accumulator cap; configurable but bounded on purpose
WORK_PREC = 256     # binary precision for main terms and residuals
SANDWICH_BITS = 64  # fixed-point precision of the directed weight sums


@dataclass(frozen=True)
class MomentSummary:
    x: int
    k: int
    exact: int            # M_k(x), exact
    main: mp.mpf          # x^((3/2)k+1) / (3^(k/2) ((3/2)k+1) (k+1))
    residual: mp.mpf      # exact - main
    normalized: mp.mpf    # residual / x^((3/2)k + 11/12)


@dataclass(frozen=True)
class AverageSummary:
    x: int
    exact: Fraction       # M_1(x) / x as an exact rational
    value: mp.mpf
    main: mp.mpf          # x^(3/2) / (5 sqrt(3))


@dataclass(frozen=True)
class SandwichResult:
    x: int
    k: int
    L: int
    lower: Fraction
    upper: Fraction
    exact: int

    @property
    def rel_width(self) -> float:
        if self.upper == 0:
            return 0.0
        return float((self.upper - self.lower) / self.upper)


@dataclass(frozen=True)
class FitReport:
    xs: tuple
    values: tuple         # |M_k(x) - main| as floats
    slope: float
    intercept: float


def _sums_k1(lo: int, hi: int) -> tuple[int]:
    p = pyramidal(lo - 1)
    isq = math.isqrt
    s1 = 0
    for n in range(lo, hi + 1):
        p += n * n
        f = isq(p)
        d = p - f * f
        s1 += d if d <= f else 2 * f + 1 - d
    return (s1,)


def _sums_k123(lo: int, hi: int) -> tuple[int, int, int]:
    p = pyramidal(lo - 1)
    isq = math.isqrt
    s1 = s2 = s3 = 0
    for n in range(lo, hi + 1):
        p += n * n
        f = isq(p)
        d = p - f * f
        a = d if d <= f else 2 * f + 1 - d
        aa = a * a
        s1 += a
        s2 += aa
        s3 += aa * a
    return s1, s2, s3


def _sums_generic(lo: int, hi: int, ks: tuple[int, ...]) -> tuple[int, ...]:
    p = pyramidal(lo - 1)
    isq = math.isqrt
    sums = [0] * len(ks)
    for n in range(lo, hi + 1):
        p += n * n
        f = isq(p)
        d = p - f * f
        a = d if d <= f else 2 * f + 1 - d
        for i, k in enumerate(ks):
            sums[i] += a ** k
    return tuple(sums)


def _block_sums(args) -> tuple[int, ...]:
    """Worker unit: exact power sums over one index chunk."""
    lo, hi, ks = args
    if ks == (1,):
        return _sums_k1(lo, hi)
    if ks == (1, 2, 3):
        return _sums_k123(lo, hi)
    return _sums_generic(lo, hi, ks)


def _check_k(k: int):
    if not 1 <= k <= K_MAX:
        raise ValueError(f"moment order k={k} outside supported range 1..{K_MAX}")


def power_sums_at(xs, ks, workers: int = 1, chunk: int = 1 << 16,
                  start_n: int = 1, init=None, progress=None) -> dict[int, tuple[int, ...]]:
    """Exact partial sums of a_n^k for each k in ks, snapshot at every x in xs.

    One cumulative pass over [start_n, max(xs)] split into chunks that never
    straddle a snapshot point; chunk results are merged in index order, so
    the outcome is identical for any worker count.  `init` resumes from
    previously accumulated sums (checkpointing); `progress(last_n, sums)` is
    invoked after each merged chunk.
    """
    xs = sorted(set(int(x) for x in xs))
    if xs[0] < 1:
        raise ValueError("snapshot points must be >= 1")
    ks = tuple(ks)
    for k in ks:
        _check_k(k)
    marks = [x for x in xs if x >= start_n]
    if len(marks) != len(xs):
        raise ValueError(f"snapshot points below the resume index {start_n}")
    # chunks never straddle a snapshot point, so every mark is a block end
    blocks = []
    lo = start_n
    for m in marks:
        while lo <= m:
            hi = min(lo + chunk - 1, m)
            blocks.append((lo, hi, ks))
            lo = hi + 1

    sums = list(init) if init is not None else [0] * len(ks)
    out: dict[int, tuple[int, ...]] = {}
    want = set(xs)

    def consume(block, result):
        nonlocal sums
        sums = [s + r for s, r in zip(sums, result)]
        last = block[1]
        if last in want:
            out[last] = tuple(sums)
        if progress is not None:
            progress(last, tuple(sums))

    if workers > 1 and len(blocks) > 1:
        ctx = get_context()
        with ctx.Pool(processes=min(workers, len(blocks))) as pool:
            for block, result in zip(blocks, pool.imap(_block_sums, blocks)):
                consume(block, result)
    else:
        for block in blocks:
            consume(block, _block_sums(block))
    return out


def power_sums(x: int, ks, workers: int = 1, chunk: int = 1 << 16) -> tuple[int, ...]:
    """Exact (sum a_n^k for k in ks) over n <= x."""
    return power_sums_at([x], ks, workers=workers, chunk=chunk)[x]


def main_term(x: int, k: int) -> mp.mpf:
    """Leading asymptotic term of M_k(x).

    At k=1 the coefficient equals 1/(5 sqrt(3)): sqrt(3) * (5/2) * 2 = 5 sqrt(3).
    """
    if x < 1:
        raise ValueError("x must be >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    with mp.workprec(WORK_PREC):
        coeff = 1 / (mp.power(3, mp.mpf(k) / 2) * (mp.mpf(3 * k) / 2 + 1) * (k + 1))
        return coeff * mp.power(x, mp.mpf(3 * k + 2) / 2)


def summary_from_exact(x: int, k: int, exact: int) -> MomentSummary:
    """Attach main term and residual diagnostics to an exact moment value."""
    with mp.workprec(WORK_PREC):
        main = main_term(x, k)
        residual = mp.mpf(exact) - main
        normalized = residual / mp.power(x, mp.mpf(3 * k) / 2 + mp.mpf(11) / 12)
    return MomentSummary(x, k, exact, main, residual, normalized)


def moment(x: int, k: int, workers: int = 1, chunk: int = 1 << 16) -> MomentSummary:
    """Exact M_k(x) with its main term and residual diagnostics."""
    if x < 1:
        raise ValueError("x must be >= 1")
    _check_k(k)
    exact = power_sums(x, (k,), workers=workers, chunk=chunk)[0]
    return summary_from_exact(x, k, exact)


def average(x: int, workers: int = 1, chunk: int = 1 << 16) -> AverageSummary:
    """A(x) = M_1(x)/x as an exact rational, with its real value and main term."""
    if x < 1:
        raise ValueError("x must be >= 1")
    m1 = power_sums(x, (1,), workers=workers, chunk=chunk)[0]
    with mp.workprec(WORK_PREC):
        value = mp.mpf(m1) / x
        main = mp.power(x, mp.mpf(3) / 2) / (5 * mp.sqrt(3))
    return AverageSummary(x, Fraction(m1, x), value, main)


def sandwich(x: int, k: int, L: int, bits: int = SANDWICH_BITS) -> SandwichResult:
    """Rigorous binned bracketing of M_k(x) with L distance bins on [0, 1/2].

    Bin j collects (j-1)/L < |sqrt(P_n) - y_n| <= j/L; membership is decided
    by comparing L^2 * P_n against squares, never by rounding.  The weight
    sums use floor mantissas for the lower bound and ceiling mantissas for
    the upper bound, so both bounds are exact rationals bracketing the exact
    integer moment.  Zero-distance terms (perfect squares) contribute zero
    to the moment and are omitted from both bounds.
    """
    if x < 1:
        raise ValueError("x must be >= 1")
    _check_k(k)
    if L < 2 or L % 2 != 0:
        raise ValueError(f"bin count L={L} must be a positive even integer")
    nbins = L // 2
    w_lo = [0] * (nbins + 1)   # 1-indexed bins
    w_hi = [0] * (nbins + 1)
    exact = 0
    p = 0
    ll = L * L
    isq = math.isqrt
    for n in range(1, x + 1):
        p += n * n
        f = isq(p)
        d = p - f * f
        if d == 0:
            continue
        r = isq(ll * p)  # floor(L sqrt(p)); never exact here since p is not square
        if d <= f:
            y = f
            j = r - L * f + 1
        else:
            y = f + 1
            j = L * y - r
        s_lo = isq(p << (2 * bits))
        t_lo = s_lo + (y << bits)
        w_lo[j] += t_lo ** k
        w_hi[j] += (t_lo + 1) ** k
        a = d if d <= f else 2 * f + 1 - d
        exact += a ** k
    lower_num = sum((j - 1) ** k * w_lo[j] for j in range(1, nbins + 1))
    upper_num = sum(j ** k * w_hi[j] for j in range(1, nbins + 1))
    den = L ** k << (k * bits)
    result = SandwichResult(x, k, L, Fraction(lower_num, den), Fraction(upper_num, den), exact)
    if not (result.lower <= exact and exact <= result.upper):
        raise AssertionError(f"sandwich violated at x={x} k={k} L={L}")
    return result


def fit_residual(xs, k: int, workers: int = 1, chunk: int = 1 << 16) -> FitReport:
    """Least-squares slope of log|M_k(x) - main| against log x."""
    xs = [int(x) for x in xs]
    if len(xs) < 3 or any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("need at least 3 strictly increasing x values")
    _check_k(k)
    table = power_sums_at(xs, (k,), workers=workers, chunk=chunk)
    values = []
    with mp.workprec(WORK_PREC):
        for x in xs:
            values.append(abs(mp.mpf(table[x][0]) - main_term(x, k)))
    pairs = [(math.log(x), float(mp.log(v))) for x, v in zip(xs, values) if v != 0]
    if len(pairs) < 3:
        raise ValueError("fewer than 3 nonzero residuals; cannot fit a slope")
    slope, intercept = _least_squares(pairs)
    return FitReport(tuple(xs), tuple(float(v) for v in values), slope, intercept)


def _least_squares(pairs) -> tuple[float, float]:
    n = len(pairs)
    mx = sum(p[0] for p in pairs) / n
    my = sum(p[1] for p in pairs) / n
    sxx = sum((p[0] - mx) ** 2 for p in pairs)
    sxy = sum((p[0] - mx) * (p[1] - my) for p in pairs)
    if sxx == 0:
        raise ValueError("degenerate fit: all x identical")
    slope = sxy / sxx
    return slope, my - slope * mx
