"""Exact arithmetic for the distance from square pyramidal numbers to squares.

The sequence a_n = |P_n - y_n^2| (P_n the n-th square pyramidal number, y_n^2
the closest square) is computed exactly at scale, together with its moments,
equidistribution diagnostics, rigorous moment sandwiches, and the min-max
balancing used to optimize the asymptotic error exponents.
"""

from .exactseq import (
    DEFAULT_BITS,
    FixedFrac,
    RangeSpec,
    Side,
    Term,
    frac_sqrt,
    in_exceptional,
    isqrt,
    near_half_count,
    nearest_square_root,
    pyramidal,
    stream_terms,
    term,
)
from .moments import (
    MomentSummary,
    SandwichResult,
    average,
    fit_residual,
    main_term,
    moment,
    sandwich,
)
from .equidist import (
    DiscrepancyResult,
    ExpSum,
    deriv_bounds,
    erdos_turan,
    exp_sum,
    half_distance_histogram,
    kn_bound,
    sqrt_frac_points,
    star_discrepancy,
    weyl_profile,
)
from .minimax import (
    MinMaxProblem,
    MinMaxSolution,
    Monomial,
    balance_moment_residual,
    solve_exponents,
    solve_numeric,
    verify_solution,
)

__version__ = "0.1.0"
