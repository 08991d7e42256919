"""Global numeric tolerance and default budgets."""

import os

DEFAULT_TOL = 1e-9


def tol() -> float:
    """Return the global tolerance, overridable through ``LATCOVER_TOL``."""
    value = os.environ.get("LATCOVER_TOL")
    if value is None:
        return DEFAULT_TOL
    return float(value)


# intermediate integers in enumeration are kept in int64
INT_BUDGET = 2**62
# float Gram-Schmidt is trusted up to this entry size
FLOAT_EXACT_BUDGET = 2**40

MAX_PIECES = 2_000_000
MAX_ENUM_POINTS = 5_000_000
# grid candidates for the explicit greedy covering
MAX_GREEDY_CANDIDATES = 400_000
# pieces materialized for JSON or explicit iteration
MAX_MATERIALIZED = 200_000
# samples per binary-search step in the randomized solver
RAND_MAX_SAMPLES = 1 << 20
