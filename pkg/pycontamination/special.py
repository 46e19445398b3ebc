"""
Regularized incomplete gamma function and the chi-square survival function.

P(a, x) is summed as a power series for x < a + 1; Q(a, x) = 1 - P(a, x) is
evaluated as a continued fraction (modified Lentz) otherwise. Both work in
the log domain for the prefactor x^a e^-x / Gamma(a).
"""

import math

MAX_ITERATIONS = 500
EPS = 1e-15
# smallest magnitude allowed in the Lentz recurrences
TINY = 1e-300


def _log_prefactor(a: float, x: float) -> float:
    return a * math.log(x) - x - math.lgamma(a)


def _lower_series(a: float, x: float) -> float:
    """P(a, x) by the series sum x^k / (a (a+1) ... (a+k))."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(MAX_ITERATIONS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")
    return total * math.exp(_log_prefactor(a, x))


def _upper_continued_fraction(a: float, x: float) -> float:
    """Q(a, x) by the Legendre continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITERATIONS + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    else:
        raise ArithmeticError(
            f"incomplete gamma continued fraction did not converge (a={a}, x={x})"
        )
    return math.exp(_log_prefactor(a, x)) * h


def gammainc(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _lower_series(a, x))
    return max(0.0, 1.0 - _upper_continued_fraction(a, x))


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _lower_series(a, x))
    return min(1.0, _upper_continued_fraction(a, x))


def chi2_sf(statistic: float, df: int) -> float:
    """Survival function of the chi-square distribution.

    Example:
        chi2_sf(4.0, 1) -> 0.0455 (approximately)
        chi2_sf(0.0, k) -> 1.0
    """
    if df < 1:
        raise ValueError(f"degrees of freedom must be at least 1, got {df}")
    if statistic <= 0:
        return 1.0
    return gammaincc(df / 2.0, statistic / 2.0)
