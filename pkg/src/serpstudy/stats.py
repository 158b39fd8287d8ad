"""Significance testing and descriptive statistics.

The two-tailed p-value for the t statistic comes from the regularized
incomplete beta function, evaluated with a continued fraction (modified
Lentz). Target accuracy is 1e-8 absolute; the test suite validates it
against an independent quadrature oracle rather than a library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the continued fraction on the side where it converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_tailed(t: float, df: float) -> float:
    """P(|T| >= |t|) for T ~ Student t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


@dataclass(frozen=True)
class TTestResult:
    t: float
    degrees_of_freedom: float
    p_two_tailed: float
    significant_at: bool  # alpha <= 0.05
    degenerate: bool = False


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    min: float
    max: float
    mean: float
    sd: float


def _mean(values) -> float:
    return sum(values) / len(values)


def _sample_var(values, mean: float) -> float:
    if len(values) < 2:
        return 0.0
    return sum((v - mean) ** 2 for v in values) / (len(values) - 1)


def _result(t: float, df: float, degenerate: bool = False, p: float | None = None) -> TTestResult:
    if p is None:
        p = t_sf_two_tailed(t, df)
    return TTestResult(t=t, degrees_of_freedom=df, p_two_tailed=p,
                       significant_at=p <= 0.05, degenerate=degenerate)


def t_test_two_sample(xs, ys, variant: str = "pooled") -> TTestResult:
    """Two-tailed two-sample t-test: pooled, welch, or paired.

    Degenerate inputs (zero variance everywhere) yield t=0, p=1 when the
    means agree and p=0 with the degenerate flag when they do not.
    """
    xs, ys = list(xs), list(ys)
    if variant == "paired":
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValueError("paired test needs equally sized samples with n >= 2")
        diffs = [x - y for x, y in zip(xs, ys)]
        n = len(diffs)
        mean_d = _mean(diffs)
        var_d = _sample_var(diffs, mean_d)
        df = n - 1
        if var_d == 0.0:
            if mean_d == 0.0:
                return _result(0.0, df, p=1.0)
            return _result(math.copysign(math.inf, mean_d), df, degenerate=True, p=0.0)
        return _result(mean_d / math.sqrt(var_d / n), df)

    if variant not in ("pooled", "welch"):
        raise ValueError(f"unknown t-test variant {variant!r}")
    if len(xs) < 2 or len(ys) < 2:
        raise ValueError("both samples need n >= 2")
    n1, n2 = len(xs), len(ys)
    m1, m2 = _mean(xs), _mean(ys)
    v1, v2 = _sample_var(xs, m1), _sample_var(ys, m2)

    if variant == "pooled":
        df = n1 + n2 - 2
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / df
        if sp2 == 0.0:
            if m1 == m2:
                return _result(0.0, df, p=1.0)
            return _result(math.copysign(math.inf, m1 - m2), df, degenerate=True, p=0.0)
        return _result((m1 - m2) / math.sqrt(sp2 * (1.0 / n1 + 1.0 / n2)), df)

    se2 = v1 / n1 + v2 / n2
    if se2 == 0.0:
        df = n1 + n2 - 2
        if m1 == m2:
            return _result(0.0, df, p=1.0)
        return _result(math.copysign(math.inf, m1 - m2), df, degenerate=True, p=0.0)
    df = se2 ** 2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    return _result((m1 - m2) / math.sqrt(se2), df)


def descriptive_stats(values) -> DescriptiveStats:
    """N, min, max, mean, and sample standard deviation (n-1 denominator).

    Full precision; presentation rounding is the reporter's job.
    """
    values = list(values)
    if not values:
        raise ValueError("descriptive_stats needs at least one value")
    mean = _mean(values)
    return DescriptiveStats(
        n=len(values),
        min=min(values),
        max=max(values),
        mean=mean,
        sd=math.sqrt(_sample_var(values, mean)),
    )
