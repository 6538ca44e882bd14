"""Binomial proportion inference: Wilson intervals, exact tests, power."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from scipy.stats import binom, norm

from gexprobe.llm_harness.parsing import DetectionResult


@dataclass(frozen=True)
class RateEstimate:
    successes: int
    n: int
    rate: float
    ci_low: float
    ci_high: float


def wilson_ci(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    z = float(norm.ppf(0.5 + level / 2))
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # the closed form can miss the endpoints by an ulp
    lo = 0.0 if successes == 0 else max(0.0, min(p, centre - half))
    hi = 1.0 if successes == n else min(1.0, max(p, centre + half))
    return lo, hi


def rate_estimate(successes: int, n: int, level: float = 0.95) -> RateEstimate:
    lo, hi = wilson_ci(successes, n, level)
    return RateEstimate(successes, n, successes / n, lo, hi)


def detection_rate(detections: Iterable[DetectionResult], total_days: int) -> RateEstimate:
    """Mechanical detections per tested day, with a 95% Wilson interval."""
    if total_days <= 0:
        raise ValueError("total_days must be positive")
    k = sum(1 for d in detections if d.mechanical)
    return rate_estimate(k, total_days)


def binomial_test(successes: int, n: int, p0: float = 0.5) -> float:
    """One-sided exact p-value P(X >= successes) under Binomial(n, p0)."""
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    if successes == 0:
        return 1.0
    return float(binom.sf(successes - 1, n, p0))


def bonferroni(alpha: float, m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    return alpha / m


@dataclass(frozen=True)
class PowerResult:
    n_exact: int
    critical_value: int     # reject when X >= critical_value at n_exact
    achieved_power: float
    n_normal: int           # normal-approximation sample size, for comparison


def exact_power(n: int, p1: float, p0: float, alpha: float) -> tuple[float, int]:
    """Power of the level-alpha one-sided exact test at size n, and its critical value."""
    # smallest c with P(X >= c | p0) <= alpha
    c = int(binom.isf(alpha, n, p0)) + 1
    while c > 0 and binom.sf(c - 2, n, p0) <= alpha:
        c -= 1
    while binom.sf(c - 1, n, p0) > alpha:
        c += 1
    return float(binom.sf(c - 1, n, p1)), c


def normal_approx_n(p1: float, p0: float, alpha: float, power: float) -> int:
    za, zb = float(norm.ppf(1 - alpha)), float(norm.ppf(power))
    num = za * math.sqrt(p0 * (1 - p0)) + zb * math.sqrt(p1 * (1 - p1))
    return math.ceil((num / (p1 - p0)) ** 2)


def power_analysis(p1: float, p0: float = 0.5, alpha: float = 0.05, power: float = 0.80,
                   max_n: int = 100_000) -> PowerResult:
    """Smallest n whose exact one-sided binomial test reaches ``power`` under ``p1``.

    Exact power is a sawtooth in n, so a larger n can briefly dip back
    below target; the first crossing is reported.
    """
    if not 0 < p0 < p1 < 1:
        raise ValueError("require 0 < p0 < p1 < 1")
    for n in range(1, max_n + 1):
        pw, c = exact_power(n, p1, p0, alpha)
        if c <= n and pw >= power:
            return PowerResult(n, c, pw, normal_approx_n(p1, p0, alpha, power))
    raise ValueError(f"target power not reached below n={max_n}")
