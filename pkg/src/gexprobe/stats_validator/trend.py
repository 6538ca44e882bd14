"""Cochran-Armitage test for a linear trend in proportions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy.stats import norm

from gexprobe.errors import DegenerateGroups


@dataclass(frozen=True)
class TrendResult:
    z: float
    p_value: float


def cochran_armitage(groups: Sequence[tuple[int, int]], scores: Sequence[float] | None = None) -> TrendResult:
    """Two-sided trend test over ordered ``(successes, total)`` groups.

    Default scores are 1..k. When every group has the same all-or-nothing
    outcome there is no variance to test against and Z is reported as 0.
    """
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if scores is None:
        scores = range(1, len(groups) + 1)
    scores = [float(s) for s in scores]
    if len(scores) != len(groups):
        raise ValueError("one score per group")
    for x, n in groups:
        if n < 0 or not 0 <= x <= n:
            raise ValueError(f"invalid group ({x}, {n})")
    total = sum(n for _, n in groups)
    if total == 0:
        raise DegenerateGroups("every group is empty")
    p = sum(x for x, _ in groups) / total
    stat = sum(t * (x - n * p) for t, (x, n) in zip(scores, groups))
    s1 = sum(t * n for t, (_, n) in zip(scores, groups))
    s2 = sum(t * t * n for t, (_, n) in zip(scores, groups))
    var = p * (1 - p) * (s2 - s1 * s1 / total)
    if var <= 0:
        return TrendResult(0.0, 1.0)
    z = stat / math.sqrt(var)
    return TrendResult(z, float(min(1.0, 2 * norm.sf(abs(z)))))
