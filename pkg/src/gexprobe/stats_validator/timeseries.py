"""Granger F-tests and Pearson correlation."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

from gexprobe.errors import SingularDesign, StatsError


class Differencing(str, Enum):
    LEVEL = "Level"
    DIFF = "Diff"


@dataclass(frozen=True)
class GrangerResult:
    lag: int
    f_stat: float
    p_value: float
    df_num: int
    df_den: int
    rss_restricted: float
    rss_unrestricted: float

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def _lags(v: np.ndarray, lag: int) -> np.ndarray:
    n = v.size
    return np.column_stack([v[lag - k:n - k] for k in range(1, lag + 1)])


def _rss(X: np.ndarray, y: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return float(r @ r)


def granger(x, y, lag: int, differencing: Differencing = Differencing.LEVEL) -> GrangerResult:
    """Does history of ``x`` improve an autoregression of ``y``?"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length 1-d series")
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if Differencing(differencing) is Differencing.DIFF:
        x, y = np.diff(x), np.diff(y)
    n = y.size
    if n <= 3 * lag + 3:
        raise ValueError(f"series of length {n} too short for lag {lag}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise StatsError("non-finite values in series")
    # scale both series; F is invariant but conditioning is not
    sx, sy = x.std(), y.std()
    if sx == 0 or sy == 0:
        raise SingularDesign("constant series")
    x = (x - x.mean()) / sx
    y = (y - y.mean()) / sy

    target = y[lag:]
    ones = np.ones((n - lag, 1))
    Xr = np.hstack([ones, _lags(y, lag)])
    Xu = np.hstack([Xr, _lags(x, lag)])
    if np.linalg.matrix_rank(Xu) < Xu.shape[1]:
        raise SingularDesign(f"collinear regressors at lag {lag}")
    rss_r, rss_u = _rss(Xr, target), _rss(Xu, target)
    df_den = (n - lag) - 2 * lag - 1
    if rss_u <= 1e-12 * max(rss_r, 1e-300):
        raise SingularDesign("unrestricted model fits exactly")
    f = max(0.0, (rss_r - rss_u) / lag / (rss_u / df_den))
    return GrangerResult(lag, f, float(stats.f.sf(f, lag, df_den)), lag, df_den, rss_r, rss_u)


@dataclass(frozen=True)
class PearsonResult:
    r: float
    p_value: float
    n: int


def pearson(x, y) -> PearsonResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("need equal-length series of length >= 3")
    if x.std() == 0 or y.std() == 0:
        raise StatsError("correlation undefined for a constant series")
    res = stats.pearsonr(x, y)
    return PearsonResult(float(np.clip(res[0], -1.0, 1.0)), float(res[1]), int(x.size))
