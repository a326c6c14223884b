"""Small statistics toolbox: means, confidence bounds, weighted fits."""
from __future__ import annotations

import numpy as np
from scipy import stats as sps

__all__ = [
    "mean_stderr",
    "upper_conf",
    "lower_conf",
    "ratio_of_means",
    "variance_interval",
    "wls_loglog",
]


def mean_stderr(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return float(x.mean()), float("inf")
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(n))


def _tq(level: float, dof: int) -> float:
    return float(sps.t.ppf(level, max(dof, 1)))


def upper_conf(mean: float, se: float, n: int, level: float = 0.95) -> float:
    """One-sided upper confidence bound of a mean."""
    if not np.isfinite(se):
        return float("inf")
    return mean + _tq(level, n - 1) * se


def lower_conf(mean: float, se: float, n: int, level: float = 0.95) -> float:
    if not np.isfinite(se):
        return float("-inf")
    return mean - _tq(level, n - 1) * se


def ratio_of_means(x, y, level: float = 0.95) -> dict:
    """Ratio mean(x)/mean(y) with a delta-method confidence interval.

    x and y are paired per-replica samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    mx, my = x.mean(), y.mean()
    r = mx / my
    if n < 2:
        return {"ratio": float(r), "se": float("inf"),
                "upper": float("inf"), "lower": float("-inf")}
    vx = x.var(ddof=1) / n
    vy = y.var(ddof=1) / n
    cxy = np.cov(x, y, ddof=1)[0, 1] / n
    var_r = (vx - 2.0 * r * cxy + r * r * vy) / (my * my)
    se = float(np.sqrt(max(var_r, 0.0)))
    q = _tq(level, n - 1)
    return {"ratio": float(r), "se": se, "upper": float(r + q * se), "lower": float(r - q * se)}


def variance_interval(x, level: float = 0.95) -> dict:
    """Sample variance with a chi-square confidence interval."""
    x = np.asarray(x, dtype=float)
    n = x.size
    v = float(x.var(ddof=1))
    dof = n - 1
    alpha = 1.0 - level
    hi = v * dof / sps.chi2.ppf(alpha / 2.0, dof)
    lo = v * dof / sps.chi2.ppf(1.0 - alpha / 2.0, dof)
    return {"variance": v, "lower": float(lo), "upper": float(hi), "n": int(n)}


def wls_loglog(N, means, stderrs, level: float = 0.95) -> dict:
    """Weighted least squares of log(mean) on log(N).

    Weights are inverse variances of log(mean) by the delta method.
    Returns the slope with its standard error and confidence interval.
    """
    N = np.asarray(N, dtype=float)
    means = np.asarray(means, dtype=float)
    stderrs = np.asarray(stderrs, dtype=float)
    if np.any(means <= 0):
        raise ValueError("means must be positive for a log-log fit")
    x = np.log(N)
    y = np.log(means)
    se_log = np.where(means > 0, stderrs / means, np.inf)
    se_log = np.maximum(se_log, 1e-12)
    w = 1.0 / se_log**2
    W = np.sum(w)
    xbar = np.sum(w * x) / W
    ybar = np.sum(w * y) / W
    sxx = np.sum(w * (x - xbar) ** 2)
    slope = float(np.sum(w * (x - xbar) * (y - ybar)) / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    dof = max(len(N) - 2, 1)
    scale = float(np.sum(w * resid**2) / dof)
    slope_se = float(np.sqrt(max(scale, 1.0) / sxx))
    q = _tq(level, dof)
    return {
        "slope": slope,
        "intercept": intercept,
        "slope_se": slope_se,
        "slope_lower": slope - q * slope_se,
        "slope_upper": slope + q * slope_se,
    }
