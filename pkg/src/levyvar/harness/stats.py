"""Goodness-of-fit and tail diagnostics for Monte Carlo samples."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

HILL_FRACTION = 0.05


def ks_one_sample(x, cdf) -> dict:
    res = stats.kstest(np.asarray(x, dtype=float), cdf)
    return {"ks": float(res.statistic), "p_value": float(res.pvalue), "p_band": p_band(res.pvalue)}


def ks_two_sample(x, y) -> dict:
    res = stats.ks_2samp(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return {"ks": float(res.statistic), "p_value": float(res.pvalue), "p_band": p_band(res.pvalue)}


def p_band(p: float) -> str:
    for cut in (0.001, 0.01, 0.05):
        if p < cut:
            return f"<{cut}"
    return ">=0.05"


def ecf_distance(x, char_fn, thetas=None) -> float:
    """sup over a theta grid of |empirical char fn - char_fn|."""
    x = np.asarray(x, dtype=float)
    thetas = np.linspace(0.1, 2.0, 20) if thetas is None else np.asarray(thetas, dtype=float)
    emp = np.exp(1j * np.outer(thetas, x)).mean(axis=1)
    return float(np.max(np.abs(emp - np.asarray(char_fn(thetas)))))


def hill(x, fraction: float = HILL_FRACTION) -> dict:
    """Hill tail-index estimates from the top ``fraction`` order statistics of each tail."""
    x = np.asarray(x, dtype=float)
    out = {}
    for side, vals in (("right", x[x > 0]), ("left", -x[x < 0])):
        kk = int(fraction * len(x))
        if kk < 2 or len(vals) <= kk:
            out[side] = None
            continue
        top = np.sort(vals)[::-1]
        logs = np.log(top[:kk]) - math.log(top[kk])
        out[side] = float(1.0 / logs.mean())
    both = [v for v in out.values() if v is not None]
    out["pooled"] = float(np.mean(both)) if both else None
    out["fraction"] = fraction
    return out


def tail_mass_ratio(x, fraction: float = HILL_FRACTION) -> dict:
    """Right vs left tail mass beyond the (1 - fraction) quantile of |x - median|."""
    x = np.asarray(x, dtype=float)
    c = x - np.median(x)
    thr = np.quantile(np.abs(c), 1.0 - fraction)
    right = int(np.sum(c > thr))
    left = int(np.sum(c < -thr))
    sign = 0 if right == left else (1 if right > left else -1)
    return {"right": right, "left": left, "threshold": float(thr), "sign": sign}


@dataclass
class Regression:
    slope: float
    intercept: float
    ci: tuple
    n_points: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "ci": list(self.ci),
                "n_points": self.n_points}


def rate_regression(ns, values, B: int = 2000, seed: int = 0, level: float = 0.95) -> Regression:
    """OLS slope of log|value| on log n, with a pairs-bootstrap CI."""
    ns = np.asarray(ns, dtype=float)
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    if len(ns) < 4:
        raise ValueError("rate regression needs at least 4 n-points")
    X = np.log(ns)
    slope, icpt = np.polyfit(X, y, 1)
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(B):
        idx = rng.integers(0, len(X), len(X))
        if np.ptp(X[idx]) == 0:
            continue
        boots.append(np.polyfit(X[idx], y[idx], 1)[0])
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2])
    return Regression(float(slope), float(icpt), (float(lo), float(hi)), len(X))


def spread_regression(ns, groups, B: int = 1000, seed: int = 0, level: float = 0.95) -> Regression:
    """Slope of log sd(group) on log n; the CI resamples replications within each group."""
    ns = np.asarray(ns, dtype=float)
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(ns) < 4:
        raise ValueError("rate regression needs at least 4 n-points")
    X = np.log(ns)
    sd = np.array([g.std(ddof=1) for g in groups])
    slope, icpt = np.polyfit(X, np.log(sd), 1)
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(B):
        s = [g[rng.integers(0, len(g), len(g))].std(ddof=1) for g in groups]
        boots.append(np.polyfit(X, np.log(s), 1)[0])
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2])
    return Regression(float(slope), float(icpt), (float(lo), float(hi)), len(X))
