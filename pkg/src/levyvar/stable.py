"""Stable laws: characteristic function, sampling, density, CDF, tail constant.

Parameterisation is the (index, scale, skew, location) "1-parameterisation":

    E exp(i t X) = exp(-|rho t|^b (1 - i eta sign(t) tan(pi b / 2)) + i mu t)    (b != 1)
    E exp(i t X) = exp(-rho |t| (1 + i eta (2/pi) sign(t) log|t|) + i mu t)      (b == 1)

so the symmetric case is exp(-|rho t|^b).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .quadrature import QuadratureError, lbeta_integral
from .rng import RngStream

UNIT_BRANCH_EPS = 1e-8


@dataclass(frozen=True)
class StableLaw:
    index: float
    scale: float = 1.0
    skew: float = 0.0
    loc: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.index < 2.0):
            raise ValueError(f"stable index must lie in (0, 2), got {self.index}")
        if not self.scale > 0.0:
            raise ValueError(f"stable scale must be positive, got {self.scale}")
        if not (-1.0 <= self.skew <= 1.0):
            raise ValueError(f"skewness must lie in [-1, 1], got {self.skew}")

    @property
    def symmetric(self) -> bool:
        return self.skew == 0.0 and self.loc == 0.0

    def to_dict(self) -> dict:
        return {"index": self.index, "scale": self.scale, "skew": self.skew, "loc": self.loc}


def _is_unit(b: float) -> bool:
    return abs(b - 1.0) < UNIT_BRANCH_EPS


def char_fn(law: StableLaw, theta):
    """Characteristic function of ``law`` at ``theta`` (scalar or array)."""
    t = np.asarray(theta, dtype=float)
    b, rho, eta, mu = law.index, law.scale, law.skew, law.loc
    if law.symmetric:
        out = np.exp(-np.abs(rho * t) ** b).astype(complex)
        return out if out.ndim else complex(out)
    at = np.abs(t)
    if _is_unit(b):
        with np.errstate(divide="ignore", invalid="ignore"):
            logt = np.where(at > 0, np.log(np.where(at > 0, at, 1.0)), 0.0)
        expo = -rho * at * (1 + 1j * eta * (2 / np.pi) * np.sign(t) * logt)
    else:
        expo = -(rho * at) ** b * (1 - 1j * eta * np.sign(t) * np.tan(np.pi * b / 2))
    out = np.exp(expo + 1j * mu * t)
    return out if out.ndim else complex(out)


def sample(law: StableLaw, count: int, stream: RngStream | np.random.Generator) -> np.ndarray:
    """Chambers-Mallows-Stuck draws from ``law``."""
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = stream.generator() if isinstance(stream, RngStream) else stream
    if count == 0:
        return np.empty(0)
    v = rng.uniform(-np.pi / 2, np.pi / 2, size=count)
    w = rng.standard_exponential(size=count)
    return _cms_transform(law, v, w)


def _cms_transform(law: StableLaw, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    b, rho, eta, mu = law.index, law.scale, law.skew, law.loc
    if _is_unit(b):
        half = np.pi / 2
        x = (1 / half) * ((half + eta * v) * np.tan(v)
                          - eta * np.log(half * w * np.cos(v) / (half + eta * v)))
        return rho * x + (2 / np.pi) * eta * rho * math.log(rho) + mu
    if eta == 0.0:
        x = (np.sin(b * v) / np.cos(v) ** (1 / b)
             * (np.cos(v - b * v) / w) ** ((1 - b) / b))
        return rho * x + mu
    zeta = eta * math.tan(math.pi * b / 2)
    shift = math.atan(zeta) / b
    amp = (1 + zeta * zeta) ** (1 / (2 * b))
    x = (amp * np.sin(b * (v + shift)) / np.cos(v) ** (1 / b)
         * (np.cos(v - b * (v + shift)) / w) ** ((1 - b) / b))
    return rho * x + mu


def sym_abs_moment(beta: float, p: float) -> float:
    """E|S|^p for S ~ SbS(1), valid for -1 < p < beta."""
    if not (-1.0 < p < beta):
        raise ValueError(f"E|S|^p is infinite unless -1 < p < beta (p={p}, beta={beta})")
    if p == 0.0:
        return 1.0
    return float(2.0 ** p * special.gamma((1 + p) / 2) * special.gamma(1 - p / beta)
                 / (math.sqrt(math.pi) * special.gamma(1 - p / 2)))


def sym_log_moment(beta: float) -> float:
    """E log|S| for S ~ SbS(1)."""
    return float(np.euler_gamma * (1.0 / beta - 1.0))


def tau_gamma(gamma: float) -> float:
    """Tail constant tau_gamma relating stable tails to the scale parameter."""
    if not (0.0 < gamma < 2.0):
        raise ValueError(f"tau_gamma needs gamma in (0, 2), got {gamma}")
    if _is_unit(gamma):
        return math.pi / 2
    return (1 - gamma) / (math.gamma(2 - gamma) * math.cos(math.pi * gamma / 2))


class _SymmetricInverter:
    """Vectorised density / CDF of SbS(1) by Fourier inversion.

    |x| <= switch: composite Gauss-Legendre on [0, T] with geometric grading at
    the origin. |x| > switch: Bergstrom series at infinity, truncated at its
    smallest term.
    """

    GL_ORDER = 20
    SERIES_TERMS = 120

    def __init__(self, beta: float, tol: float):
        self.beta = beta
        self.tol = tol
        self.cutoff = self._cutoff()
        self.switch = self._switch_point()
        self.nodes, self.weights = self._panels()

    def _cutoff(self) -> float:
        b = self.beta
        target = self.tol * math.pi * 1e-4
        lo, hi = 1e-3, 1.0
        # remainder of int_T^inf exp(-t^b) dt is Gamma(1/b, T^b) / b
        rem = lambda t: special.gammaincc(1 / b, t ** b) * special.gamma(1 / b) / b
        while rem(hi) > target:
            hi *= 2
        return float(optimize.brentq(lambda t: rem(t) - target, lo, hi)) if rem(lo) > target else lo

    def _series_log_terms(self, ax: np.ndarray, cdf: bool) -> np.ndarray:
        b = self.beta
        j = np.arange(1, self.SERIES_TERMS + 1)
        if cdf:
            logc = special.gammaln(b * j) - special.gammaln(j + 1.0)
            return logc[None, :] - (b * j)[None, :] * np.log(ax)[:, None]
        logc = special.gammaln(b * j + 1) - special.gammaln(j + 1.0)
        return logc[None, :] - (b * j + 1)[None, :] * np.log(ax)[:, None]

    def _series(self, ax: np.ndarray, cdf: bool) -> tuple[np.ndarray, np.ndarray]:
        b = self.beta
        j = np.arange(1, self.SERIES_TERMS + 1)
        logm = self._series_log_terms(ax, cdf)
        # truncate each row at its smallest term magnitude
        stop = np.argmin(logm, axis=1)
        sgn = (-1.0) ** (j + 1) * np.sin(np.pi * b * j / 2)
        terms = np.exp(logm) * sgn[None, :] / np.pi
        mask = j[None, :] - 1 < stop[:, None]
        val = np.sum(np.where(mask, terms, 0.0), axis=1)
        err = np.exp(logm[np.arange(len(ax)), stop]) / np.pi
        return val, err

    def _switch_point(self) -> float:
        for x in np.geomspace(1.5, 600.0, 60):
            _, e1 = self._series(np.array([x]), cdf=False)
            _, e2 = self._series(np.array([x]), cdf=True)
            if max(e1[0], e2[0]) < self.tol / 10:
                return float(x)
        return 600.0

    def _panels(self) -> tuple[np.ndarray, np.ndarray]:
        T = self.cutoff
        t0 = min(1.0, T)
        graded = [t0 * 2.0 ** (-j) for j in range(45, 0, -1)]
        h = min(0.5, 1.5 / self.switch)
        npan = max(1, int(math.ceil((T - t0) / h)))
        uniform = list(np.linspace(t0, T, npan + 1)) if T > t0 else [t0]
        edges = np.array([0.0] + graded + uniform)
        gx, gw = np.polynomial.legendre.leggauss(self.GL_ORDER)
        lo, hi = edges[:-1], edges[1:]
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        nodes = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        weights = (half[:, None] * gw[None, :]).ravel()
        return nodes, weights * np.exp(-nodes ** self.beta) / np.pi

    def _fourier(self, x: np.ndarray, cdf: bool) -> np.ndarray:
        out = np.empty_like(x)
        chunk = max(1, int(4e6 // len(self.nodes)))
        for s in range(0, len(x), chunk):
            xs = x[s:s + chunk]
            arg = np.outer(self.nodes, xs)
            if cdf:
                out[s:s + chunk] = 0.5 + (self.weights / self.nodes) @ np.sin(arg)
            else:
                out[s:s + chunk] = self.weights @ np.cos(arg)
        return out

    def evaluate(self, x, cdf: bool) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        ax = np.abs(x)
        near = ax <= self.switch
        if near.any():
            out[near] = self._fourier(x[near], cdf)
        far = ~near
        if far.any():
            val, _ = self._series(ax[far], cdf)
            if cdf:
                # series gives the upper tail P(S > |x|)
                out[far] = np.where(x[far] > 0, 1.0 - val, val)
            else:
                out[far] = val
        return out


@functools.lru_cache(maxsize=64)
def _inverter(beta: float, tol: float) -> _SymmetricInverter:
    return _SymmetricInverter(beta, tol)


def _check_beta(beta: float, tol: float):
    if not (0.0 < beta < 2.0):
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    if not tol > 0:
        raise ValueError("tol must be positive")


def density(beta: float, x, tol: float = 1e-8):
    """Density of the standard SbS law at ``x`` (scalar or array)."""
    _check_beta(beta, tol)
    xa = np.asarray(x, dtype=float)
    if _is_unit(beta):
        out = 1.0 / (np.pi * (1.0 + xa * xa))
    else:
        out = np.maximum(_inverter(float(beta), float(tol)).evaluate(xa.ravel(), cdf=False), 0.0)
        out = out.reshape(xa.shape)
    if not np.all(np.isfinite(out)):
        raise QuadratureError("density inversion produced non-finite values")
    return float(out) if out.ndim == 0 else out


def cdf(beta: float, x, tol: float = 1e-8):
    """CDF of the standard SbS law at ``x`` (scalar or array)."""
    _check_beta(beta, tol)
    xa = np.asarray(x, dtype=float)
    if _is_unit(beta):
        out = 0.5 + np.arctan(xa) / np.pi
    else:
        out = _inverter(float(beta), float(tol)).evaluate(xa.ravel(), cdf=True).reshape(xa.shape)
        out = np.clip(out, 0.0, 1.0)
    if not np.all(np.isfinite(out)):
        raise QuadratureError("CDF inversion produced non-finite values")
    return float(out) if out.ndim == 0 else out


def quantile(beta: float, prob: float, tol: float = 1e-8) -> float:
    """Quantile of SbS(1) by root-finding on the CDF."""
    if not (0.0 < prob < 1.0):
        raise ValueError("prob must lie in (0, 1)")
    if prob == 0.5:
        return 0.0
    hi = 1.0
    while cdf(beta, hi, tol) < max(prob, 1 - prob):
        hi *= 2
    root = optimize.brentq(lambda x: cdf(beta, x, tol) - max(prob, 1 - prob), 0.0, hi, xtol=1e-12)
    return root if prob > 0.5 else -root


def stable_cdf(law: StableLaw, x) -> np.ndarray:
    """CDF of a general stable law; skewed laws go through scipy's levy_stable (S1)."""
    xa = np.asarray(x, dtype=float)
    if law.symmetric:
        return np.asarray(cdf(law.index, xa / law.scale))
    from scipy.stats import levy_stable

    dist = levy_stable(law.index, law.skew, loc=law.loc, scale=law.scale)
    dist.dist.parameterization = "S1"
    return np.clip(np.asarray(dist.cdf(xa), dtype=float), 0.0, 1.0)


def integral_scale(psi: Callable[[float], float], beta: float, rho_L: float,
                   domain: tuple[float, float] = (-math.inf, math.inf),
                   tol: float = 1e-8, points: Sequence[float] = ()) -> float:
    """Scale of the stable integral of ``psi``: ``rho_L * ||psi||_{L^beta(domain)}``."""
    if not (0.0 < beta < 2.0):
        raise ValueError("beta must lie in (0, 2)")
    val, _ = lbeta_integral(psi, beta, domain[0], domain[1], points, tol=tol * 1e-2)
    return rho_L * val ** (1.0 / beta)
