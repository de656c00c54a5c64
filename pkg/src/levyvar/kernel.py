"""Moving-average kernels g(t) = t_+^alpha * zeta(t), their discrete shadows and
the L^beta constants built from them.

The discrete kernel of order k is

    h_k(x) = sum_j (-1)^j C(k, j) (x - j)_+^alpha,

and g_{i,n}(s) is the same k-th backward difference applied to g at lag 1/n.
Far from the origin the alternating sums cancel catastrophically, so for
large arguments they are evaluated through the Taylor series

    D^k_h g(x) = sum_{m >= k} g^(m)(x) (-h)^m S_m / m!,   S_m = sum_j (-1)^j C(k,j) j^m,

which converges geometrically once x > 8 k h.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .quadrature import DivergentIntegralError, integrate_pieces, power_tail

FAMILIES = ("pure", "exp", "power")
SERIES_ORDER = 24
SERIES_RATIO = 8.0


class IntegrabilityError(ValueError):
    """A requested L^beta norm is infinite for the given parameters."""


def k_alpha(alpha: float, k: int) -> float:
    """Falling factorial alpha (alpha-1) ... (alpha-k+1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = 1.0
    for j in range(k):
        out *= alpha - j
    return out


def _falling(a: float, m: int) -> float:
    out = 1.0
    for j in range(m):
        out *= a - j
    return out


@functools.lru_cache(maxsize=None)
def _moment_sums(k: int, order: int) -> tuple[float, ...]:
    # S_m / m! for m = 0..order, exact integer sums before the division
    out = []
    for m in range(order + 1):
        s = sum((-1) ** j * math.comb(k, j) * j ** m for j in range(k + 1))
        out.append(s / math.factorial(m))
    return tuple(out)


@dataclass(frozen=True)
class KernelSpec:
    """g(t) = t_+^alpha zeta(t) with zeta from a small catalog.

    family ``pure``: zeta = 1; ``exp``: zeta = exp(-lam t);
    ``power``: zeta = (1 + t)^(-lam). ``theta`` is the L^theta exponent of the
    integrability assumption, kept as metadata.
    """

    alpha: float
    family: str = "pure"
    lam: float = 1.0
    theta: float | None = None
    envelope: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if self.family != "pure" and not self.lam > 0:
            raise ValueError("zeta parameter lam must be positive")

    def zeta(self, t, order: int = 0):
        t = np.asarray(t, dtype=float)
        if self.family == "pure":
            return np.ones_like(t) if order == 0 else np.zeros_like(t)
        if self.family == "exp":
            return (-self.lam) ** order * np.exp(-self.lam * t)
        return _falling(-self.lam, order) * (1.0 + t) ** (-self.lam - order)

    def g(self, t, order: int = 0):
        """g^(order)(t), zero for t <= 0."""
        t = np.asarray(t, dtype=float)
        pos = t > 0
        tp = np.where(pos, t, 1.0)
        a = self.alpha
        if self.family == "pure":
            acc = _falling(a, order) * tp ** (a - order)
        else:
            # Leibniz rule with zeta^(j) = z_j * common
            if self.family == "exp":
                common = np.exp(-self.lam * tp)
                zj = lambda j: (-self.lam) ** j
            else:
                common = (1.0 + tp) ** (-self.lam)
                inv = 1.0 / (1.0 + tp)
                zj = lambda j: _falling(-self.lam, j) * inv ** j
            acc = np.zeros_like(tp)
            pw = tp ** a
            for i in range(order + 1):
                coef = math.comb(order, i) * _falling(a, i)
                if coef != 0.0:
                    acc = acc + coef * pw * zj(order - i)
                pw = pw / tp
            acc = acc * common
        out = np.where(pos, acc, 0.0)
        return out if out.ndim else float(out)

    @property
    def tail_decay(self) -> float | None:
        """Power decay of g^(m)(t) relative to t^(alpha-m) at infinity (None = exponential)."""
        if self.family == "pure":
            return 0.0
        if self.family == "power":
            return self.lam
        return None

    def to_dict(self) -> dict:
        out = {"family": self.family, "alpha": self.alpha}
        if self.family != "pure":
            out["lam"] = self.lam
        if self.theta is not None:
            out["theta"] = self.theta
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(alpha=float(d["alpha"]), family=d.get("family", "pure"),
                   lam=float(d.get("lam", 1.0)),
                   theta=None if d.get("theta") is None else float(d["theta"]))


def _power_series_coeffs(a: float, k: int) -> np.ndarray:
    # sum_j (-1)^j C(k,j) (x-j)^a = x^(a-k) sum_r c_r x^(-r) for x > k
    sums = _moment_sums(k, k + SERIES_ORDER)
    return np.array([_falling(a, m) * (-1) ** m * sums[m]
                     for m in range(k, k + SERIES_ORDER + 1)])


def _power_diff(a: float, x, k: int):
    """sum_j (-1)^j C(k,j) (x-j)_+^a, vectorised and cancellation-free."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    far = x > SERIES_RATIO * k
    near = ~far
    if np.any(near):
        xn = x[near]
        acc = np.zeros_like(xn)
        for j in range(k + 1):
            d = xn - j
            acc = acc + (-1) ** j * math.comb(k, j) * np.where(d > 0, np.where(d > 0, d, 1.0) ** a, 0.0)
        out[near] = acc
    if np.any(far):
        xf = x[far]
        c = _power_series_coeffs(a, k)
        inv = 1.0 / xf
        acc = np.full_like(xf, c[-1])
        for cr in c[-2::-1]:
            acc = acc * inv + cr
        out[far] = xf ** (a - k) * acc
    return out if out.ndim else float(out)


def backward_diff(spec: KernelSpec, x, h: float, k: int, order: int = 0):
    """D^k_h g^(order)(x) = sum_j (-1)^j C(k,j) g^(order)(x - j h), cancellation-free."""
    if spec.family == "pure":
        a = spec.alpha - order
        return _falling(spec.alpha, order) * h ** a * _power_diff(a, np.asarray(x, dtype=float) / h, k)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x, dtype=float).reshape(-1)
    xr = x.reshape(-1)
    far = xr > SERIES_RATIO * k * h
    near = ~far
    if np.any(near):
        xn = xr[near]
        acc = np.zeros_like(xn)
        for j in range(k + 1):
            acc = acc + (-1) ** j * math.comb(k, j) * spec.g(xn - j * h, order)
        out[near] = acc
    if np.any(far):
        xf = xr[far]
        sums = _moment_sums(k, k + SERIES_ORDER)
        acc = np.zeros_like(xf)
        for m in range(k, k + SERIES_ORDER + 1):
            acc = acc + spec.g(xf, order + m) * ((-h) ** m * sums[m])
        out[far] = acc
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


def hk_eval(alpha: float, k: int, x):
    """h_k(x) for the pure power kernel (vectorised)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return _power_diff(float(alpha), x, k)


def dk_apply(psi: Callable[[float], float], k: int, s: float) -> float:
    """k-th backward difference with unit lag of an arbitrary function."""
    return float(sum((-1) ** j * math.comb(k, j) * psi(s - j) for j in range(k + 1)))


def gin_eval(spec: KernelSpec, k: int, i: int, n: int, s):
    """g_{i,n}(s) = sum_j (-1)^j C(k,j) g((i-j)/n - s)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s = np.asarray(s, dtype=float)
    return backward_diff(spec, i / n - s, 1.0 / n, k)


def phi_jn_eval(spec: KernelSpec, k: int, j: int, n, s):
    """phi_j^n(s) = D^k g_n(j - s) with g_n(t) = n^alpha g(t/n); n = inf gives h_k(j - s)."""
    s = np.asarray(s, dtype=float)
    if n == math.inf or n is None:
        return hk_eval(spec.alpha, k, j - s)
    return n ** spec.alpha * backward_diff(spec, (j - s) / n, 1.0 / n, k)


def lbeta_norm(fn: Callable[[float], float], beta: float, a: float, b: float,
               points=(), tol: float = 1e-9) -> float:
    """(int_a^b |fn|^beta)^(1/beta) over a finite interval."""
    val, _ = integrate_pieces(lambda s: abs(float(fn(s))) ** beta, a, b, points, tol)
    return val ** (1.0 / beta)


@dataclass(frozen=True)
class NormResult:
    value: float
    error: float
    tail: float

    def __float__(self):
        return self.value


def hk_lbeta_power(alpha: float, k: int, beta: float, tol: float = 1e-10) -> NormResult:
    """int_0^inf |h_k(x)|^beta dx with a certified (substituted) tail."""
    if (k - alpha) * beta <= 1.0 + 1e-6:
        raise IntegrabilityError(
            f"|h_k|^beta is not integrable: (k-alpha)*beta = {(k - alpha) * beta:.6g} <= 1")
    # on [0,1] only the j = 0 term is active: int_0^1 x^(alpha beta) dx
    total = 1.0 / (alpha * beta + 1.0)
    err = 0.0
    x0 = SERIES_RATIO * k
    f = lambda x: abs(float(hk_eval(alpha, k, x))) ** beta
    v, e = integrate_pieces(f, 1.0, x0, points=range(1, k + 1), tol=tol)
    total += v
    err += e
    coeffs = _power_series_coeffs(alpha, k)
    tail = 0.0
    if np.any(coeffs != 0.0):
        d = (k - alpha) * beta
        tail, e = power_tail(lambda x: abs(float(hk_eval(alpha, k, x))) ** beta, x0, d, tol)
        err += e
        total += tail
    return NormResult(total, err, tail)


def rho0_compute(alpha, k: int, beta: float, rho_L: float = 1.0, tol: float = 1e-9) -> float:
    """rho_0 = rho_L ||h_k||_{L^beta(R)}; ``alpha`` may also be a KernelSpec."""
    a = alpha.alpha if isinstance(alpha, KernelSpec) else float(alpha)
    if not rho_L > 0:
        raise ValueError("rho_L must be positive")
    res = hk_lbeta_power(a, k, beta, tol * 1e-2)
    return rho_L * res.value ** (1.0 / beta)


def c0_compute(spec: KernelSpec, k: int, beta: float, tol: float = 1e-9) -> float:
    """c_0 = int |g^(k-1)(1-s) - g^(k-1)(-s)|^beta ds."""
    a = spec.alpha
    if not (1.0 < beta < 2.0):
        raise IntegrabilityError(f"c0 needs beta in (1, 2), got {beta}")
    if not (k - 1 < a < k - 1.0 / beta):
        raise IntegrabilityError(
            f"c0 needs alpha in (k-1, k-1/beta) = ({k - 1}, {k - 1 / beta:.6g}), got {a}")
    eps = tol * 1e-2
    # s in (0, 1): only g^(k-1)(1-s) survives
    head, _ = integrate_pieces(lambda u: abs(float(spec.g(u, k - 1))) ** beta, 0.0, 1.0, tol=eps)

    def past(y):
        # y = -s > 0; unit-lag first difference of g^(k-1) at 1+y
        return abs(float(backward_diff(spec, 1.0 + y, 1.0, 1, order=k - 1))) ** beta

    x0 = SERIES_RATIO
    mid, _ = integrate_pieces(past, 0.0, x0, tol=eps)
    lam = spec.tail_decay
    if lam is None:
        tail, _ = integrate_pieces(past, x0, x0 + 60.0 / spec.lam, tol=eps)
    else:
        tail, _ = power_tail(lambda x: past(x - 1.0), x0 + 1.0, (k - a + lam) * beta, eps)
    return head + mid + tail


def tail_norm(spec: KernelSpec, k: int, beta: float, n: int, T: float, tol: float = 1e-8) -> float:
    """||g_{i,n}||_{L^beta((-inf, -T])} approximated by its far-field form at i = n.

    For s <= -T the distance to every grid point is at least T, so the series
    evaluation is accurate there.
    """
    def f(u):
        return abs(float(backward_diff(spec, 1.0 + u, 1.0 / n, k))) ** beta

    lam = spec.tail_decay
    if lam is None:
        v, _ = integrate_pieces(f, T, T + 60.0 / spec.lam, tol=tol)
        return v ** (1.0 / beta)
    v, _ = power_tail(lambda x: f(x), T, (k - spec.alpha + lam) * beta, tol)
    return v ** (1.0 / beta)


def kernel_diagnostics(spec: KernelSpec, k: int) -> dict:
    """Numeric shadows of the kernel assumptions.

    Checks g(t)/t^alpha -> 1 on a dyadic grid and fits the constant C in
    |g^(k)(t)| <= C t^(alpha-k).
    """
    t = 2.0 ** -np.arange(4, 40)
    ratio = spec.g(t) / t ** spec.alpha
    grid = np.geomspace(1e-6, 1e3, 200)
    env = np.abs(spec.g(grid, k)) / grid ** (spec.alpha - k)
    C = float(np.max(env))
    return {
        "small_t_ratio_error": float(abs(ratio[-1] - 1.0)),
        "small_t_ok": bool(abs(ratio[-1] - 1.0) < 1e-6),
        "envelope_C": C,
        "envelope_grid": [float(grid[0]), float(grid[-1])],
    }
