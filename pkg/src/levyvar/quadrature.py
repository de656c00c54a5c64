"""Adaptive quadrature helpers shared by the kernel and stable-law modules.

Finite pieces go through QUADPACK (``scipy.integrate.quad``) split at known
breakpoints; half-infinite tails are integrated over geometric segments and
the remainder is extrapolated from the observed segment decay ratio, which is
exact for pure power-law tails.
"""
from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

import numpy as np
from scipy import integrate


class QuadratureError(RuntimeError):
    """Raised when a quadrature cannot meet its tolerance."""


class DivergentIntegralError(QuadratureError):
    """Raised when tail monitoring shows the integral does not converge."""


def integrate_pieces(fn: Callable[[float], float], a: float, b: float,
                     points: Sequence[float] = (), tol: float = 1e-10,
                     limit: int = 200) -> tuple[float, float]:
    """Integrate ``fn`` over the finite interval [a, b], split at ``points``."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integrate_pieces needs a finite interval")
    if b <= a:
        return 0.0, 0.0
    cuts = sorted({a, b, *[p for p in points if a < p < b]})
    total = 0.0
    err = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, e = integrate.quad(fn, lo, hi, epsabs=tol * 1e-2, epsrel=tol, limit=limit)
        total += val
        err += e
    return total, err


def integrate_tail(fn: Callable[[float], float], x0: float, tol: float = 1e-10,
                   max_segments: int = 400, min_segments: int = 6) -> tuple[float, float]:
    """Integrate a nonnegative ``fn`` over [x0, inf).

    Returns ``(value, error_estimate)``. Raises DivergentIntegralError when the
    segment contributions stop decaying.
    """
    if x0 <= 0:
        raise ValueError("tail start must be positive")
    total = 0.0
    qerr = 0.0
    contribs: list[float] = []
    remainders: list[float] = []
    lo = x0
    for j in range(max_segments):
        hi = 2.0 * lo
        c, e = integrate_pieces(fn, lo, hi, tol=tol * 1e-1)
        total += c
        qerr += e
        contribs.append(c)
        lo = hi
        if j + 1 < min_segments:
            continue
        c0, c1, c2 = contribs[-3], contribs[-2], contribs[-1]
        if c2 == 0.0 and c1 == 0.0:
            return total, qerr
        if c1 <= 0.0 or c0 <= 0.0:
            continue
        r1, r2 = c1 / c0, c2 / c1
        if j > 30 and r2 >= 0.999 and r1 >= 0.999:
            raise DivergentIntegralError(
                f"tail contributions not decaying (ratio {r2:.6f} at x={lo:.3g})")
        if r2 >= 1.0:
            continue
        rem = c2 * r2 / (1.0 - r2)
        remainders.append(rem)
        if len(remainders) >= 2:
            unc = abs(remainders[-1] - remainders[-2])
            if unc <= tol * max(abs(total), 1e-300) and rem <= max(abs(total), 1e-300):
                return total + rem, unc + qerr
        if c2 <= 1e-3 * tol * abs(total) and r2 < 0.9:
            return total + rem, abs(rem) + qerr
    raise DivergentIntegralError(f"tail integral did not settle within {max_segments} segments")


def lbeta_integral(psi: Callable[[float], float], beta: float, a: float, b: float,
                   points: Sequence[float] = (), tol: float = 1e-10,
                   tail_start: float | None = None) -> tuple[float, float]:
    """``int_a^b |psi|^beta`` with infinite endpoints handled by tail monitoring."""
    def integrand(s):
        return abs(psi(s)) ** beta

    finite_pts = [p for p in points if math.isfinite(p)]
    total = 0.0
    err = 0.0
    lo, hi = a, b
    if math.isinf(a) and math.isinf(b):
        split = 0.0 if not finite_pts else float(np.median(finite_pts))
        v1, e1 = lbeta_integral(psi, beta, -math.inf, split, finite_pts, tol, tail_start)
        v2, e2 = lbeta_integral(psi, beta, split, math.inf, finite_pts, tol, tail_start)
        return v1 + v2, e1 + e2
    if math.isinf(hi):
        anchor = max([lo, *finite_pts])
        width = max(1.0, abs(anchor - lo)) if tail_start is None else tail_start
        cut = anchor + width
        v, e = integrate_pieces(integrand, lo, cut, finite_pts, tol)
        tv, te = integrate_tail(lambda x: integrand(anchor + x), width, tol)
        return v + tv, e + te
    if math.isinf(lo):
        anchor = min([hi, *finite_pts])
        width = max(1.0, abs(hi - anchor)) if tail_start is None else tail_start
        cut = anchor - width
        v, e = integrate_pieces(integrand, cut, hi, finite_pts, tol)
        tv, te = integrate_tail(lambda x: integrand(anchor - x), width, tol)
        return v + tv, e + te
    return integrate_pieces(integrand, lo, hi, finite_pts, tol)


def power_tail(fn: Callable[[float], float], x0: float, decay: float,
               tol: float = 1e-10, limit: int = 200) -> tuple[float, float]:
    """``int_{x0}^inf fn`` for integrands with ``fn(x) * x**decay`` smooth in 1/x.

    Substituting ``t = x0 / x`` turns the tail into ``x0**(1-decay) *
    int_0^1 t**(decay-2) * s(t) dt`` with ``s`` smooth, which QUADPACK's
    algebraic weight integrates without truncation.
    """
    if x0 <= 0:
        raise ValueError("tail start must be positive")
    if decay <= 1.0:
        raise DivergentIntegralError(f"tail decay exponent {decay} <= 1 is not integrable")

    def smooth(t):
        # QAWS samples the endpoint itself; the smooth factor is continuous there
        x = x0 / max(t, 1e-15)
        return fn(x) * x ** decay

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(smooth, 0.0, 1.0, weight="alg", wvar=(decay - 2.0, 0.0),
                                  epsabs=0.0, epsrel=tol, limit=limit)
    scale = x0 ** (1.0 - decay)
    if not math.isfinite(val):
        raise QuadratureError("tail quadrature produced a non-finite value")
    return val * scale, err * scale
