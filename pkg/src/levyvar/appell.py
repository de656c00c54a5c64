"""Phi_rho(x) = E f(x + rho S) - E f(rho S), its derivatives and the Appell rank.

Closed forms: trigonometric f go through the characteristic function, the
indicator through the stable CDF, and the even power/log families through

    J_q(z) = int_0^inf (1 - cos t z) exp(-t^beta) t^(-1-q) dt,

using |x|^q = C_q int_0^inf (1 - cos t x) t^(-1-q) dt for 0 < q < 2 and the
analogous representations of |x|^(-q) and log|x|.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, special

from . import stable as st
from .functionals import FunctionalSpec, f_eval
from .quadrature import QuadratureError

CLOSED_FAMILIES = ("cos", "sin", "indicator", "power", "negpower", "log")
DEFAULT_RHO_PROBES = tuple(np.geomspace(0.1, 10.0, 12))
FD_STEPS = (1e-2, 1e-3, 1e-4)


def _quiet_quad(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(*args, **kwargs)


def j_integral(q: float, beta: float, z: float, tol: float = 1e-11) -> float:
    """J_q(z) for q in (-1, 2) and z >= 0."""
    z = abs(float(z))
    if z == 0.0:
        return 0.0
    if z < 1.0:
        T = 45.0 ** (1.0 / beta)
        fn = lambda t: 2.0 * math.sin(0.5 * t * z) ** 2 * math.exp(-t ** beta) * t ** (-1.0 - q)
        v1, _ = _quiet_quad(fn, 0.0, 1.0, epsabs=0.0, epsrel=tol, limit=200)
        v2, _ = _quiet_quad(fn, 1.0, T, epsabs=0.0, epsrel=tol, limit=200)
        return v1 + v2
    # v = t z: J = z^q int_0^inf (1 - cos v) v^(-1-q) exp(-(v/z)^beta) dv
    damp = lambda v: math.exp(-(v / z) ** beta) * v ** (-1.0 - q)
    head, _ = _quiet_quad(lambda v: 2.0 * math.sin(0.5 * v) ** 2 * damp(v), 0.0, 1.0,
                          epsabs=0.0, epsrel=tol, limit=200)
    # non-oscillatory part in log coordinates
    V = z * 45.0 ** (1.0 / beta)
    mono, _ = _quiet_quad(lambda s: damp(math.exp(s)) * math.exp(s), 0.0, math.log(V),
                          epsabs=0.0, epsrel=tol, limit=400)
    osc, _ = _quiet_quad(damp, 1.0, np.inf, weight="cos", wvar=1.0, epsabs=tol * 1e-2, limlst=200)
    return z ** q * (head + mono - osc)


def _power_const(p: float) -> float:
    # 1 / int_0^inf (1 - cos v) v^(-1-p) dv
    if abs(p - 1.0) < 1e-12:
        return 2.0 / math.pi
    return p / (math.gamma(1.0 - p) * math.cos(math.pi * p / 2.0))


@dataclass
class PhiEvaluator:
    f: FunctionalSpec
    beta: float
    method: str = "closed"
    tol: float = 1e-9
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not (0 < self.beta < 2):
            raise ValueError("beta must lie in (0, 2)")
        if self.method not in ("closed", "quadrature"):
            raise ValueError("method must be 'closed' or 'quadrature'")
        if self.method == "closed" and self.f.family not in CLOSED_FAMILIES:
            self.method = "quadrature"
        if not self.f.moment_finite(self.beta, 1):
            raise ValueError(f"E|f(S)| is infinite for {self.f.label} at beta={self.beta}")

    @property
    def closed(self) -> bool:
        return self.method == "closed"


def _damp(ev: PhiEvaluator, rho: float) -> float:
    return math.exp(-abs(rho * ev.f.u) ** ev.beta)


def phi_eval(ev: PhiEvaluator, rho: float, x) -> float:
    """Phi_rho(x)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    x = float(x)
    if x == 0.0:
        return 0.0
    if not ev.closed:
        return _phi_quad(ev, rho, x)
    f, b = ev.f, ev.beta
    if f.family == "sin":
        return math.sin(f.u * x) * _damp(ev, rho)
    if f.family == "cos":
        return (math.cos(f.u * x) - 1.0) * _damp(ev, rho)
    if f.family == "indicator":
        return float(st.cdf(b, (f.u - x) / rho) - st.cdf(b, f.u / rho))
    if f.family == "power":
        return _power_const(f.p) * rho ** f.p * j_integral(f.p, b, x / rho)
    if f.family == "negpower":
        c = 1.0 / (math.gamma(f.p) * math.cos(math.pi * f.p / 2.0))
        return -c * rho ** (-f.p) * j_integral(-f.p, b, x / rho)
    if f.family == "log":
        return j_integral(0.0, b, x / rho)
    raise AssertionError(f.family)


def _expect_quad(ev: PhiEvaluator, shift: float, rho: float) -> float:
    """E f(shift + rho S) = int f(shift + rho y) g_beta(y) dy by adaptive quadrature."""
    f, b, tol = ev.f, ev.beta, ev.tol
    dens = lambda y: float(st.density(b, y))
    fy = lambda y: float(f_eval(f, shift + rho * y))
    # breakpoints of f in the y variable
    pts = {0.0}
    if f.family in ("power", "negpower", "log", "custom"):
        pts.add(-shift / rho)
    if f.family == "indicator":
        pts.add((f.u - shift) / rho)
    lo = min(pts) - 50.0
    hi = max(pts) + 50.0
    cuts = sorted(pts | {lo, hi})
    total = 0.0
    for a, c in zip(cuts[:-1], cuts[1:]):
        v, _ = _quiet_quad(lambda y: fy(y) * dens(y), a, c, epsabs=tol * 1e-2, epsrel=tol, limit=500)
        total += v
    if f.family in ("cos", "sin"):
        # oscillatory tails: cos(u(s + rho y)) = cos(us)cos(u rho y) - sin(us) sin(u rho y)
        w = abs(f.u * rho)
        sgn = 1.0 if f.u * rho > 0 else -1.0
        c_int = 0.0
        s_int = 0.0
        for edge, side in ((hi, 1.0), (-lo, -1.0)):
            cv, _ = _quiet_quad(lambda t: dens(side * t), edge, np.inf, weight="cos", wvar=w,
                                epsabs=tol * 1e-2, limlst=200)
            sv, _ = _quiet_quad(lambda t: dens(side * t), edge, np.inf, weight="sin", wvar=w,
                                epsabs=tol * 1e-2, limlst=200)
            c_int += cv
            s_int += side * sgn * sv
        us = f.u * shift
        if f.family == "cos":
            total += math.cos(us) * c_int - math.sin(us) * s_int
        else:
            total += math.sin(us) * c_int + math.cos(us) * s_int
    else:
        for a, c in ((hi, np.inf), (-np.inf, lo)):
            v, _ = _quiet_quad(lambda y: fy(y) * dens(y), a, c, epsabs=tol * 1e-2, epsrel=tol, limit=500)
            total += v
    if not math.isfinite(total):
        raise QuadratureError("expectation quadrature did not converge")
    return total


def _phi_quad(ev: PhiEvaluator, rho: float, x: float) -> float:
    key = ("G", rho)
    if key not in ev._cache:
        ev._cache[key] = _expect_quad(ev, 0.0, rho)
    return _expect_quad(ev, x, rho) - ev._cache[key]


def expected_f_rho(ev: PhiEvaluator, rho: float) -> float:
    """G(rho) = E f(rho S) = int f(rho y) g_beta(y) dy."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    f, b = ev.f, ev.beta
    if not ev.closed:
        return _expect_quad(ev, 0.0, rho)
    if f.family == "cos":
        return _damp(ev, rho)
    if f.family == "sin":
        return 0.0
    if f.family == "power":
        return rho ** f.p * st.sym_abs_moment(b, f.p)
    if f.family == "negpower":
        return rho ** (-f.p) * st.sym_abs_moment(b, -f.p)
    if f.family == "log":
        return math.log(rho) + st.sym_log_moment(b)
    if f.family == "indicator":
        return float(st.cdf(b, f.u / rho))
    raise AssertionError(f.family)


# --- derivatives ---------------------------------------------------------------

@dataclass
class Derivative:
    value: float
    error: float
    method: str
    step: float | None = None
    stable: bool = True


def _closed_deriv(ev: PhiEvaluator, rho: float, x: float, jx: int, jr: int) -> float | None:
    f, b = ev.f, ev.beta
    if f.family in ("sin", "cos"):
        u = f.u
        E = _damp(ev, rho)
        dE = -b * abs(u) ** b * rho ** (b - 1.0) * E
        damp = E if jr == 0 else dE
        if jx == 0:
            base = math.sin(u * x) if f.family == "sin" else math.cos(u * x) - 1.0
        else:
            # d^j/dx^j of sin / cos
            fn = math.sin if f.family == "sin" else math.cos
            base = u ** jx * fn(u * x + jx * math.pi / 2.0)
        return base * damp
    if f.family == "indicator":
        u = f.u
        if jx == 1 and jr == 0:
            return -float(st.density(b, (u - x) / rho)) / rho
        if jx == 0 and jr == 1:
            return (-(u - x) * float(st.density(b, (u - x) / rho))
                    + u * float(st.density(b, u / rho))) / rho ** 2
    return None


def _richardson(fn, h_list=FD_STEPS) -> Derivative:
    est = [fn(h) for h in h_list]
    # second-order central schemes: error ~ h^2, step ratio 10
    rich = [(100.0 * est[i + 1] - est[i]) / 99.0 for i in range(len(est) - 1)]
    err = abs(rich[-1] - rich[-2]) if len(rich) > 1 else abs(est[-1] - est[-2])
    return Derivative(rich[0], err, "richardson", h_list[1], err <= 1e-4)


def phi_deriv(ev: PhiEvaluator, rho: float, x: float, order_x: int = 1, order_rho: int = 0,
              prefer_closed: bool = True) -> Derivative:
    """Mixed partial d^(jx+jr) Phi / dx^jx drho^jr at (rho, x)."""
    if order_x not in (0, 1, 2) or order_rho not in (0, 1):
        raise ValueError("supported orders: x in 0..2, rho in 0..1")
    if order_x == 0 and order_rho == 0:
        return Derivative(phi_eval(ev, rho, x), 0.0, "value")
    if prefer_closed and ev.closed:
        v = _closed_deriv(ev, rho, x, order_x, order_rho)
        if v is not None:
            return Derivative(v, 0.0, "closed")
    P = lambda r, y: phi_eval(ev, r, y)
    if order_rho == 0:
        if order_x == 1:
            fn = lambda h: (P(rho, x + h) - P(rho, x - h)) / (2 * h)
        else:
            fn = lambda h: (P(rho, x + h) - 2 * P(rho, x) + P(rho, x - h)) / h ** 2
    else:
        hr = lambda h: h * rho
        if order_x == 0:
            fn = lambda h: (P(rho + hr(h), x) - P(rho - hr(h), x)) / (2 * hr(h))
        elif order_x == 1:
            fn = lambda h: (P(rho + hr(h), x + h) - P(rho + hr(h), x - h)
                            - P(rho - hr(h), x + h) + P(rho - hr(h), x - h)) / (4 * h * hr(h))
        else:
            d2 = lambda r, h: (P(r, x + h) - 2 * P(r, x) + P(r, x - h)) / h ** 2
            fn = lambda h: (d2(rho + hr(h), h) - d2(rho - hr(h), h)) / (2 * hr(h))
    return _richardson(fn)


# --- Appell rank ---------------------------------------------------------------

@dataclass
class AppellReport:
    family: str
    rho_probes: list
    d1: list
    d2: list
    dxr: list
    rank_per_rho: list
    verdict: str
    designated_rho: float | None = None
    structural: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def appell_rank(ev: PhiEvaluator, rho_set=None, r_max: int = 2, zero_tol: float = 1e-6,
                rho0: float | None = None, numeric: bool | None = None) -> AppellReport:
    """Appell rank on a probe set of rho values.

    Catalog families are tagged structurally (Sin, Indicator: rank one; even
    functions: rank >= 2) with the numeric derivatives recorded alongside.
    """
    if r_max > 2:
        raise ValueError("only ranks 1 and >= 2 are distinguished")
    from .functionals import structural_rank

    rhos = [float(r) for r in (rho_set if rho_set is not None else DEFAULT_RHO_PROBES)]
    if rho0 is not None and rho0 not in rhos:
        rhos.append(float(rho0))
    structural = structural_rank(ev.f) if ev.f.family != "custom" else None
    do_numeric = numeric if numeric is not None else (structural is None or ev.f.family in ("sin", "cos", "indicator"))
    d1, d2, dxr, ranks = [], [], [], []
    unstable = False
    for r in rhos:
        if not do_numeric:
            d1.append(None)
            d2.append(None)
            dxr.append(None)
            ranks.append(structural)
            continue
        a = phi_deriv(ev, r, 0.0, 1, 0)
        b = phi_deriv(ev, r, 0.0, 2, 0)
        c = phi_deriv(ev, r, 0.0, 1, 1)
        unstable |= not (a.stable and b.stable)
        d1.append(a.value)
        d2.append(b.value)
        dxr.append(c.value)
        thr = zero_tol * max(1.0, abs(b.value))
        if abs(a.value) > max(thr, a.error * 10):
            ranks.append(1)
        elif abs(b.value) > max(thr, b.error * 10):
            ranks.append(2)
        else:
            ranks.append(">2")
    if structural is not None and structural != "UNDETERMINED":
        verdict = structural
    elif unstable:
        verdict = "UNDETERMINED"
    else:
        designated = rho0 if rho0 is not None else rhos[0]
        r_at = ranks[rhos.index(designated)]
        if r_at == 1:
            verdict = "RANK1"
        elif all(rk != 1 for rk in ranks) and all(abs(v) <= zero_tol * 10 for v in dxr):
            verdict = "RANK_GE2"
        else:
            verdict = "UNDETERMINED"
    return AppellReport(ev.f.family, rhos, d1, d2, dxr, ranks, verdict, rho0, structural)


# --- assumption (B) --------------------------------------------------------------

def check_assumption_B(ev: PhiEvaluator, eps: float = 0.5, grid=None, p_candidate: float = 1.0,
                       n_rho: int = 5) -> dict:
    """Numeric diagnostics of the Hoelder growth bound and derivative bounds.

    The fitted growth exponent is the log-log slope of |Phi_rho(x)| between
    the two largest grid points; the verdict combines it with the structural
    (B) classes of the functional.
    """
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    grid = np.asarray(grid if grid is not None else [1e-2, 1e-1, 1.0, 10.0, 1e2, 1e4, 1e6], dtype=float)
    rhos = np.geomspace(eps, 1.0 / eps, n_rho)
    slopes, ratios, dmax = [], [], 0.0
    for r in rhos:
        vals = np.array([abs(phi_eval(ev, r, x)) for x in grid])
        a, b = grid[-2], grid[-1]
        if vals[-1] > 0 and vals[-2] > 0:
            slopes.append(float(np.log(vals[-1] / vals[-2]) / np.log(b / a)))
        else:
            slopes.append(0.0)
        ratios.append(float(np.max(vals / np.maximum(grid, 1e-300) ** p_candidate)))
        for jx, jr in ((1, 0), (2, 0), (0, 1), (1, 1)):
            for x in (0.0, 0.5, 2.0):
                try:
                    d = phi_deriv(ev, r, x, jx, jr)
                    dmax = max(dmax, float(abs(d.value)))
                except (ValueError, QuadratureError):
                    pass
    fitted = max(slopes)
    structural = ev.f.b_holds_with(lambda p: abs(p - p_candidate) < 1e-12)
    # a fitted growth well above the candidate contradicts the bound
    numeric_ok = fitted <= p_candidate + 0.15 and math.isfinite(dmax)
    if ev.f.family == "custom":
        passed = numeric_ok
    else:
        passed = bool(structural and numeric_ok)
    return {"family": ev.f.family, "p_candidate": p_candidate, "eps": eps,
            "rho_probes": rhos.tolist(), "grid": grid.tolist(), "fitted_growth": fitted,
            "growth_ratio_max": max(ratios), "max_derivative": dmax,
            "structural": bool(structural), "numeric_ok": bool(numeric_ok), "passed": passed}
