"""Limit-law parameters and their assembly into predicted laws."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, stats

from . import kernel as kn
from . import stable as st
from .appell import PhiEvaluator, expected_f_rho, phi_deriv, phi_eval
from .functionals import CRITICAL_TOL, FunctionalSpec, RegimeReport, f_eval
from .pathsim import WindowError, simulate_Ym_sequences
from .rng import RngStream

C_CONVENTIONS = ("boxed", "exponent-beta", "tail-exact")
ETA_SCHEDULE = (2, 4, 8, 16, 32)


class DegenerateLimitWarning(RuntimeWarning):
    pass


class NoTheoremError(ValueError):
    """No limit theorem covers the requested configuration."""


# --- laws -----------------------------------------------------------------------

@dataclass
class LimitLaw:
    variant: str
    params: dict
    rate_exponent: float | None = None
    handle: Callable | None = field(default=None, repr=False)
    note: str = ""

    def _stable(self) -> st.StableLaw:
        p = self.params
        if self.variant == "SBS":
            return st.StableLaw(p["index"], p["scale"])
        return st.StableLaw(p["index"], p["scale"], p["skew"])

    @property
    def degenerate(self) -> bool:
        p = self.params
        return (self.variant == "Normal" and p["variance"] == 0.0) or (
            self.variant in ("SBS", "StableSkewed") and p["scale"] == 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.variant == "Constant" or self.degenerate:
            c = self.params.get("value", 0.0)
            return (x >= c).astype(float)
        if self.variant == "Normal":
            return stats.norm.cdf(x, scale=math.sqrt(self.params["variance"]))
        if self.variant in ("SBS", "StableSkewed"):
            return st.stable_cdf(self._stable(), x)
        raise ValueError(f"no closed CDF for {self.variant}")

    def char_fn(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.variant == "Constant":
            return np.exp(1j * theta * self.params["value"])
        if self.variant == "Normal":
            return np.exp(-0.5 * self.params["variance"] * theta ** 2)
        if self.variant in ("SBS", "StableSkewed"):
            if self.degenerate:
                return np.ones_like(theta, dtype=complex)
            return st.char_fn(self._stable(), theta)
        raise ValueError(f"no closed characteristic function for {self.variant}")

    def sample(self, count: int, stream: RngStream):
        if self.variant in ("JumpSeries", "PathIntegral"):
            return self.handle(count, stream)
        if self.variant == "Constant":
            return np.full(count, self.params["value"])
        if self.variant == "Normal":
            return math.sqrt(self.params["variance"]) * stream.generator(7).standard_normal(count)
        return st.sample(self._stable(), count, stream.generator(7))

    def to_dict(self) -> dict:
        return {"variant": self.variant, "params": _plain(self.params),
                "rate_exponent": self.rate_exponent, "note": self.note}


def _plain(d):
    if isinstance(d, dict):
        return {k: _plain(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_plain(v) for v in d]
    if isinstance(d, (np.floating, np.integer)):
        return d.item()
    if isinstance(d, np.bool_):
        return bool(d)
    return d


# --- eta^2 ------------------------------------------------------------------------

@dataclass
class EtaEstimate:
    schedule: list
    per_m: list
    eta2: float
    se: float
    converged: bool
    length: int
    M: int

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _combine_autocov(z: np.ndarray, m: int) -> float:
    z = z - z.mean()
    N = len(z)
    acc = float(np.dot(z, z)) / N
    for j in range(1, m + 1):
        acc += 2.0 * float(np.dot(z[:-j], z[j:])) / N
    return acc


def _eta_from_values(z: np.ndarray, m: int, batches: int) -> tuple[float, float]:
    est = _combine_autocov(z, m)
    L = len(z) // batches
    if L <= 4 * m:
        raise ValueError(f"batches too short for lag {m}: length {L}")
    per = [_combine_autocov(z[b * L:(b + 1) * L], m) for b in range(batches)]
    return est, float(np.std(per, ddof=1) / math.sqrt(batches))


def _check_clt_window(f: FunctionalSpec, alpha: float, beta: float, k: int):
    if not (0 < alpha < k - 2.0 / beta):
        raise WindowError(f"CLT window needs 0 < alpha < k - 2/beta = {k - 2.0 / beta:.4g}")
    if not f.moment_finite(beta, 2):
        raise WindowError(f"E f(L1)^2 is infinite for {f.label}")


def eta_m_estimate(f: FunctionalSpec, alpha: float, beta: float, rho_L: float, k: int, m: int,
                   R: int = 200_000, M: int = 32, batches: int = 20,
                   stream: RngStream | None = None) -> tuple[float, float]:
    """(eta_m^2, SE): autocovariances of f(Y^{inf,m}) at lags 0..m combined, batch-means SE."""
    _check_clt_window(f, alpha, beta, k)
    y = simulate_Ym_sequences(beta, rho_L, alpha, k, [m], R, M, stream or RngStream(0))[m]
    return _eta_from_values(np.asarray(f_eval(f, y), dtype=float), m, batches)


def estimate_eta(f: FunctionalSpec, alpha: float, beta: float, rho_L: float, k: int,
                 schedule=ETA_SCHEDULE, R: int = 200_000, M: int = 32, batches: int = 20,
                 eps_abs: float = 1e-4, stream: RngStream | None = None) -> EtaEstimate:
    """eta^2 over an m schedule sharing driver noise; stabilization on the last three points."""
    _check_clt_window(f, alpha, beta, k)
    schedule = sorted(int(m) for m in schedule)
    ys = simulate_Ym_sequences(beta, rho_L, alpha, k, schedule, R, M, stream or RngStream(0))
    per = []
    for m in schedule:
        e, se = _eta_from_values(np.asarray(f_eval(f, ys[m]), dtype=float), m, batches)
        per.append({"m": m, "eta2": e, "se": se})
    for a, b in zip(per[:-1], per[1:]):
        b["stable_vs_prev"] = abs(b["eta2"] - a["eta2"]) < max(eps_abs, 2.0 * max(a["se"], b["se"]))
    tail = per[-2:] if len(per) >= 3 else per[1:]
    converged = bool(tail) and all(p["stable_vs_prev"] for p in tail)
    last = per[-1]
    return EtaEstimate(schedule, per, max(last["eta2"], 0.0), last["se"], converged, R, M)


# --- rank-one scale ------------------------------------------------------------------

def sigma_compute(f: FunctionalSpec, spec: kn.KernelSpec, k: int, beta: float, rho_L: float = 1.0,
                  tol: float = 1e-9) -> float:
    """sigma = rho_L Phi'_{rho_inf}(0) c_0^(1/beta), rho_inf = rho_L ||h_k||_beta."""
    a = spec.alpha
    if not (1 < beta < 2 and k - 1 < a < k - 1.0 / beta):
        raise WindowError(f"rank-one window needs beta in (1,2), alpha in (k-1, k-1/beta); "
                          f"got alpha={a}, beta={beta}, k={k}")
    rho = kn.rho0_compute(spec, k, beta, rho_L, tol)
    ev = PhiEvaluator(f, beta)
    d = phi_deriv(ev, rho, 0.0, 1, 0)
    if abs(d.value) <= max(1e-12, 10 * d.error):
        warnings.warn("Phi'(0) vanishes at rho_inf: the rank-one limit is degenerate (sigma = 0)",
                      DegenerateLimitWarning, stacklevel=2)
        return 0.0
    c0 = kn.c0_compute(spec, k, beta, tol)
    return rho_L * d.value * c0 ** (1.0 / beta)


# --- rank >= 2 parameters --------------------------------------------------------------

def _phi_tail_integral(ev: PhiEvaluator, rho: float, sgn: float, d: float, X: float, tol: float) -> float:
    """int_X^inf Phi(sgn x) x^(-1-d) dx."""
    f = ev.f
    if ev.closed and f.family in ("cos", "sin"):
        E = math.exp(-abs(rho * f.u) ** ev.beta)
        w = abs(f.u)
        wt = lambda x: x ** (-1.0 - d)
        if f.family == "cos":
            osc, _ = integrate.quad(wt, X, np.inf, weight="cos", wvar=w, epsabs=tol * 1e-2, limlst=200)
            return E * (osc - X ** (-d) / d)
        osc, _ = integrate.quad(wt, X, np.inf, weight="sin", wvar=w, epsabs=tol * 1e-2, limlst=200)
        return E * sgn * math.copysign(1.0, f.u) * osc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(lambda x: phi_eval(ev, rho, sgn * x) * x ** (-1.0 - d), X, np.inf,
                                epsabs=tol * 1e-2, epsrel=tol, limit=400)
    return val


def kappa_compute(f: FunctionalSpec, alpha: float, beta: float, k: int, rho_L: float = 1.0,
                  sign: str = "+", tol: float = 1e-9, rho: float | None = None) -> float:
    """kappa_{+/-} = int_0^inf Phi_{rho_inf}(+/- k_alpha v^(k-alpha)) v^(-2) dv.

    Computed in x = |k_alpha| v^(k-alpha), where the integrand is
    Phi(x) x^(-1-d) with d = 1/(k-alpha): O(x^(1-d)) at 0 and O(x^(p-1-d)) at
    infinity under |Phi(x)| <= C |x|^p.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    if not (k - 2.0 / beta < alpha < k - 1.0 / beta):
        raise WindowError(f"rank >= 2 window needs alpha in (k-2/beta, k-1/beta); got {alpha}")
    d = 1.0 / (k - alpha)
    growth = 0.0 if f.bounded else f.growth
    if f.family == "log":
        growth = 1e-9
    if growth >= d:
        raise kn.IntegrabilityError(f"kappa diverges: growth {growth} >= 1/(k-alpha) = {d:.4g}")
    ka = kn.k_alpha(alpha, k)
    if ka == 0.0:
        return 0.0
    rho = rho if rho is not None else kn.rho0_compute(alpha, k, beta, rho_L, tol)
    ev = PhiEvaluator(f, beta)
    sgn = math.copysign(1.0, ka) * (1.0 if sign == "+" else -1.0)
    g = lambda x: phi_eval(ev, rho, sgn * x) * x ** (-1.0 - d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, _ = integrate.quad(g, 0.0, 1.0, epsabs=tol * 1e-2, epsrel=tol, limit=400)
        mid, _ = integrate.quad(g, 1.0, 50.0, epsabs=tol * 1e-2, epsrel=tol, limit=400)
    tail = _phi_tail_integral(ev, rho, sgn, d, 50.0, tol)
    return abs(ka) ** d * (head + mid + tail) / (k - alpha)


def c_pm(kp: float, km: float, alpha: float, beta: float, k: int, rho_L: float,
         convention: str = "boxed") -> tuple[float, float]:
    """Tail constants (c+, c-) of the rank >= 2 limit from (kappa+, kappa-)."""
    if convention not in C_CONVENTIONS:
        raise ValueError(f"c-convention must be one of {C_CONVENTIONS}")
    tb = st.tau_gamma(beta)
    if convention == "boxed":
        pre, e = tb * rho_L, k - alpha
    elif convention == "exponent-beta":
        pre, e = tb * rho_L ** beta, (k - alpha) * beta
    else:
        pre, e = 0.5 * tb * rho_L ** beta, (k - alpha) * beta
    cp = pre * sum(abs(x) ** e for x in (kp, km) if x > 0)
    cm = pre * sum(abs(x) ** e for x in (kp, km) if x < 0)
    return cp, cm


def stable_limit_params(f: FunctionalSpec, alpha: float, beta: float, k: int, rho_L: float = 1.0,
                        tol: float = 1e-9, convention: str = "boxed") -> dict:
    """Index, scale, skewness and tail constants of the rank >= 2 stable limit."""
    rho = kn.rho0_compute(alpha, k, beta, rho_L, tol)
    kp = kappa_compute(f, alpha, beta, k, rho_L, "+", tol, rho)
    km = kappa_compute(f, alpha, beta, k, rho_L, "-", tol, rho) if not f.even else kp
    gamma = (k - alpha) * beta
    cp, cm = c_pm(kp, km, alpha, beta, k, rho_L, convention)
    out = {"index": gamma, "kappa_plus": kp, "kappa_minus": km, "c_plus": cp, "c_minus": cm,
           "rho_inf": rho, "k_alpha": kn.k_alpha(alpha, k), "convention": convention,
           "degenerate": cp + cm == 0.0}
    if out["degenerate"]:
        warnings.warn("c+ + c- = 0: the rank >= 2 limit is degenerate at this configuration",
                      DegenerateLimitWarning, stacklevel=2)
        out.update(rho1=0.0, eta1=None)
    else:
        out.update(rho1=((cp + cm) / st.tau_gamma(gamma)) ** (1.0 / gamma), eta1=(cp - cm) / (cp + cm))
    return out


def params_json(f: FunctionalSpec, alpha: float, beta: float, k: int, rho_L: float, tol: float,
                convention: str, params: dict) -> str:
    key = {"f": f.to_dict(), "alpha": alpha, "beta": beta, "k": k, "rho_L": rho_L, "tol": tol,
           "c_convention": convention}
    return json.dumps({"key": _plain(key), "params": _plain(params)}, indent=2)


# --- assembly ---------------------------------------------------------------------

def predict_limit(report: RegimeReport, f: FunctionalSpec, spec: kn.KernelSpec | None = None,
                  rho_L: float = 1.0, target: str = "weak", eta: EtaEstimate | None = None,
                  convention: str = "boxed", tol: float = 1e-9, driver=None,
                  eta_kwargs: dict | None = None) -> LimitLaw:
    """The law predicted for ``target`` in {"weak", "I", "II", "III"}."""
    alpha, beta, k = report.alpha, report.beta, report.k
    spec = spec or kn.KernelSpec(alpha)
    if target == "weak":
        if report.critical or abs(alpha - (k - 2.0 / beta)) < CRITICAL_TOL:
            raise NoTheoremError("alpha = k - 2/beta is the critical case; no weak limit theorem applies")
        w = report.weak
        if w == "CLT":
            eta = eta or estimate_eta(f, alpha, beta, rho_L, k, **(eta_kwargs or {}))
            return LimitLaw("Normal", {"variance": eta.eta2, "eta_converged": eta.converged}, 0.5,
                            note="sqrt(n)(V - G(rho)) -> N(0, eta^2)")
        if w == "STABLE_RANK1":
            s = sigma_compute(f, spec, k, beta, rho_L, tol)
            return LimitLaw("SBS", {"index": beta, "scale": abs(s), "sigma": s}, k - alpha - 1.0 / beta)
        if w == "STABLE_RANK2":
            p = stable_limit_params(f, alpha, beta, k, rho_L, tol, convention)
            params = {"index": p["index"], "scale": p["rho1"], "skew": p["eta1"], **p}
            return LimitLaw("StableSkewed", params, 1.0 - 1.0 / ((k - alpha) * beta))
        raise NoTheoremError(f"no weak limit theorem applies (tag {w})")
    case = report.case(target)
    if not case.applies:
        raise NoTheoremError(f"case {target} does not apply: {case.checks}")
    if target == "II":
        rho = kn.rho0_compute(spec, k, beta, rho_L, tol)
        return LimitLaw("Constant", {"value": expected_f_rho(PhiEvaluator(f, beta), rho), "rho0": rho})
    if target == "III":
        from .pathsim import PathConfig, simulate_F_path

        def handle(count, stream, u_grid=None):
            ug = np.linspace(0.0, 1.0, 1025) if u_grid is None else u_grid
            vals = []
            for r in range(count):
                F = simulate_F_path(driver, spec, k, ug, PathConfig(), stream.child(r))
                vals.append(integrate.trapezoid(f_eval(f, F), ug))
            return np.array(vals)
        return LimitLaw("PathIntegral", {}, handle=handle, note="int_0^1 f(F_u) du")
    from .pathsim import sample_jump_series_limit

    def handle(count, stream):
        return sample_jump_series_limit(f, driver, alpha, k, 1.0, stream=stream, count=count)[0]
    return LimitLaw("JumpSeries", {}, handle=handle, note="jump series of f(dL h_k(l + U))")
