"""Test functions f, the variational statistic V(f;k)^n and the regime classifier."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import BSpline

FAMILIES = ("power", "negpower", "cos", "sin", "indicator", "log", "custom")
CRITICAL_TOL = 1e-9
TINY = 1e-300


class NearZeroWarning(RuntimeWarning):
    """A singular functional was evaluated at an (almost) zero argument."""


# named custom functions that can be rebuilt from a config file
CUSTOM_REGISTRY: dict[str, Callable[..., Callable]] = {
    "constant": lambda c=1.0: (lambda x: np.full_like(np.asarray(x, dtype=float), c)),
    "square": lambda: (lambda x: np.asarray(x, dtype=float) ** 2),
    "cube": lambda: (lambda x: np.asarray(x, dtype=float) ** 3),
}


@dataclass(frozen=True)
class FunctionalSpec:
    family: str
    p: float | None = None
    u: float | None = None
    fn: Callable | None = field(default=None, compare=False, repr=False)
    name: str | None = None
    attrs: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        fam = self.family
        if fam not in FAMILIES:
            raise ValueError(f"unknown functional family {fam!r}")
        if fam == "power" and not (self.p is not None and self.p > 0):
            raise ValueError("Power needs p > 0")
        if fam == "negpower" and not (self.p is not None and 0 < self.p < 1):
            raise ValueError("NegPower needs p in (0, 1)")
        if fam in ("cos", "sin", "indicator") and self.u is None:
            raise ValueError(f"{fam} needs the parameter u")
        if fam == "custom" and self.fn is None:
            raise ValueError("Custom needs an evaluator")

    # --- structural attributes --------------------------------------------
    @property
    def even(self) -> bool | None:
        if self.family in ("power", "negpower", "cos", "log"):
            return True
        if self.family in ("sin", "indicator"):
            return False
        return self.attrs.get("even")

    @property
    def bounded(self) -> bool:
        if self.family in ("cos", "sin", "indicator"):
            return True
        return bool(self.attrs.get("bounded", False)) if self.family == "custom" else False

    @property
    def continuous(self) -> bool:
        if self.family in ("indicator", "negpower", "log"):
            return False
        return bool(self.attrs.get("continuous", True))

    @property
    def growth(self) -> float:
        """q with |f(x)| <= C (1 v |x|^q)."""
        if self.family == "power":
            return float(self.p)
        if self.family == "log":
            return 0.0
        if self.family == "custom":
            return float(self.attrs.get("growth", math.inf))
        return 0.0

    @property
    def smoothness(self) -> float:
        """Largest p with f in C^p and f^(j)(0) = 0 for j <= [p] (0 when f(0) != 0)."""
        if self.family == "power":
            return float(self.p)
        if self.family == "sin":
            return 1.0
        if self.family == "custom":
            return float(self.attrs.get("smooth", 0.0))
        return 0.0

    def small_x_power(self) -> float:
        """Exponent p of the bound |f(x)| <= C|x|^p near 0."""
        s = self.smoothness
        if s <= 0:
            raise ValueError(f"{self.label} is not O(|x|^p) at 0")
        return s

    def moment_finite(self, beta: float, order: int = 1) -> bool:
        """E|f(L_1)|^order < infinity for a SbS driver of index beta."""
        if self.bounded or self.family == "log":
            return True
        if self.family == "power":
            return order * self.p < beta
        if self.family == "negpower":
            return order * self.p < 1
        return bool(self.attrs.get(f"moment{order}", False))

    def b_exponents(self) -> tuple[float, float, bool, bool] | None:
        """Range of p for which assumption (B) holds: (lo, hi, lo_closed, hi_closed)."""
        if self.bounded:
            return (0.0, 1.0, True, True)
        if self.family == "power":
            return (self.p, self.p, True, True) if self.p <= 1 else None
        if self.family == "negpower":
            return (0.0, 0.0, True, True)
        if self.family == "log":
            return (0.0, 1.0, False, True)
        rng = self.attrs.get("B_p")
        return tuple(rng) if rng else None

    def b_holds_with(self, pred: Callable[[float], bool]) -> bool:
        """Does (B) hold for some admissible p satisfying ``pred``?"""
        rng = self.b_exponents()
        if rng is None:
            return False
        lo, hi, lc, hc = rng
        cands = np.linspace(lo, hi, 201)
        ok = [c for c in cands if (c > lo or lc) and (c < hi or hc)]
        if not ok and lo == hi and lc and hc:
            ok = [lo]
        return any(pred(c) for c in ok)

    @property
    def label(self) -> str:
        if self.family == "custom":
            return f"Custom({self.name or 'fn'})"
        if self.family in ("power", "negpower"):
            return f"{'Power' if self.family == 'power' else 'NegPower'}({self.p:g})"
        if self.family == "log":
            return "Log"
        return f"{self.family.capitalize()}({self.u:g})"

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.p is not None:
            out["p"] = self.p
        if self.u is not None:
            out["u"] = self.u
        if self.family == "custom":
            out["name"] = self.name
            out["attrs"] = dict(self.attrs)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionalSpec":
        fam = d["family"].lower()
        if fam == "custom":
            name = d.get("name")
            if name not in CUSTOM_REGISTRY:
                raise ValueError(f"custom functional {name!r} is not in the registry")
            attrs = dict(d.get("attrs", {}))
            fn = CUSTOM_REGISTRY[name](**attrs.pop("params", {}))
            return Custom(fn, name=name, **attrs)
        return cls(fam, p=d.get("p"), u=d.get("u"))


def Power(p: float) -> FunctionalSpec:
    return FunctionalSpec("power", p=float(p))


def NegPower(p: float) -> FunctionalSpec:
    return FunctionalSpec("negpower", p=float(p))


def Cos(u: float = 1.0) -> FunctionalSpec:
    return FunctionalSpec("cos", u=float(u))


def Sin(u: float = 1.0) -> FunctionalSpec:
    return FunctionalSpec("sin", u=float(u))


def Indicator(u: float = 0.0) -> FunctionalSpec:
    return FunctionalSpec("indicator", u=float(u))


def Log() -> FunctionalSpec:
    return FunctionalSpec("log")


def Custom(fn: Callable, name: str | None = None, *, even: bool | None = None,
           bounded: bool = False, growth: float = math.inf, smooth: float = 0.0,
           continuous: bool = True, moment1: bool = False, moment2: bool = False,
           B_p=None, rank: str | None = None, check: bool = True, **extra) -> FunctionalSpec:
    """User functional with declared attributes, probe-checked on a grid."""
    attrs = {"even": even, "bounded": bounded, "growth": growth, "smooth": smooth,
             "continuous": continuous, "moment1": moment1, "moment2": moment2,
             "B_p": B_p, "rank": rank, **extra}
    spec = FunctionalSpec("custom", fn=fn, name=name, attrs=attrs)
    if check:
        probe_attributes(spec, raise_on_mismatch=True)
    return spec


def probe_attributes(spec: FunctionalSpec, raise_on_mismatch: bool = False) -> dict:
    """Numeric consistency checks of declared evenness, growth and behaviour at 0."""
    x = np.concatenate([np.geomspace(1e-3, 1e3, 61)])
    fx = np.asarray(f_eval(spec, x), dtype=float)
    fm = np.asarray(f_eval(spec, -x), dtype=float)
    scale = max(1.0, float(np.max(np.abs(fx))))
    out = {"even_probe": bool(np.max(np.abs(fx - fm)) <= 1e-9 * scale)}
    big = np.array([1e2, 1e4])
    fb = np.abs(np.asarray(f_eval(spec, big), dtype=float))
    if np.all(fb > 0):
        out["growth_probe"] = float(np.log(fb[1] / fb[0]) / np.log(big[1] / big[0]))
    else:
        out["growth_probe"] = 0.0
    # finite-difference derivatives at 0 (step 1e-4, zero threshold 1e-6)
    h = 1e-4
    f = lambda t: float(np.asarray(f_eval(spec, np.array([t])))[0])
    derivs = [f(0.0), (f(h) - f(-h)) / (2 * h), (f(h) - 2 * f(0.0) + f(-h)) / h ** 2]
    out["derivs_at_0"] = derivs
    s = spec.smoothness
    out["smooth_probe_ok"] = all(abs(d) < 1e-6 for d in derivs[: int(math.floor(s)) + 1]) if s > 0 else True
    problems = []
    if spec.even is not None and spec.even != out["even_probe"]:
        problems.append(f"declared even={spec.even} but probe says {out['even_probe']}")
    if spec.family == "custom" and out["growth_probe"] > spec.growth + 0.05:
        problems.append(f"declared growth {spec.growth} but probe slope {out['growth_probe']:.3f}")
    if not out["smooth_probe_ok"]:
        problems.append("declared smoothness at 0 fails the finite-difference probe")
    out["problems"] = problems
    if problems and raise_on_mismatch:
        raise ValueError("; ".join(problems))
    return out


def f_eval(spec: FunctionalSpec, x):
    """f(x) with the 1{x != 0} conventions for NegPower and Log."""
    x = np.asarray(x, dtype=float)
    fam = spec.family
    if fam == "power":
        out = np.abs(x) ** spec.p
    elif fam in ("negpower", "log"):
        ax = np.abs(x)
        nz = ax > 0
        safe = np.where(nz, ax, 1.0)
        out = np.where(nz, safe ** (-spec.p) if fam == "negpower" else np.log(safe), 0.0)
    elif fam == "cos":
        out = np.cos(spec.u * x)
    elif fam == "sin":
        out = np.sin(spec.u * x)
    elif fam == "indicator":
        out = (x <= spec.u).astype(float)
    else:
        out = np.asarray(spec.fn(x), dtype=float)
        if out.shape != x.shape:
            out = np.broadcast_to(out, x.shape).astype(float)
    return out if out.ndim else float(out)


def _values(panel):
    if hasattr(panel, "values"):
        return np.asarray(panel.values, dtype=float), int(panel.n), int(panel.k)
    raise TypeError("expected an IncrementPanel")


def _scaled(spec, vals, n, b_exp):
    y = n ** b_exp * vals
    if spec.family in ("negpower", "log") and np.any(np.abs(y) < TINY):
        warnings.warn(f"{int(np.sum(np.abs(y) < TINY))} scaled increments below {TINY:g}",
                      NearZeroWarning, stacklevel=3)
    return y


def vstat(panel, spec: FunctionalSpec, a_exp: float, b_exp: float) -> float:
    """V(f;k)^n = n^(-a) sum_i f(n^b Delta_i), with compensated summation."""
    vals, n, _ = _values(panel)
    if len(vals) == 0:
        raise ValueError("empty panel")
    y = _scaled(spec, vals, n, b_exp)
    return n ** (-a_exp) * math.fsum(np.asarray(f_eval(spec, y), dtype=float).ravel())


def vstat_process(panel, spec: FunctionalSpec, a_exp: float, b_exp: float, t_grid) -> np.ndarray:
    """V(f;k)^n_t = n^(-a) sum_{i=k}^{[nt]} f(n^b Delta_i) on ``t_grid``."""
    vals, n, k = _values(panel)
    t = np.asarray(t_grid, dtype=float)
    if np.any((t <= 0) | (t > 1)):
        raise ValueError("t_grid must lie in (0, 1]")
    fy = np.asarray(f_eval(spec, _scaled(spec, vals, n, b_exp)), dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(fy)])
    # number of terms with i <= [nt]
    cnt = np.clip(np.floor(n * t + 1e-9).astype(int) - k + 1, 0, len(fy))
    out = n ** (-a_exp) * csum[cnt]
    # the full sum goes through fsum so that t = 1 reproduces vstat exactly
    full = cnt == len(fy)
    if np.any(full):
        out[full] = n ** (-a_exp) * math.fsum(fy)
    return out


# --- regimes ----------------------------------------------------------------

@dataclass
class CaseReport:
    case: str
    applies: bool
    a_exp: float
    b_exp: float
    a_sym: str
    b_sym: str
    checks: dict

    def to_dict(self):
        return asdict(self)


@dataclass
class RegimeReport:
    alpha: float
    beta: float
    k: int
    functional: dict
    driver: str
    cases: list[CaseReport]
    weak: str
    weak_checks: dict
    rank: str
    critical: bool
    rate_exponent: float | None = None
    limit: object = None

    @property
    def applicable(self) -> list[str]:
        return [c.case for c in self.cases if c.applies]

    def case(self, tag: str) -> CaseReport:
        for c in self.cases:
            if c.case == tag:
                return c
        raise KeyError(tag)

    def to_dict(self) -> dict:
        d = {"alpha": self.alpha, "beta": self.beta, "k": self.k, "functional": self.functional,
             "driver": self.driver, "cases": [c.to_dict() for c in self.cases],
             "applicable": self.applicable, "weak": self.weak, "weak_checks": self.weak_checks,
             "rank": self.rank, "critical": self.critical, "rate_exponent": self.rate_exponent}
        if self.limit is not None and hasattr(self.limit, "to_dict"):
            d["limit"] = self.limit.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


def structural_rank(spec: FunctionalSpec) -> str:
    if spec.family in ("sin", "indicator"):
        return "RANK1"
    if spec.even:
        return "RANK_GE2"
    declared = spec.attrs.get("rank") if spec.family == "custom" else None
    return declared or "UNDETERMINED"


def _frac(x: float) -> str:
    return str(Fraction(x).limit_denominator(1000))


def classify_regime(alpha: float, beta: float, k: int, spec: FunctionalSpec,
                    appell_report=None, driver: str = "stable") -> RegimeReport:
    """Which limit theorems apply at (alpha, beta, k, f).

    ``beta`` is the driver's Blumenthal-Getoor index (0 for compound Poisson).
    All coexisting regimes are reported; the weak-limit tag refers to case II.
    """
    if not alpha > 0 or k < 1:
        raise ValueError("need alpha > 0 and k >= 1")
    if not (0 <= beta < 2):
        raise ValueError("need 0 <= beta < 2")
    rank = structural_rank(spec)
    if appell_report is not None:
        verdict = appell_report.verdict
        if verdict == "RANK1" and spec.even:
            raise ValueError("an even functional cannot have Appell rank one "
                             "(its x-derivative of Phi vanishes at 0 for every rho)")
        if verdict != "UNDETERMINED":
            rank = verdict
    H = alpha + 1.0 / beta if beta > 0 else math.inf
    cases = []
    # case I
    thr = max(beta, 1.0 / (k - alpha)) if k > alpha else math.inf
    c1 = {"k>alpha": k > alpha, "smoothness": spec.smoothness, "threshold": thr,
          "smoothness>threshold": spec.smoothness > thr}
    cases.append(CaseReport("I", all([c1["k>alpha"], c1["smoothness>threshold"]]),
                            0.0, alpha, "0", "alpha", c1))
    # case II
    c2 = {"stable_driver": driver == "stable", "H<k": H < k, "H": H,
          "E|f(L1)|<inf": spec.moment_finite(beta, 1) if beta > 0 else False}
    cases.append(CaseReport("II", all([c2["stable_driver"], c2["H<k"], c2["E|f(L1)|<inf"]]),
                            1.0, H, "1", "alpha+1/beta", c2))
    # case III
    w = max(1.0, beta) * (k - alpha)
    c3 = {"(1vbeta)(k-alpha)<1": w < 1, "window": w, "continuous": spec.continuous,
          "q(k-alpha)<1": spec.growth * (k - alpha) < 1}
    cases.append(CaseReport("III", all([c3["(1vbeta)(k-alpha)<1"], c3["continuous"], c3["q(k-alpha)<1"]]),
                            1.0, float(k), "1", "k", c3))

    crit_point = k - 2.0 / beta if beta > 0 else -math.inf
    critical = driver == "stable" and abs(alpha - crit_point) < CRITICAL_TOL
    weak, rate, wchecks = "NONE", None, {}
    if critical:
        weak = "CRITICAL"
    elif cases[1].applies:
        if alpha < crit_point:
            wchecks = {"B p<beta/2": spec.b_holds_with(lambda p: p < beta / 2),
                       "E f(L1)^2<inf": spec.moment_finite(beta, 2)}
            weak, rate = "CLT", 0.5
        elif alpha < k - 1.0 / beta:
            if rank == "RANK1":
                wchecks = {"beta in (1,2)": 1 < beta < 2, "alpha>k-1": alpha > k - 1,
                           "B p=1": spec.b_holds_with(lambda p: p == 1.0)}
                if wchecks["beta in (1,2)"] and wchecks["alpha>k-1"]:
                    weak, rate = "STABLE_RANK1", k - alpha - 1.0 / beta
            elif rank == "RANK_GE2":
                wchecks = {"B p<beta/2": spec.b_holds_with(lambda p: p < beta / 2)}
                weak, rate = "STABLE_RANK2", 1.0 - 1.0 / ((k - alpha) * beta)
            else:
                weak = "NONE"
                wchecks = {"rank": "UNDETERMINED"}
    return RegimeReport(alpha, beta, k, spec.to_dict(), driver, cases, weak, wchecks, rank,
                        critical, rate)


# --- deterministic oracle ------------------------------------------------------

def _bspline_nodes(k: int, order: int = 16):
    gx, gw = np.polynomial.legendre.leggauss(order)
    t = np.concatenate([j + 0.5 * (gx + 1) for j in range(k)])
    w = np.concatenate([0.5 * gw for _ in range(k)])
    B = BSpline.basis_element(np.arange(k + 1), extrapolate=False)(t)
    return t, w * np.nan_to_num(B)


def deterministic_variation(xi_k: Callable, k: int, f: FunctionalSpec, n: int,
                            tol: float = 1e-10) -> tuple[float, float]:
    """(n^-1 sum_{i=k}^n f(n^k Delta_{i,k} xi), int_0^1 f(xi^(k)(s)) ds).

    The k-th difference is computed from xi^(k) through the Peano kernel
    n^k Delta_{i,k} xi = int_0^k B_k(t) xi^(k)((i-k+t)/n) dt with B_k the
    cardinal B-spline, which is the k-fold integral of xi^(k) without
    cancellation.
    """
    t, w = _bspline_nodes(k)
    i = np.arange(k, n + 1)
    vals = np.asarray(xi_k((i[:, None] - k + t[None, :]) / n), dtype=float) @ w
    stat = math.fsum(np.asarray(f_eval(f, vals), dtype=float)) / n
    lim, _ = integrate.quad(lambda s: float(f_eval(f, float(xi_k(s)))), 0.0, 1.0,
                            epsabs=tol, epsrel=tol, limit=200)
    return stat, lim


def regime_summary(report: RegimeReport) -> str:
    parts = [f"{c.case}: a_n=n^-{_frac(c.a_exp)} b_n=n^{c.b_exp:.6g}" for c in report.cases if c.applies]
    return "; ".join(parts) + f"; weak={report.weak}"
