"""Experiment configs, per-replication tasks and result records."""
from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy

from .. import kernel as kn
from ..appell import PhiEvaluator, expected_f_rho
from ..functionals import FunctionalSpec, classify_regime, deterministic_variation, f_eval, vstat
from ..limitlaws import (C_CONVENTIONS, DegenerateLimitWarning, LimitLaw, NoTheoremError, estimate_eta,
                         predict_limit, stable_limit_params)
from ..pathsim import (DriverSpec, PathConfig, StableIncrementSimulator, cp_horizon, cp_increments,
                       cp_path, F_from_jumps, sample_jump_series_limit)
from ..rng import RngStream
from . import stats as hs

KINDS = ("LLN_II", "LLN_III_COUPLED", "LLN_I_DIST", "CLT", "STABLE_RANK1", "STABLE_RANK2", "RATE")

# calibrated once against self-consistency runs, then frozen
DEFAULT_TOLERANCES = {
    "LLN_II": {"abs_err": 0.05},
    "LLN_III_COUPLED": {"abs_err": 0.05},
    "LLN_I_DIST": {"ks": 0.1},
    "CLT": {"ks": 0.08},
    "STABLE_RANK1": {"ks": 0.1},
    "STABLE_RANK2": {"hill_lo": 1.2, "hill_hi": 1.8},
    "RATE": {"slope_tol": 0.1},
}

# k-th derivatives of deterministic test paths
DETERMINISTIC_PATHS = {
    "linear": lambda t: np.asarray(t, dtype=float),
    "sin2pi": lambda t: np.sin(2 * np.pi * np.asarray(t, dtype=float)),
    "exp": lambda t: np.exp(np.asarray(t, dtype=float)),
}

PASS, FAIL, UNDETERMINED = "PASS", "FAIL", "UNDETERMINED"
EXIT_CODES = {PASS: 0, FAIL: 2, UNDETERMINED: 3}


@dataclass
class ExperimentConfig:
    kind: str
    driver: dict
    kernel: dict
    k: int
    f: dict
    n: list
    R: int = 1
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    path: dict = field(default_factory=dict)
    c_convention: str = "boxed"
    eta: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.c_convention not in C_CONVENTIONS:
            raise ValueError(f"c-convention must be one of {C_CONVENTIONS}")
        self.n = [int(x) for x in (self.n if isinstance(self.n, (list, tuple)) else [self.n])]
        self.tolerances = {**DEFAULT_TOLERANCES[self.kind], **self.tolerances}
        self.name = self.name or self.kind

    # --- typed views ---
    @property
    def driver_spec(self) -> DriverSpec:
        return DriverSpec.from_dict(self.driver)

    @property
    def kernel_spec(self) -> kn.KernelSpec:
        return kn.KernelSpec.from_dict(self.kernel)

    @property
    def f_spec(self) -> FunctionalSpec:
        return FunctionalSpec.from_dict(self.f)

    @property
    def path_config(self) -> PathConfig:
        return PathConfig.from_dict(self.path) if self.path else PathConfig()

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def regime(self):
        drv = self.driver_spec
        return classify_regime(self.kernel_spec.alpha, drv.bg_index, self.k, self.f_spec,
                               driver=drv.kind)

    def validate(self):
        """Reject configurations whose regime does not match the declared kind."""
        rep = self.regime()
        kind = self.kind
        if kind in ("CLT", "STABLE_RANK1", "STABLE_RANK2") or (
                kind == "RATE" and self.options.get("source", "clt") != "deterministic"):
            if rep.critical:
                raise NoTheoremError("alpha = k - 2/beta is the critical case; no weak limit theorem applies")
        need = {"LLN_II": ("case", "II"), "LLN_III_COUPLED": ("case", "III"), "LLN_I_DIST": ("case", "I"),
                "CLT": ("weak", "CLT"), "STABLE_RANK1": ("weak", "STABLE_RANK1"),
                "STABLE_RANK2": ("weak", "STABLE_RANK2")}
        if kind == "RATE":
            src = self.options.get("source", "clt")
            if src == "clt":
                need[kind] = ("weak", "CLT")
            elif src == "rank1":
                need[kind] = ("weak", "STABLE_RANK1")
            elif src != "deterministic":
                raise ValueError(f"unknown RATE source {src!r}")
        if kind in need:
            what, tag = need[kind]
            ok = rep.case(tag).applies if what == "case" else rep.weak == tag
            if not ok:
                raise ValueError(f"{kind} needs regime {tag}, classifier says "
                                 f"applicable={rep.applicable}, weak={rep.weak}")
        if kind in ("LLN_III_COUPLED", "LLN_I_DIST") and self.driver_spec.kind != "cp":
            raise ValueError(f"{kind} uses exact jump paths and needs a compound Poisson driver")
        return rep


@dataclass
class ResultRecord:
    experiment: str
    rows: list
    summary: dict
    verdict: str
    manifest: dict

    def csv_text(self) -> str:
        lines = ["experiment,n,rep,value"]
        lines += [f"{lab},{n},{rep},{val!r}" for lab, n, rep, val in self.rows]
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> dict:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "results.csv")
        text = self.csv_text()
        with open(csv_path, "w", newline="\n") as fh:
            fh.write(text)
        summary = {"experiment": self.experiment, "verdict": self.verdict, "summary": self.summary,
                   "manifest": self.manifest,
                   "results_sha256": hashlib.sha256(text.encode()).hexdigest()}
        js_path = os.path.join(out_dir, "summary.json")
        with open(js_path, "w") as fh:
            json.dump(_plain(summary), fh, indent=2, sort_keys=True)
        return {"results": csv_path, "summary": js_path}

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.verdict]


def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


def manifest_for(config: ExperimentConfig, reps) -> dict:
    from .. import __version__

    return {"config": config.to_dict(), "reps": [int(reps[0]), int(reps[-1]) + 1] if len(reps) else [0, 0],
            "versions": {"levyvar": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            "tolerances_are_empirical": True}


# --- per-replication tasks ------------------------------------------------------------

_SIM_CACHE: dict = {}


def _simulator(cfg: ExperimentConfig, n: int) -> StableIncrementSimulator:
    key = (cfg.to_json(), n)
    if key not in _SIM_CACHE:
        if len(_SIM_CACHE) > 8:
            _SIM_CACHE.clear()
        _SIM_CACHE[key] = StableIncrementSimulator(cfg.driver_spec, cfg.kernel_spec, cfg.k, n, cfg.path_config)
    return _SIM_CACHE[key]


def rep_stream(cfg: ExperimentConfig, n: int, rep: int, index: int = 0) -> RngStream:
    return RngStream(cfg.seed, index).child(n).child(rep)


def _g_mean(f: FunctionalSpec, beta: float, scales: np.ndarray) -> float:
    """n^-1-free mean of G over the per-increment scales (interpolated when they vary)."""
    ev = PhiEvaluator(f, beta)
    lo, hi = float(np.min(scales)), float(np.max(scales))
    if hi - lo <= 1e-9 * hi:
        return expected_f_rho(ev, 0.5 * (lo + hi)) * len(scales)
    grid = np.linspace(lo, hi, 33)
    vals = np.array([expected_f_rho(ev, r) for r in grid])
    return float(np.sum(np.interp(scales, grid, vals)))


def f_F_integral(path, spec: kn.KernelSpec, k: int, f: FunctionalSpec, order: int = 48,
                 power: float = 4.0) -> float:
    """int_0^1 f(F_u) du for a jump path; a graded substitution handles the
    (u - T)^(alpha - k) singularity just after each jump in [0, 1]."""
    inside = np.sort(path.times[(path.times > 0) & (path.times < 1)])
    edges = np.concatenate([[0.0], inside, [1.0]])
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1), 0.5 * w
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        # four graded panels in the substituted variable
        for p0 in range(4):
            s = (p0 + x) / 4.0
            u = a + (b - a) * s ** power
            jac = (b - a) * power * s ** (power - 1) / 4.0
            total += float(np.dot(w * jac, f_eval(f, F_from_jumps(path, spec, k, u))))
    return total


def _task(args):
    cfg_json, n, rep = args
    cfg = ExperimentConfig.from_dict(json.loads(cfg_json))
    kind, f, k = cfg.kind, cfg.f_spec, cfg.k
    drv, spec = cfg.driver_spec, cfg.kernel_spec
    stream = rep_stream(cfg, n, rep)
    if kind == "RATE" and cfg.options.get("source") == "deterministic":
        xi = DETERMINISTIC_PATHS[cfg.options.get("path", "linear")]
        stat, lim = deterministic_variation(xi, k, f, n)
        return [("error", stat - lim)]
    if drv.kind == "cp":
        path = cp_path(drv, cp_horizon(drv, spec, k, n), stream)
        dx = cp_increments(path, spec, k, n)
        if kind == "LLN_III_COUPLED":
            V = math.fsum(f_eval(f, n ** k * dx)) / n
            return [("V", V), ("limit", f_F_integral(path, spec, k, f))]
        if kind == "LLN_I_DIST":
            return [("V", math.fsum(f_eval(f, n ** spec.alpha * dx)))]
        raise ValueError(f"{kind} needs a stable driver")
    sim = _simulator(cfg, n)
    panel = sim.panel(stream)
    H = spec.alpha + 1.0 / drv.beta
    V = vstat(panel, f, 1.0, H)
    if kind == "LLN_II":
        return [("V", V)]
    center = _g_mean(f, drv.beta, n ** H * panel.scales) / n
    if kind == "RATE":
        return [("V", V), ("center", center)]
    rate = {"CLT": 0.5, "STABLE_RANK1": k - spec.alpha - 1.0 / drv.beta,
            "STABLE_RANK2": 1.0 - 1.0 / ((k - spec.alpha) * drv.beta)}[kind]
    return [("Z", n ** rate * (V - center))]


def _run_tasks(cfg: ExperimentConfig, reps, threads: int = 1) -> list:
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    jobs = [(cfg_json, n, r) for n in cfg.n for r in reps]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            outs = list(ex.map(_task, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        outs = [_task(j) for j in jobs]
    rows = []
    for (_, n, r), out in zip(jobs, outs):
        for lab, val in out:
            rows.append((f"{cfg.name}:{lab}", n, r, float(val)))
    # order-independent aggregation
    rows.sort(key=lambda t: (t[0], t[1], t[2]))
    return rows


def _col(rows, label, n=None):
    return np.array([v for lab, nn, _, v in rows if lab.endswith(":" + label) and (n is None or nn == n)])


# --- experiment runners -----------------------------------------------------------

def run_lln(cfg: ExperimentConfig, reps=None, threads: int = 1) -> ResultRecord:
    cfg.validate()
    reps = range(cfg.R) if reps is None else reps
    rows = _run_tasks(cfg, reps, threads)
    tol = cfg.tolerances
    nmax = max(cfg.n)
    summary = {"kind": cfg.kind, "n": cfg.n, "R": len(reps)}
    if cfg.kind == "LLN_II":
        drv = cfg.driver_spec
        rho0 = kn.rho0_compute(cfg.kernel_spec, cfg.k, drv.beta, drv.rho_L)
        target = expected_f_rho(PhiEvaluator(cfg.f_spec, drv.beta), rho0)
        errs = {n: float(np.max(np.abs(_col(rows, "V", n) - target))) for n in cfg.n}
        summary.update(rho0=rho0, target=target, max_abs_err=errs)
        ok = errs[nmax] < tol["abs_err"]
        if len(cfg.n) >= 4:
            summary["rate"] = hs.rate_regression(cfg.n, [errs[n] for n in cfg.n]).to_dict()
    elif cfg.kind == "LLN_III_COUPLED":
        diff = {n: float(np.max(np.abs(_col(rows, "V", n) - _col(rows, "limit", n)))) for n in cfg.n}
        summary.update(max_abs_diff=diff)
        ok = diff[nmax] < tol["abs_err"]
    else:
        drv = cfg.driver_spec
        lim, rem = sample_jump_series_limit(cfg.f_spec, drv, cfg.kernel_spec.alpha, cfg.k,
                                            L_max=int(cfg.options.get("L_max", 2000)),
                                            stream=RngStream(cfg.seed, 1), count=cfg.R)
        lim = lim[list(reps)]
        rows += [(f"{cfg.name}:limit", 0, r, float(v)) for r, v in zip(reps, lim)]
        ks = {n: hs.ks_two_sample(_col(rows, "V", n), lim) for n in cfg.n}
        summary.update(ks=ks, series_remainder_per_unit_jump=rem)
        ok = ks[nmax]["ks"] < tol["ks"]
    return ResultRecord(cfg.name, rows, summary, PASS if ok else FAIL, manifest_for(cfg, list(reps)))


def run_clt(cfg: ExperimentConfig, reps=None, threads: int = 1, eta=None) -> ResultRecord:
    cfg.validate()
    reps = range(cfg.R) if reps is None else reps
    drv, spec = cfg.driver_spec, cfg.kernel_spec
    rows = _run_tasks(cfg, reps, threads)
    if eta is None:
        e = dict(cfg.eta)
        eta = estimate_eta(cfg.f_spec, spec.alpha, drv.beta, drv.rho_L, cfg.k,
                           stream=RngStream(cfg.seed, 2), **e)
    summary = {"kind": cfg.kind, "n": cfg.n, "R": len(reps), "eta": eta.to_dict()}
    nmax = max(cfg.n)
    z = _col(rows, "Z", nmax)
    if eta.eta2 == 0.0:
        summary["degenerate"] = bool(np.all(z == 0.0))
        return ResultRecord(cfg.name, rows, summary, UNDETERMINED, manifest_for(cfg, list(reps)))
    ks = hs.ks_one_sample(z / math.sqrt(eta.eta2), "norm")
    summary.update(ks=ks, sample_var=float(np.var(z, ddof=1)))
    if not eta.converged:
        verdict = UNDETERMINED
    else:
        verdict = PASS if ks["ks"] < cfg.tolerances["ks"] else FAIL
    return ResultRecord(cfg.name, rows, summary, verdict, manifest_for(cfg, list(reps)))


def run_stable_limit(cfg: ExperimentConfig, reps=None, threads: int = 1) -> ResultRecord:
    report = cfg.validate()
    reps = range(cfg.R) if reps is None else reps
    drv, spec, f = cfg.driver_spec, cfg.kernel_spec, cfg.f_spec
    rows = _run_tasks(cfg, reps, threads)
    z = _col(rows, "Z", max(cfg.n))
    summary = {"kind": cfg.kind, "n": cfg.n, "R": len(reps), "hill": hs.hill(z),
               "tail_mass": hs.tail_mass_ratio(z)}
    tol = cfg.tolerances
    if cfg.kind == "STABLE_RANK1":
        law = predict_limit(report, f, spec, drv.rho_L)
        summary.update(sigma=law.params["sigma"], predicted=law.to_dict(),
                       ks=hs.ks_one_sample(z, law.cdf), ecf=hs.ecf_distance(z, law.char_fn))
        ok = summary["ks"]["ks"] < tol["ks"]
        return ResultRecord(cfg.name, rows, summary, PASS if ok else FAIL, manifest_for(cfg, list(reps)))
    scored = {}
    for conv in C_CONVENTIONS:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateLimitWarning)
            p = stable_limit_params(f, spec.alpha, drv.beta, cfg.k, drv.rho_L, convention=conv)
        entry = {"params": p}
        if not p["degenerate"]:
            law = LimitLaw("StableSkewed", {"index": p["index"], "scale": p["rho1"], "skew": p["eta1"]})
            entry["ks"] = hs.ks_one_sample(z, law.cdf)
        scored[conv] = entry
    pred = scored[cfg.c_convention]["params"]
    hill = summary["hill"]
    eta1 = pred["eta1"]
    if eta1 is None:
        est = [v for v in (hill["left"], hill["right"]) if v is not None]
        tail_est = min(est) if est else None
        sign_ok = False
    else:
        tail_est = hill["left"] if eta1 < 0 else hill["right"]
        sign_ok = summary["tail_mass"]["sign"] == int(np.sign(eta1))
    in_window = tail_est is not None and tol["hill_lo"] <= tail_est <= tol["hill_hi"]
    summary.update(conventions=scored, selected_convention=cfg.c_convention, tail_index_estimate=tail_est,
                   predicted_index=pred["index"], predicted_degenerate=pred["degenerate"],
                   hill_in_window=in_window, skew_sign_matches=sign_ok)
    ok = in_window and sign_ok
    return ResultRecord(cfg.name, rows, summary, PASS if ok else FAIL, manifest_for(cfg, list(reps)))


def rate_regression_experiment(cfg: ExperimentConfig, reps=None, threads: int = 1) -> ResultRecord:
    cfg.validate()
    src = cfg.options.get("source", "clt")
    reps = range(1 if src == "deterministic" else cfg.R) if reps is None else reps
    rows = _run_tasks(cfg, reps, threads)
    tol = cfg.tolerances["slope_tol"]
    spec, drv = cfg.kernel_spec, cfg.driver_spec
    if src == "deterministic":
        errs = [float(_col(rows, "error", n)[0]) for n in cfg.n]
        reg = hs.rate_regression(cfg.n, errs)
        expected = -1.0
    else:
        groups = [_col(rows, "V", n) for n in cfg.n]
        reg = hs.spread_regression(cfg.n, groups)
        expected = -0.5 if src == "clt" else -(cfg.k - spec.alpha - 1.0 / drv.beta)
    ok = abs(reg.slope - expected) <= tol
    summary = {"kind": cfg.kind, "source": src, "n": cfg.n, "R": len(reps), "regression": reg.to_dict(),
               "expected_slope": expected, "slope_tol": tol}
    return ResultRecord(cfg.name, rows, summary, PASS if ok else FAIL, manifest_for(cfg, list(reps)))


def run_experiment(cfg: ExperimentConfig, reps=None, threads: int = 1) -> ResultRecord:
    if cfg.kind.startswith("LLN"):
        return run_lln(cfg, reps, threads)
    if cfg.kind == "CLT":
        return run_clt(cfg, reps, threads)
    if cfg.kind.startswith("STABLE"):
        return run_stable_limit(cfg, reps, threads)
    return rate_regression_experiment(cfg, reps, threads)


def rerun_from_manifest(manifest: dict, reps=None, threads: int = 1) -> ResultRecord:
    cfg = ExperimentConfig.from_dict(manifest["config"])
    if reps is None:
        a, b = manifest["reps"]
        reps = range(a, b)
    return run_experiment(cfg, reps, threads)
