"""Simulation of driver paths and k-th order increment panels.

For a symmetric stable driver the increments

    Delta_i = int g_{i,n}(s) dL_s,  i = k..n,

are approximated on three zones of the time axis:

* a fine grid of step 1/(nM) on [-A, 1], convolved with the discrete kernel by
  FFT (midpoint kernel values, breakpoints aligned with the observation grid);
* geometrically growing blocks on [-T, -A]; the far-past field is smooth in
  i/n, so it is evaluated at Chebyshev nodes and interpolated;
* nothing beyond -T (truncation, with its L^beta norm recorded).

Every zone's error is itself a symmetric stable variable whose scale is
rho_L times an L^beta norm, so the budget is exact up to quadrature.

Compound Poisson drivers are simulated exactly as finite jump sums.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft, signal
from scipy.integrate import quad

from . import kernel as kn
from .rng import RngStream
from .stable import StableLaw, sample

JUMP_LAWS = ("pm1", "laplace", "uniform")
CHEB_NODES = 40


class BudgetError(ValueError):
    """The simulation error budget exceeds the configured cap."""


class WindowError(ValueError):
    """Parameters fall outside the window an operation needs."""


@dataclass(frozen=True)
class DriverSpec:
    kind: str = "stable"
    beta: float = 1.5
    rho_L: float = 1.0
    rate: float = 3.0
    jump_law: str = "pm1"

    def __post_init__(self):
        if self.kind not in ("stable", "cp"):
            raise ValueError(f"driver kind must be 'stable' or 'cp', got {self.kind!r}")
        if self.kind == "stable":
            if not (0.0 < self.beta < 2.0):
                raise ValueError("stable driver needs beta in (0, 2)")
            if not self.rho_L > 0:
                raise ValueError("rho_L must be positive")
        else:
            if not self.rate > 0:
                raise ValueError("jump rate must be positive")
            if self.jump_law not in JUMP_LAWS:
                raise ValueError(f"unknown jump law {self.jump_law!r}")

    @classmethod
    def stable(cls, beta: float, rho_L: float = 1.0) -> "DriverSpec":
        return cls("stable", beta=beta, rho_L=rho_L)

    @classmethod
    def compound_poisson(cls, rate: float = 3.0, jump_law: str = "pm1") -> "DriverSpec":
        return cls("cp", rate=rate, jump_law=jump_law)

    @property
    def bg_index(self) -> float:
        """Blumenthal-Getoor index of the driver."""
        return self.beta if self.kind == "stable" else 0.0

    @property
    def mean_abs_jump(self) -> float:
        return {"pm1": 1.0, "laplace": 1.0, "uniform": 0.5}[self.jump_law]

    def jumps(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.jump_law == "pm1":
            return rng.choice(np.array([-1.0, 1.0]), size=count)
        if self.jump_law == "laplace":
            return rng.laplace(size=count)
        return rng.uniform(-1.0, 1.0, size=count)

    def to_dict(self) -> dict:
        if self.kind == "stable":
            return {"kind": "stable", "beta": self.beta, "rho_L": self.rho_L}
        return {"kind": "cp", "rate": self.rate, "jump_law": self.jump_law}

    @classmethod
    def from_dict(cls, d: dict) -> "DriverSpec":
        if d.get("kind", "stable") == "stable":
            return cls.stable(float(d["beta"]), float(d.get("rho_L", 1.0)))
        return cls.compound_poisson(float(d.get("rate", 3.0)), d.get("jump_law", "pm1"))


@dataclass(frozen=True)
class PathConfig:
    """Discretisation controls.

    ``T_trunc`` None picks the smallest T whose neglected tail scale is below
    ``trunc_rel`` times the increment scale. ``budget_cap`` (relative) makes
    simulation refuse configurations whose total error scale is larger.
    """

    M: int = 32
    A: float = 1.0
    T_trunc: float | None = None
    trunc_rel: float = 1e-3
    block_ratio: float = 0.05
    T_max: float = 1e40
    budget_cap: float | None = None
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("oversampling factor M must be >= 1")
        if not self.A > 0:
            raise ValueError("fine-grid past length A must be positive")
        if not (0 < self.block_ratio <= 1):
            raise ValueError("block_ratio must lie in (0, 1]")

    def rng(self) -> RngStream:
        return RngStream(self.seed, self.stream)

    def to_dict(self) -> dict:
        return {"M": self.M, "A": self.A, "T_trunc": self.T_trunc, "trunc_rel": self.trunc_rel,
                "block_ratio": self.block_ratio, "budget_cap": self.budget_cap,
                "seed": self.seed, "stream": self.stream}

    @classmethod
    def from_dict(cls, d: dict) -> "PathConfig":
        keys = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in keys})


@dataclass
class IncrementPanel:
    """Delta_{i,k}^n X for i = k..n with its error budget and provenance."""

    k: int
    n: int
    values: np.ndarray
    scales: np.ndarray | None = None
    budget: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.values) != self.n - self.k + 1:
            raise ValueError(f"panel length {len(self.values)} != n-k+1 = {self.n - self.k + 1}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("panel contains non-finite values")

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.k, self.n + 1)

    def manifest(self) -> dict:
        return {"k": self.k, "n": self.n, "budget": self.budget, **self.provenance}

    def to_csv(self, path) -> Path:
        """Write ``i,value`` rows plus a ``.json`` sidecar manifest."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "value"])
            for i, v in zip(self.index, self.values):
                w.writerow([int(i), repr(float(v))])
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))
        return side


def _cheb_nodes(count: int) -> np.ndarray:
    # Chebyshev points of the second kind on [0, 1]
    return 0.5 - 0.5 * np.cos(np.pi * np.arange(count) / (count - 1))


def _bary_matrix(nodes: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Barycentric interpolation matrix from ``nodes`` to ``t``."""
    c = len(nodes)
    w = (-1.0) ** np.arange(c)
    w[0] *= 0.5
    w[-1] *= 0.5
    diff = t[:, None] - nodes[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15)
    diff = np.where(exact, 1.0, diff)
    mat = w[None, :] / diff
    mat /= mat.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        mat[rows] = exact[rows].astype(float)
    return mat


class StableIncrementSimulator:
    """Precomputed kernel tables for repeated panels with one (driver, kernel, k, n)."""

    def __init__(self, driver: DriverSpec, spec: kn.KernelSpec, k: int, n: int,
                 config: PathConfig = PathConfig()):
        if driver.kind != "stable":
            raise ValueError("StableIncrementSimulator needs a stable driver")
        if n < k:
            raise ValueError("need n >= k")
        self.driver, self.spec, self.k, self.n, self.config = driver, spec, k, n, config
        beta, M = driver.beta, config.M
        self.delta = 1.0 / (n * M)
        self.past_obs = int(math.ceil(config.A * n))
        self.A = self.past_obs / n
        self.P = self.past_obs * M
        # u-cells m = 1..L cover u = i/n - s in (0, 1 + A]
        L = n * M + self.P
        u = self.delta * (np.arange(1, L + 1) - 0.5)
        self.K = np.concatenate([[0.0], kn.backward_diff(spec, u, 1.0 / n, k)])
        self.n_fine = L
        self.noise_scale = driver.rho_L * self.delta ** (1.0 / beta)
        self._fft_len = sfft.next_fast_len(2 * L + 1, real=True)
        self._K_fft = np.fft.rfft(self.K, self._fft_len)
        self.ref_scale = driver.rho_L * n ** (-(spec.alpha + 1.0 / beta)) * _hk_norm(spec.alpha, k, beta)
        self.T = self._choose_T()
        self._setup_blocks()
        self._setup_scales()
        self.budget = self._budget()
        cap = config.budget_cap
        if cap is not None and self.budget["total_rel"] > cap:
            raise BudgetError(
                f"error budget {self.budget['total_rel']:.3g} exceeds cap {cap:.3g}; "
                f"try M={self._suggest_M(cap)} and T_trunc>={self._suggest_T(cap):.3g}")

    # --- truncation -------------------------------------------------------
    def _tail_rel(self, T: float) -> float:
        return self.driver.rho_L * kn.tail_norm(self.spec, self.k, self.driver.beta, self.n, T) / self.ref_scale

    def _choose_T(self) -> float:
        cfg = self.config
        if cfg.T_trunc is not None:
            return max(float(cfg.T_trunc), self.A)
        T = self.A
        if self._tail_rel(T) <= cfg.trunc_rel:
            return T
        lo = T
        while self._tail_rel(T) > cfg.trunc_rel:
            lo = T
            T *= 8.0
            if T >= cfg.T_max:
                return cfg.T_max
        for _ in range(40):
            mid = math.sqrt(lo * T)
            if self._tail_rel(mid) > cfg.trunc_rel:
                lo = mid
            else:
                T = mid
            if T / lo < 1.01:
                break
        return T

    def _setup_blocks(self):
        edges = [self.A]
        while edges[-1] < self.T * (1 - 1e-12):
            edges.append(min(edges[-1] * (1.0 + self.config.block_ratio), self.T))
        e = np.array(edges)
        self.block_lo, self.block_hi = e[:-1], e[1:]
        self.block_width = e[1:] - e[:-1]
        self.block_mid = 0.5 * (e[:-1] + e[1:])
        nb = len(self.block_mid)
        self.tnodes = _cheb_nodes(CHEB_NODES)
        t_obs = np.arange(self.k, self.n + 1) / self.n
        self.interp = _bary_matrix(self.tnodes, t_obs)
        if nb:
            # W[c, b] = g_{i,n}(-mid_b) at i/n = tnodes[c]
            self.W = kn.backward_diff(self.spec, self.tnodes[:, None] + self.block_mid[None, :],
                                      1.0 / self.n, self.k)
            # interpolation check at two exact observation indices
            probe = np.array([self.k, (self.k + self.n) // 2])
            exact = kn.backward_diff(self.spec, probe[:, None] / self.n + self.block_mid[None, :],
                                     1.0 / self.n, self.k)
            approx = _bary_matrix(self.tnodes, probe / self.n) @ self.W
            self.interp_err = float(np.max(np.abs(exact - approx)) / max(np.max(np.abs(exact)), 1e-300))
        else:
            self.W = np.zeros((CHEB_NODES, 0))
            self.interp_err = 0.0
        self.block_scale = self.driver.rho_L * self.block_width ** (1.0 / self.driver.beta)

    def _setup_scales(self):
        beta = self.driver.beta
        cum = np.cumsum(np.abs(self.K) ** beta) * self.delta
        idx = np.arange(self.k, self.n + 1) * self.config.M + self.P
        fine = cum[idx]
        far_nodes = (np.abs(self.W) ** beta) @ self.block_width
        far = self.interp @ far_nodes
        self.scales = self.driver.rho_L * (fine + np.maximum(far, 0.0)) ** (1.0 / beta)

    def _budget(self) -> dict:
        beta, rho = self.driver.beta, self.driver.rho_L
        fine = _midpoint_error(self.spec, self.k, self.n, beta, self.delta, self.n_fine)
        if len(self.block_mid):
            d1 = kn.backward_diff(self.spec, 1.0 + self.block_mid, 1.0 / self.n, self.k, order=1)
            blocks = float(np.sum(np.abs(d1) ** beta * 2 * (self.block_width / 2) ** (beta + 1) / (beta + 1)))
        else:
            blocks = 0.0
        trunc = kn.tail_norm(self.spec, self.k, beta, self.n, self.T) ** beta
        scale = float(self.scales[-1])
        disc = rho * (fine + blocks) ** (1.0 / beta)
        tr = rho * trunc ** (1.0 / beta)
        total = (disc ** beta + tr ** beta) ** (1.0 / beta)
        return {
            "discretization_scale": disc,
            "truncation_scale": tr,
            "total_scale": total,
            "increment_scale": scale,
            "total_rel": total / scale,
            "interp_rel_err": self.interp_err,
            "M": self.config.M,
            "A": self.A,
            "T_trunc": self.T,
            "blocks": int(len(self.block_mid)),
        }

    def _suggest_M(self, cap: float) -> int:
        beta, a = self.driver.beta, self.spec.alpha
        ratio = self.budget["discretization_scale"] / max(self.budget["increment_scale"] * cap, 1e-300)
        return int(self.config.M * max(1.0, ratio) ** (beta / (a * beta + 1)) * 2)

    def _suggest_T(self, cap: float) -> float:
        return self.T * 10.0

    # --- sampling ---------------------------------------------------------
    def noise(self, stream: RngStream) -> tuple[np.ndarray, np.ndarray]:
        beta = self.driver.beta
        std = StableLaw(beta)
        xi = self.noise_scale * sample(std, self.n_fine, stream.generator(0))
        z = self.block_scale * sample(std, len(self.block_mid), stream.generator(1))
        return xi, z

    def values_from_noise(self, xi: np.ndarray, z: np.ndarray) -> np.ndarray:
        # xi[c] sits in u-cell m = L - c; Delta_i = sum_m K[m] xi[iM+P-m]
        conv = np.fft.irfft(self._K_fft * np.fft.rfft(xi, self._fft_len),
                            self._fft_len)
        idx = np.arange(self.k, self.n + 1) * self.config.M + self.P
        vals = conv[idx]
        if len(z):
            vals = vals + self.interp @ (self.W @ z)
        return vals

    def panel(self, stream: RngStream) -> IncrementPanel:
        xi, z = self.noise(stream)
        return IncrementPanel(self.k, self.n, self.values_from_noise(xi, z), self.scales.copy(),
                              dict(self.budget), self.provenance(stream))

    def provenance(self, stream: RngStream) -> dict:
        return {"driver": self.driver.to_dict(), "kernel": self.spec.to_dict(),
                "config": self.config.to_dict(), "stream": stream.to_dict()}


def _midpoint_error(spec, k, n, beta, delta, L) -> float:
    """sum over u-cells of int |w(u) - w(mid)|^beta du for the longest panel row."""
    u = delta * (np.arange(1, L + 1) - 0.5)
    d1 = kn.backward_diff(spec, u, 1.0 / n, k, order=1)
    smooth = np.abs(d1) ** beta * 2 * (delta / 2) ** (beta + 1) / (beta + 1)
    # cells next to the breakpoints u = j/n are not smooth: integrate exactly
    M = int(round(1.0 / (n * delta)))
    special = set()
    for j in range(k + 1):
        for c in range(4):
            m = j * M + c + 1
            if m <= L:
                special.add(m)
    total = float(np.sum(smooth))
    w = lambda x: float(kn.backward_diff(spec, x, 1.0 / n, k))
    for m in special:
        lo, hi = (m - 1) * delta, m * delta
        wm = w(0.5 * (lo + hi))
        val, _ = quad(lambda x: abs(w(x) - wm) ** beta, lo, hi, limit=100)
        total += val - smooth[m - 1]
    return total


_HK_NORM_CACHE: dict = {}


def _hk_norm(alpha: float, k: int, beta: float) -> float:
    key = (alpha, k, beta)
    if key not in _HK_NORM_CACHE:
        _HK_NORM_CACHE[key] = kn.rho0_compute(alpha, k, beta, 1.0, 1e-8)
    return _HK_NORM_CACHE[key]


# --- compound Poisson -----------------------------------------------------

@dataclass
class JumpPath:
    times: np.ndarray
    sizes: np.ndarray
    horizon: float

    def in_window(self, a: float, b: float) -> np.ndarray:
        return (self.times >= a) & (self.times <= b)


def cp_horizon(driver: DriverSpec, spec: kn.KernelSpec, k: int, n: int, rel: float = 1e-12) -> float:
    """Past horizon T such that the expected L^1 contribution of jumps before -T is tiny."""
    if spec.tail_decay is None:
        return 1.0 + 40.0 / spec.lam
    decay = k - spec.alpha + spec.tail_decay
    if decay <= 1.0:
        raise kn.IntegrabilityError(
            "kernel difference is not integrable against a compound Poisson driver; "
            "use a perturbed kernel with faster decay")
    # int_T^inf |g^(k)| du ~ C T^(1-decay) / (decay-1)
    return max(2.0, (rel * (decay - 1.0)) ** (1.0 / (1.0 - decay)))


def cp_path(driver: DriverSpec, T: float, stream: RngStream, end: float = 1.0) -> JumpPath:
    """Jumps on [-T, end], drawn unit interval by unit interval (prefix-stable)."""
    times, sizes = [], []
    for u in range(int(math.floor(-T)), int(math.ceil(end))):
        rng = stream.generator(2, u + 2**31)
        cnt = rng.poisson(driver.rate)
        t = np.sort(rng.uniform(u, u + 1, size=cnt))
        s = driver.jumps(cnt, rng)
        keep = (t >= -T) & (t <= end)
        times.append(t[keep])
        sizes.append(s[keep])
    return JumpPath(np.concatenate(times), np.concatenate(sizes), T)


def cp_increments(path: JumpPath, spec: kn.KernelSpec, k: int, n: int) -> np.ndarray:
    """Delta_i = sum_m g_{i,n}(T_m) dL_m, exact."""
    i = np.arange(k, n + 1)
    out = np.zeros(len(i))
    chunk = max(1, int(2e6 // max(len(path.times), 1)))
    for s in range(0, len(i), chunk):
        u = i[s:s + chunk, None] / n - path.times[None, :]
        out[s:s + chunk] = kn.backward_diff(spec, u, 1.0 / n, k) @ path.sizes
    return out


# --- public operations ----------------------------------------------------

def simulate_increments(driver: DriverSpec, spec: kn.KernelSpec, k: int, n: int,
                        config: PathConfig = PathConfig(), stream: RngStream | None = None,
                        jumps: JumpPath | None = None) -> IncrementPanel:
    """One panel of k-th order increments."""
    stream = stream or config.rng()
    if driver.kind == "stable":
        return StableIncrementSimulator(driver, spec, k, n, config).panel(stream)
    path = jumps if jumps is not None else cp_path(driver, cp_horizon(driver, spec, k, n), stream)
    vals = cp_increments(path, spec, k, n)
    budget = {"discretization_scale": 0.0, "truncation_horizon": path.horizon, "exact": True}
    prov = {"driver": driver.to_dict(), "kernel": spec.to_dict(), "config": config.to_dict(),
            "stream": stream.to_dict(), "jumps": int(len(path.times))}
    return IncrementPanel(k, n, vals, None, budget, prov)


def simulate_lfsm_increments(beta: float, rho_L: float, alpha: float, k: int, n: int,
                             config: PathConfig = PathConfig(),
                             stream: RngStream | None = None) -> IncrementPanel:
    """Increments of linear fractional stable motion (pure power kernel)."""
    panel = simulate_increments(DriverSpec.stable(beta, rho_L), kn.KernelSpec(alpha), k, n, config, stream)
    panel.provenance["H"] = alpha + 1.0 / beta
    return panel


def check_F_window(spec: kn.KernelSpec, k: int, driver: DriverSpec):
    if max(1.0, driver.bg_index) * (k - spec.alpha) >= 1.0:
        raise WindowError(
            f"F needs (1 v beta)(k - alpha) < 1; got {max(1.0, driver.bg_index) * (k - spec.alpha):.4g}")


def F_from_jumps(path: JumpPath, spec: kn.KernelSpec, k: int, u) -> np.ndarray:
    """F_u = sum_m g^(k)(u - T_m) dL_m for a jump path."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.zeros(len(u))
    chunk = max(1, int(2e6 // max(len(path.times), 1)))
    for s in range(0, len(u), chunk):
        out[s:s + chunk] = spec.g(u[s:s + chunk, None] - path.times[None, :], k) @ path.sizes
    return out


def simulate_F_path(driver: DriverSpec, spec: kn.KernelSpec, k: int, u_grid,
                    config: PathConfig = PathConfig(), stream: RngStream | None = None,
                    jumps: JumpPath | None = None, n: int | None = None) -> np.ndarray:
    """F_u = int g^(k)(u - s) dL_s on ``u_grid``.

    Compound Poisson: exact. Stable: midpoint sum over the same fine grid the
    panel simulator uses for resolution ``n`` (so passing the same stream
    couples F with the increments).
    """
    check_F_window(spec, k, driver)
    stream = stream or config.rng()
    u_grid = np.asarray(u_grid, dtype=float)
    if driver.kind == "cp":
        path = jumps if jumps is not None else cp_path(driver, cp_horizon(driver, spec, k, n or 1), stream)
        return F_from_jumps(path, spec, k, u_grid)
    if n is None:
        raise ValueError("stable F simulation needs the grid resolution n")
    sim = StableIncrementSimulator(driver, spec, k, n, config)
    xi, z = sim.noise(stream)
    # fine cells c have midpoints s_c = delta (c + 1/2) - A
    s_mid = sim.delta * (np.arange(sim.n_fine) + 0.5) - sim.A
    out = np.empty(len(u_grid))
    for j, u in enumerate(u_grid):
        out[j] = spec.g(u - s_mid, k) @ xi
        if len(z):
            out[j] += spec.g(u + sim.block_mid, k) @ z
    return out


def simulate_Ym_sequences(beta: float, rho_L: float, alpha: float, k: int, m_list, length: int,
                          M: int = 32, stream: RngStream | None = None) -> dict:
    """Y_r^{inf,m} = int_{r-m}^r h_k(r - s) dL_s for r = 0..length-1, one per m.

    All m share the same driver increments (common random numbers).
    """
    stream = stream or RngStream(0)
    m_list = sorted({int(m) for m in m_list})
    if m_list[0] < 1:
        raise ValueError("m must be >= 1")
    mmax = m_list[-1]
    q = np.arange(1, mmax * M + 1)
    H = kn.hk_eval(alpha, k, (q - 0.5) / M)
    nc = (length + mmax) * M
    xi = rho_L * M ** (-1.0 / beta) * sample(StableLaw(beta), nc, stream.generator(0))
    out = {}
    # Y_r = sum_q H[q] xi[(r + mmax) M - q]
    pos = (np.arange(length) + mmax) * M
    for m in m_list:
        conv = signal.fftconvolve(xi, np.concatenate([[0.0], H[: m * M]]))
        out[m] = conv[pos]
    return out


def simulate_Ym_sequence(beta: float, rho_L: float, alpha: float, k: int, m: int, length: int,
                         M: int = 32, stream: RngStream | None = None) -> np.ndarray:
    return simulate_Ym_sequences(beta, rho_L, alpha, k, [m], length, M, stream)[m]


def jump_series_remainder(alpha: float, k: int, p: float, L_max: int) -> float:
    """Bound on sum_{l > L_max} |h_k(l + U)|^p per unit jump size."""
    d = (k - alpha) * p
    if d <= 1.0:
        raise kn.IntegrabilityError(f"limit series not summable: (k-alpha)p = {d:.4g} <= 1")
    x = float(L_max)
    # |h_k(x)| <= C x^(alpha-k) on [L_max, inf) with C from the series head
    C = abs(kn.hk_eval(alpha, k, x)) * x ** (k - alpha) * (1.0 + 2.0 * k / x)
    return C ** p * x ** (1.0 - d) / (d - 1.0)


def sample_jump_series_limit(f, driver: DriverSpec, alpha: float, k: int, t: float = 1.0,
                             L_max: int = 2000, stream: RngStream | None = None,
                             count: int = 1) -> tuple[np.ndarray, float]:
    """Draws of sum_{T_m in [0,t]} sum_{l=0}^{L_max} f(dL_m h_k(l + U_m)).

    ``f`` is a FunctionalSpec. Returns (draws, remainder bound per draw per
    unit |dL|^p, to be scaled by the realised jumps).
    """
    from .functionals import f_eval

    if driver.kind != "cp":
        raise ValueError("the jump-series limit needs a compound Poisson driver")
    p = f.small_x_power()
    rem = jump_series_remainder(alpha, k, p, L_max)
    stream = stream or RngStream(0)
    l = np.arange(L_max + 1)
    out = np.zeros(count)
    for r in range(count):
        rng = stream.child(r).generator(3)
        cnt = rng.poisson(driver.rate * t)
        if cnt == 0:
            continue
        U = rng.uniform(size=cnt)
        J = driver.jumps(cnt, rng)
        h = kn.hk_eval(alpha, k, l[None, :] + U[:, None])
        out[r] = float(np.sum(f_eval(f, J[:, None] * h)))
    return out, rem
