import math

import numpy as np
import pytest
from scipy import stats

from levyvar import kernel as kn
from levyvar import stable as st
from levyvar.pathsim import (DriverSpec, IncrementPanel, JumpPath, PathConfig, StableIncrementSimulator,
                             WindowError, cp_horizon, cp_increments, cp_path, F_from_jumps,
                             sample_jump_series_limit, simulate_F_path, simulate_increments,
                             simulate_Ym_sequences)
from levyvar.rng import RngStream


@pytest.fixture(scope="module")
def sim():
    return StableIncrementSimulator(DriverSpec.stable(1.5), kn.KernelSpec(0.3), 2, 256, PathConfig())


def test_rng_streams_are_disjoint_and_stable():
    a = RngStream(1).child(2).generator(0).standard_normal(4)
    assert np.array_equal(a, RngStream(1).child(2).generator(0).standard_normal(4))
    assert not np.array_equal(a, RngStream(1).child(3).generator(0).standard_normal(4))
    assert not np.array_equal(a, RngStream(1, 1).child(2).generator(0).standard_normal(4))
    with pytest.raises(ValueError):
        RngStream(-1)


def test_scales_close_to_exact(sim):
    n, H = 256, 0.3 + 1 / 1.5
    rho0 = kn.rho0_compute(0.3, 2, 1.5)
    # the interior scale approaches rho_0 n^-H
    assert sim.scales[-1] * n ** H == pytest.approx(rho0, rel=0.03)
    assert sim.budget["total_rel"] < 0.05


def test_marginal_is_stable(sim):
    # one coordinate across independent panels, standardised by its exact scale
    vals = np.array([sim.panel(RngStream(2).child(r)).values[100] for r in range(300)])
    z = vals / sim.scales[100]
    assert stats.kstest(z, lambda x: st.cdf(1.5, x)).pvalue > 1e-3


def test_panel_reproducible(sim):
    a = sim.panel(RngStream(4).child(1)).values
    assert np.array_equal(a, sim.panel(RngStream(4).child(1)).values)
    assert not np.array_equal(a, sim.panel(RngStream(4).child(2)).values)


def test_panel_validation():
    with pytest.raises(ValueError):
        IncrementPanel(2, 10, np.zeros(5))
    with pytest.raises(ValueError):
        IncrementPanel(1, 3, np.array([0.0, np.nan, 1.0]))


def test_cp_increments_exact():
    spec = kn.KernelSpec(0.6, "exp", lam=1.0)
    path = JumpPath(np.array([-3.2, -0.41, 0.137, 0.52]), np.array([1.0, -2.0, 0.5, 1.5]), 5.0)
    n, k = 64, 2
    got = cp_increments(path, spec, k, n)
    for i in (k, 9, 40, n):
        ref = sum(dl * sum((-1) ** j * math.comb(k, j) * spec.g((i - j) / n - t) for j in range(k + 1))
                  for t, dl in zip(path.times, path.sizes))
        assert got[i - k] == pytest.approx(ref, rel=1e-9, abs=1e-14)


def test_cp_path_prefix_stable():
    drv = DriverSpec.compound_poisson(rate=2.0)
    a = cp_path(drv, 5.0, RngStream(8))
    b = cp_path(drv, 9.0, RngStream(8))
    keep = b.times >= -5.0
    assert np.array_equal(a.times, b.times[keep])
    with pytest.raises(kn.IntegrabilityError):
        cp_horizon(drv, kn.KernelSpec(0.5), 1, 100)


def test_F_path_cp_and_window():
    drv = DriverSpec.compound_poisson()
    spec = kn.KernelSpec(0.8, "exp", lam=1.0)
    path = JumpPath(np.array([-1.0, 0.25]), np.array([2.0, -1.0]), 3.0)
    u = np.array([0.1, 0.5])
    F = simulate_F_path(drv, spec, 1, u, jumps=path)
    ref = [2.0 * spec.g(x + 1.0, 1) - (spec.g(x - 0.25, 1) if x > 0.25 else 0.0) for x in u]
    assert np.allclose(F, ref)
    assert np.allclose(F_from_jumps(path, spec, 1, u), ref)
    with pytest.raises(WindowError):
        simulate_F_path(DriverSpec.stable(1.5), kn.KernelSpec(0.3), 1, u, n=64)


def test_increments_match_F_at_fine_scale():
    # n Delta X -> F for k = 1 away from jumps
    drv = DriverSpec.compound_poisson()
    spec = kn.KernelSpec(0.8, "exp", lam=1.0)
    path = JumpPath(np.array([-0.7]), np.array([1.0]), 3.0)
    n = 4096
    dx = simulate_increments(drv, spec, 1, n, jumps=path).values
    u = np.arange(1, n + 1) / n
    F = F_from_jumps(path, spec, 1, u)
    assert np.max(np.abs(n * dx - F)) < 1e-3


def test_Ym_scale():
    beta, alpha, k, m = 1.5, 0.25, 2, 4
    ys = simulate_Ym_sequences(beta, 1.0, alpha, k, [m], 40_000, M=16, stream=RngStream(1))[m]
    f = lambda s: abs(float(kn.hk_eval(alpha, k, s))) ** beta
    from scipy.integrate import quad
    scale = sum(quad(f, a, a + 1)[0] for a in range(m)) ** (1 / beta)
    th = np.array([0.3, 0.8, 1.5])
    emp = np.cos(np.outer(th, ys)).mean(axis=1)
    assert np.allclose(emp, np.exp(-(scale * th) ** beta), atol=0.02)


def test_jump_series_limit():
    drv = DriverSpec.compound_poisson(rate=3.0)
    from levyvar.functionals import Power
    draws, rem = sample_jump_series_limit(Power(1.5), drv, 0.5, 2, stream=RngStream(3), count=50)
    assert draws.shape == (50,) and np.all(draws >= 0) and 0 < rem < 1e-3
    again, _ = sample_jump_series_limit(Power(1.5), drv, 0.5, 2, stream=RngStream(3), count=20)
    assert np.array_equal(draws[:20], again)
    with pytest.raises(kn.IntegrabilityError):
        sample_jump_series_limit(Power(0.5), drv, 0.5, 2, count=2)
    with pytest.raises(ValueError):
        sample_jump_series_limit(Power(1.5), DriverSpec.stable(1.5), 0.5, 2)


def test_panel_csv_roundtrip(tmp_path, sim):
    p = sim.panel(RngStream(0))
    side = p.to_csv(tmp_path / "x.csv")
    vals = np.loadtxt(tmp_path / "x.csv", delimiter=",", skiprows=1, usecols=1)
    assert np.array_equal(vals, p.values)
    assert side.exists()
