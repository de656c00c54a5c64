import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs
from scipy import integrate

from levyvar import kernel as kn
from levyvar.quadrature import DivergentIntegralError, power_tail


def direct_hk(alpha, k, x):
    return sum((-1) ** j * math.comb(k, j) * max(x - j, 0.0) ** alpha for j in range(k + 1))


def test_k_alpha():
    assert kn.k_alpha(0.3, 1) == pytest.approx(0.3)
    assert kn.k_alpha(0.9, 2) == pytest.approx(0.9 * -0.1)
    assert kn.k_alpha(1.0, 2) == 0.0


@settings(max_examples=40, deadline=None)
@given(hs.floats(0.05, 2.9), hs.integers(1, 3), hs.floats(-50, 0))
def test_hk_zero_on_negatives(alpha, k, x):
    assert kn.hk_eval(alpha, k, x) == 0.0


@pytest.mark.parametrize("alpha,k", [(0.3, 1), (0.5, 2), (1.4, 2), (2.2, 3)])
def test_hk_matches_direct_sum(alpha, k):
    x = np.array([0.2, 0.9, 1.5, 2.7, 5.0, 12.0, 31.0])
    ref = np.array([direct_hk(alpha, k, v) for v in x])
    assert np.allclose(kn.hk_eval(alpha, k, x), ref, rtol=1e-10, atol=1e-13)


def test_polynomial_annihilation():
    # k-th differences kill polynomials of degree < k
    for k in (1, 2, 3):
        for deg in range(k):
            assert kn.dk_apply(lambda s: (s + 0.3) ** deg, k, 4.2) == pytest.approx(0.0, abs=1e-12)
    # integer alpha < k: h_k has compact support [0, k]
    assert kn.hk_eval(1.0, 2, np.array([2.5, 10.0, 1e4])) == pytest.approx(0.0, abs=1e-12)


def test_tail_slope():
    for alpha, k, lo, hi in ((0.3, 1, 10.0, 1e3), (0.3, 2, 100.0, 1e4)):
        x = np.geomspace(lo, hi, 30)
        slope = np.polyfit(np.log(x), np.log(np.abs(kn.hk_eval(alpha, k, x))), 1)[0]
        assert abs(slope - (alpha - k)) < 0.02


def test_far_series_agrees_with_direct():
    # series branch (x > 8 k h) against a direct sum evaluated where it is still accurate
    spec = kn.KernelSpec(0.6, "exp", lam=0.7)
    h, k = 0.01, 2
    x = np.array([0.17, 0.3, 1.0])
    direct = sum((-1) ** j * math.comb(k, j) * spec.g(x - j * h) for j in range(k + 1))
    assert np.allclose(kn.backward_diff(spec, x, h, k), direct, rtol=1e-8)


def test_kernel_derivatives_by_finite_difference():
    for spec in (kn.KernelSpec(0.7, "exp", lam=1.3), kn.KernelSpec(0.7, "power", lam=2.0)):
        t, e = 1.7, 1e-5
        fd = (spec.g(t + e) - spec.g(t - e)) / (2 * e)
        assert spec.g(t, 1) == pytest.approx(fd, rel=1e-7)


def test_hk_lbeta_norm_oracle():
    alpha, k, beta = 0.3, 2, 1.5
    res = kn.hk_lbeta_power(alpha, k, beta)
    f = lambda x: abs(direct_hk(alpha, k, x)) ** beta
    body, _ = integrate.quad(f, 0, 2000, points=[1, 2], limit=2000)
    # analytic tail of the leading term k_alpha x^(alpha-k)
    d = (k - alpha) * beta
    tail = abs(kn.k_alpha(alpha, k)) ** beta * 2000 ** (1 - d) / (d - 1)
    assert res.value == pytest.approx(body + tail, rel=1e-6)


def test_rho0_scaling_and_window():
    r1 = kn.rho0_compute(0.3, 2, 1.5)
    assert kn.rho0_compute(0.3, 2, 1.5, rho_L=2.5) == pytest.approx(2.5 * r1, rel=1e-12)
    with pytest.raises(kn.IntegrabilityError):
        kn.rho0_compute(1.4, 2, 1.5)


def test_c0_oracle():
    spec, k, beta = kn.KernelSpec(0.3), 1, 1.8
    f = lambda s: abs(max(1 - s, 0) ** 0.3 - max(-s, 0) ** 0.3) ** beta
    body, _ = integrate.quad(f, -1e4, 1, points=[-1, 0], limit=4000)
    d = (1 - 0.3) * beta
    tail = 0.3 ** beta * 1e4 ** (1 - d) / (d - 1)
    assert kn.c0_compute(spec, k, beta) == pytest.approx(body + tail, rel=1e-5)
    with pytest.raises(kn.IntegrabilityError):
        kn.c0_compute(kn.KernelSpec(0.6), 1, 1.8)


def test_phi_jn_limit():
    spec = kn.KernelSpec(0.4, "exp", lam=1.0)
    s = np.array([0.3, 1.2])
    lim = kn.phi_jn_eval(spec, 2, 3, math.inf, s)
    near = kn.phi_jn_eval(spec, 2, 3, 1e7, s)
    assert np.allclose(near, lim, rtol=1e-5)


def test_power_tail_and_divergence():
    v, _ = power_tail(lambda x: x ** -2.5, 2.0, 2.5)
    assert v == pytest.approx(2.0 ** -1.5 / 1.5, rel=1e-10)
    with pytest.raises(DivergentIntegralError):
        power_tail(lambda x: 1 / x, 1.0, 1.0)


def test_spec_roundtrip_and_diagnostics():
    spec = kn.KernelSpec(0.5, "power", lam=1.5)
    assert kn.KernelSpec.from_dict(spec.to_dict()) == spec
    d = kn.kernel_diagnostics(spec, 2)
    assert d["small_t_ok"]
    with pytest.raises(ValueError):
        kn.KernelSpec(-0.1)
