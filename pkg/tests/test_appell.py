import math

import numpy as np
import pytest
from scipy import integrate

from levyvar.appell import (PhiEvaluator, appell_rank, check_assumption_B, expected_f_rho, j_integral,
                            phi_deriv, phi_eval)
from levyvar.functionals import Cos, Custom, Indicator, Log, NegPower, Power, Sin
from levyvar import stable as st

POINTS = [(0.7, 0.3), (1.5, -2.0)]


@pytest.mark.parametrize("f", [Sin(1.0), Cos(1.3), Indicator(0.4)])
def test_closed_forms_vs_quadrature(f):
    ec = PhiEvaluator(f, 1.5)
    eq = PhiEvaluator(f, 1.5, method="quadrature")
    for rho, x in POINTS:
        assert phi_eval(ec, rho, x) == pytest.approx(phi_eval(eq, rho, x), abs=1e-6)


@pytest.mark.parametrize("f", [Power(0.5), Log(), NegPower(0.3)])
def test_fourier_forms_vs_quadrature(f):
    ec = PhiEvaluator(f, 1.2)
    eq = PhiEvaluator(f, 1.2, method="quadrature")
    rho, x = 0.9, 0.6
    assert phi_eval(ec, rho, x) == pytest.approx(phi_eval(eq, rho, x), abs=1e-6)
    assert expected_f_rho(ec, rho) == pytest.approx(expected_f_rho(eq, rho), abs=1e-6)


def test_sin_cos_closed_values():
    ev = PhiEvaluator(Sin(2.0), 1.5)
    assert phi_eval(ev, 0.8, 0.3) == pytest.approx(math.sin(0.6) * math.exp(-(1.6) ** 1.5))
    ev = PhiEvaluator(Cos(1.0), 1.5)
    assert phi_eval(ev, 0.8, 0.0) == 0.0
    assert expected_f_rho(ev, 0.8) == pytest.approx(math.exp(-0.8 ** 1.5))


def test_j_integral_vs_direct():
    for q in (0.5, 0.0, -0.3, 1.4):
        for z in (0.3, 1.0, 7.0):
            ref, _ = integrate.quad(lambda t: (1 - math.cos(t * z)) * math.exp(-t ** 1.5) * t ** (-1 - q),
                                    0, 60, limit=500, epsabs=1e-13)
            assert j_integral(q, 1.5, z) == pytest.approx(ref, rel=1e-8, abs=1e-12)
    # large-argument asymptote for q > 0: C_q J_q(z) ~ z^q
    cq = 0.5 / (math.gamma(0.5) * math.cos(math.pi / 4))
    assert cq * j_integral(0.5, 1.5, 1e12) / 1e6 == pytest.approx(1.0, rel=1e-5)


def test_power_phi_growth():
    ev = PhiEvaluator(Power(1.0), 1.5)
    # E|x + S| - x = 2 E(-x - S)_+ ~ 2 C x^(1 - beta) / (beta - 1), C the tail constant
    x, beta = 1e4, 1.5
    c = math.gamma(beta) * math.sin(math.pi * beta / 2) / math.pi
    ref = x + 2 * c * x ** (1 - beta) / (beta - 1) - st.sym_abs_moment(beta, 1.0)
    assert phi_eval(ev, 1.0, x) == pytest.approx(ref, abs=2e-4)


@pytest.mark.parametrize("f", [Sin(1.0), Cos(1.0), Indicator(0.2)])
def test_closed_derivatives_vs_richardson(f):
    ev = PhiEvaluator(f, 1.5)
    for jx, jr in ((1, 0), (0, 1)):
        a = phi_deriv(ev, 0.8, 0.4, jx, jr)
        b = phi_deriv(ev, 0.8, 0.4, jx, jr, prefer_closed=False)
        assert a.value == pytest.approx(b.value, abs=1e-7)


def test_indicator_derivative_is_minus_density():
    ev = PhiEvaluator(Indicator(0.0), 1.5)
    d = phi_deriv(ev, 2.0, 0.0)
    assert d.value == pytest.approx(-float(st.density(1.5, 0.0)) / 2.0)


def test_appell_ranks():
    assert appell_rank(PhiEvaluator(Sin(1.0), 1.5)).verdict == "RANK1"
    assert appell_rank(PhiEvaluator(Indicator(0.0), 1.5)).verdict == "RANK1"
    r = appell_rank(PhiEvaluator(Cos(1.0), 1.5))
    assert r.verdict == "RANK_GE2" and all(abs(v) < 1e-12 for v in r.d1)
    assert appell_rank(PhiEvaluator(Power(0.5), 1.5)).verdict == "RANK_GE2"


def test_appell_rank_custom_numeric():
    odd = Custom(np.tanh, "tanh", bounded=True)
    r = appell_rank(PhiEvaluator(odd, 1.5), rho_set=[0.5, 2.0])
    assert r.verdict == "RANK1"
    even = Custom(lambda x: np.exp(-np.asarray(x) ** 2), "gauss", bounded=True)
    assert appell_rank(PhiEvaluator(even, 1.5), rho_set=[1.0]).verdict == "RANK_GE2"


def test_report_json():
    import json

    d = json.loads(appell_rank(PhiEvaluator(Sin(1.0), 1.5), rho_set=[1.0]).to_json())
    assert d["verdict"] == "RANK1"


def test_moment_guard():
    with pytest.raises(ValueError):
        PhiEvaluator(Power(1.6), 1.5)


def test_assumption_B():
    assert check_assumption_B(PhiEvaluator(Power(0.5), 1.5), p_candidate=0.5)["passed"]
    assert check_assumption_B(PhiEvaluator(Cos(1.0), 1.5), p_candidate=0.5)["passed"]
    res = check_assumption_B(PhiEvaluator(Power(1.2), 1.5), p_candidate=0.5)
    assert not res["passed"] and res["fitted_growth"] == pytest.approx(1.2, abs=0.05)
