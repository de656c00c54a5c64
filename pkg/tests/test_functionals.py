import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs

from levyvar.functionals import (Cos, Custom, FunctionalSpec, Indicator, Log, NearZeroWarning, NegPower,
                                 Power, Sin, classify_regime, deterministic_variation, f_eval, vstat,
                                 vstat_process)
from levyvar.pathsim import IncrementPanel


def panel(vals, k=1):
    vals = np.asarray(vals, dtype=float)
    return IncrementPanel(k, len(vals) + k - 1, vals)


def test_f_eval_conventions():
    x = np.array([-2.0, 0.0, 3.0])
    assert np.allclose(f_eval(NegPower(0.5), x), [2 ** -0.5, 0.0, 3 ** -0.5])
    assert np.allclose(f_eval(Log(), x), [math.log(2), 0.0, math.log(3)])
    assert np.allclose(f_eval(Indicator(0.0), x), [1.0, 1.0, 0.0])
    assert f_eval(Power(1.5), -4.0) == pytest.approx(8.0)


def test_vstat_constant_and_linearity():
    p = panel(np.linspace(-1, 1, 50))
    const = Custom(lambda x: np.full_like(np.asarray(x, dtype=float), 2.0), "two", bounded=True)
    assert vstat(p, const, 1.0, 0.5) == pytest.approx(2.0)
    # a = 0: plain sum
    assert vstat(p, Power(2.0), 0.0, 0.0) == pytest.approx(float(np.sum(np.linspace(-1, 1, 50) ** 2)))


def test_vstat_process_endpoint():
    rng = np.random.default_rng(0)
    p = panel(rng.standard_normal(127), k=2)
    t = np.array([0.25, 0.5, 1.0])
    proc = vstat_process(p, Cos(1.0), 1.0, 0.7, t)
    assert proc[-1] == vstat(p, Cos(1.0), 1.0, 0.7)
    with pytest.raises(ValueError):
        vstat_process(p, Cos(1.0), 1.0, 0.7, [0.0])


def test_near_zero_warning():
    with pytest.warns(NearZeroWarning):
        vstat(panel([0.0, 1.0, 2.0]), Log(), 1.0, 1.0)


def test_classifier_examples():
    r = classify_regime(0.3, 1.5, 2, Cos(1.0))
    assert "II" in r.applicable and r.weak == "CLT" and r.rate_exponent == 0.5
    assert r.case("II").b_exp == pytest.approx(0.3 + 1 / 1.5)
    r = classify_regime(0.3, 1.8, 1, Sin(1.0))
    assert r.weak == "STABLE_RANK1" and r.rate_exponent == pytest.approx(1 - 0.3 - 1 / 1.8)
    r = classify_regime(1.0, 1.5, 2, Cos(1.0))
    assert r.weak == "STABLE_RANK2" and r.rate_exponent == pytest.approx(1 - 1 / 1.5)
    r = classify_regime(2 - 2 / 1.5, 1.5, 2, Cos(1.0))
    assert r.weak == "CRITICAL" and r.critical
    r = classify_regime(0.8, 0.0, 1, Power(2.0), driver="cp")
    assert "III" in r.applicable and "II" not in r.applicable
    r = classify_regime(0.5, 0.0, 2, Power(1.5), driver="cp")
    assert "I" in r.applicable


def test_classifier_rejects_rank1_even():
    class Fake:
        verdict = "RANK1"

    with pytest.raises(ValueError):
        classify_regime(1.0, 1.5, 2, Cos(1.0), appell_report=Fake())


def test_regime_json_roundtrip():
    import json

    d = json.loads(classify_regime(0.3, 1.5, 2, Power(0.5)).to_json())
    assert d["weak"] == "CLT" and d["k"] == 2


def test_deterministic_variation_rate():
    # xi'' = t on [0, 1]; error of V for f = |x| decays like 1/n
    errs = []
    ns = [2 ** j for j in range(8, 13)]
    for n in ns:
        stat, lim = deterministic_variation(lambda t: np.asarray(t), 2, Power(1.0), n)
        assert lim == pytest.approx(0.5)
        errs.append(abs(stat - lim))
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert abs(slope + 1) < 0.15


def test_deterministic_variation_sin():
    stat, lim = deterministic_variation(lambda t: 2 * np.pi * np.cos(2 * np.pi * np.asarray(t)), 1,
                                        Power(2.0), 1024)
    assert lim == pytest.approx(2 * np.pi ** 2)
    assert abs(stat - lim) < 10 / 1024


def test_spec_validation_and_roundtrip():
    with pytest.raises(ValueError):
        NegPower(1.2)
    with pytest.raises(ValueError):
        FunctionalSpec("cos")
    for f in (Power(0.5), Cos(2.0), Indicator(0.1), Log()):
        assert FunctionalSpec.from_dict(f.to_dict()) == f
    c = FunctionalSpec.from_dict({"family": "custom", "name": "constant",
                                  "attrs": {"bounded": True, "params": {"c": 3.0}}})
    assert f_eval(c, 5.0) == 3.0


def test_custom_probe_catches_wrong_evenness():
    with pytest.raises(ValueError):
        Custom(lambda x: np.asarray(x) ** 3, "cube", even=True)


@settings(max_examples=25, deadline=None)
@given(hs.floats(0.05, 3.0), hs.floats(0.2, 1.95), hs.integers(1, 3))
def test_classifier_total(alpha, beta, k):
    r = classify_regime(alpha, beta, k, Cos(1.0))
    assert r.weak in ("CLT", "STABLE_RANK1", "STABLE_RANK2", "CRITICAL", "NONE")
    if r.weak == "CLT":
        assert alpha < k - 2 / beta
