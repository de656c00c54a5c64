import json

import numpy as np
import pytest

from levyvar.harness import ExperimentConfig, hill, rate_regression, rerun_from_manifest, run_experiment

from levyvar.harness.presets import PRESETS, preset
from levyvar.harness.stats import ks_one_sample, p_band, spread_regression, tail_mass_ratio
from levyvar.limitlaws import NoTheoremError


def test_hill_on_pareto():
    rng = np.random.default_rng(0)
    x = rng.pareto(1.5, 200_000) + 1.0
    x = np.concatenate([x, -(rng.pareto(1.5, 200_000) + 1.0)])
    h = hill(x, fraction=0.01)
    assert h["right"] == pytest.approx(1.5, rel=0.05)
    assert h["left"] == pytest.approx(1.5, rel=0.05)
    assert hill(np.array([1.0, 2.0]))["right"] is None


def test_tail_mass_sign():
    rng = np.random.default_rng(1)
    x = -(rng.pareto(1.2, 5000))
    assert tail_mass_ratio(x)["sign"] == -1


def test_rate_regression_exact_line():
    ns = np.array([2.0 ** j for j in range(5, 10)])
    reg = rate_regression(ns, 3.0 * ns ** -0.5, B=200)
    assert reg.slope == pytest.approx(-0.5, abs=1e-12)
    assert reg.ci[0] <= -0.5 <= reg.ci[1]
    groups = [np.random.default_rng(i).standard_normal(400) * n ** -0.5 for i, n in enumerate(ns)]
    assert abs(spread_regression(ns, groups, B=200).slope + 0.5) < 0.1


def test_ks_and_bands():
    from scipy import stats

    x = np.random.default_rng(2).standard_normal(500)
    assert ks_one_sample(x, stats.norm.cdf)["p_value"] > 0.01
    assert p_band(0.2) == ">=0.05" and p_band(1e-5) == "<0.001"


def test_config_validation():
    bad = preset("lln2").to_dict()
    bad["kind"] = "STABLE_RANK1"
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(bad).validate()
    crit = preset("rank2").to_dict()
    crit["kernel"]["alpha"] = 2 - 2 / 1.5
    with pytest.raises(NoTheoremError):
        ExperimentConfig.from_dict(crit).validate()
    lln3 = preset("lln3").to_dict()
    lln3["driver"] = {"kind": "stable", "beta": 1.5, "rho_L": 1.0}
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(lln3).validate()
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({**preset("lln2").to_dict(), "kind": "NOPE"})


def test_presets_validate():
    for key in PRESETS:
        preset(key).validate()


def test_config_json_roundtrip(tmp_path):
    cfg = preset("clt", R=7)
    p = tmp_path / "c.json"
    p.write_text(cfg.to_json())
    assert ExperimentConfig.from_json(p) == cfg


@pytest.fixture(scope="module")
def small_lln2():
    return preset("lln2", R=6, n=[512])


def test_csv_bitwise_and_manifest_rerun(tmp_path, small_lln2):
    rec = run_experiment(small_lln2)
    rec.write(tmp_path / "a")
    again = rerun_from_manifest(json.loads(json.dumps(rec.manifest)))
    again.write(tmp_path / "b")
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert s["manifest"]["tolerances_are_empirical"] is True and "results_sha256" in s


def test_prefix_reps_identical(small_lln2):
    full = run_experiment(small_lln2)
    part = run_experiment(small_lln2, reps=range(2, 4))
    assert part.rows == [r for r in full.rows if 2 <= r[2] < 4]


def test_threads_parity(small_lln2):
    assert run_experiment(small_lln2, threads=2).rows == run_experiment(small_lln2).rows


def test_seed_changes_rows(small_lln2):
    other = ExperimentConfig.from_dict({**small_lln2.to_dict(), "seed": 99})
    assert run_experiment(other).rows != run_experiment(small_lln2).rows


def test_rate_deterministic_small():
    rec = run_experiment(preset("rate_det", n=[256, 512, 1024, 2048]))
    assert rec.verdict == "PASS"
    assert abs(rec.summary["regression"]["slope"] + 1) < 0.15
