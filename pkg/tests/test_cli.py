import json
import subprocess
import sys

import pytest

from levyvar.harness.cli import main, parse_functional
from levyvar.functionals import Cos, Power


def test_parse_functional():
    assert parse_functional("cos:2") == Cos(2.0)
    assert parse_functional("power:0.5") == Power(0.5)
    with pytest.raises(Exception):
        parse_functional("nope")


def test_regime(capsys):
    assert main(["regime", "--alpha", "0.3", "--beta", "1.5", "--k", "2", "--f", "cos:1"]) == 0
    assert json.loads(capsys.readouterr().out)["weak"] == "CLT"


def test_limit_params_rank2_and_critical(capsys):
    assert main(["limit-params", "--alpha", "0.9", "--k", "2", "--f", "cos:1",
                 "--c-convention", "exponent-beta"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["params"]["eta1"] == -1.0 and d["key"]["c_convention"] == "exponent-beta"
    assert main(["limit-params", "--alpha", str(2 - 2 / 1.5), "--k", "2", "--f", "cos:1"]) == 3


def test_simulate_and_vstat(tmp_path, capsys):
    assert main(["simulate", "--alpha", "0.3", "--k", "2", "--n", "128", "--out-dir", str(tmp_path),
                 "--seed", "4"]) == 0
    capsys.readouterr()
    assert main(["vstat", "--input", str(tmp_path / "increments.csv"), "--f", "cos:1",
                 "--a", "1", "--b", str(0.3 + 1 / 1.5)]) == 0
    v = json.loads(capsys.readouterr().out)["V"]
    assert 0 < v < 1


def test_experiment_and_report(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    from levyvar.harness.presets import preset

    cfg.write_text(preset("lln2", R=4, n=[256]).to_json())
    out = tmp_path / "runs" / "lln2"
    assert main(["experiment", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert (out / "results.csv").exists() and (out / "summary.json").exists()
    assert main(["report", "--out-dir", str(tmp_path / "runs")]) == 0
    assert (tmp_path / "runs" / "report.csv").read_text().startswith("experiment,series,n")
    assert (out / "ecdf.csv").exists()


def test_console_module():
    r = subprocess.run([sys.executable, "-m", "levyvar", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "experiment" in r.stdout
