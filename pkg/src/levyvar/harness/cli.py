"""Command line interface: ``levyvar <subcommand> ...``.

Exit codes: 0 PASS (or success), 2 FAIL, 3 UNDETERMINED, 1 usage/input errors.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import os
import sys
import warnings

import numpy as np

from .. import kernel as kn
from ..functionals import FunctionalSpec, classify_regime, vstat
from ..limitlaws import (C_CONVENTIONS, NoTheoremError, estimate_eta, params_json, predict_limit,
                         sigma_compute, stable_limit_params)
from ..pathsim import DriverSpec, IncrementPanel, PathConfig, simulate_increments
from ..rng import RngStream
from .experiments import EXIT_CODES, UNDETERMINED, ExperimentConfig, run_experiment
from .presets import PRESETS, preset

log = logging.getLogger("levyvar")
VERDICTS = ("PASS", "UNDETERMINED", "FAIL")
SEVERITY = {v: i for i, v in enumerate(VERDICTS)}


def parse_functional(text: str) -> FunctionalSpec:
    """'cos:1', 'power:0.5', 'log', 'custom:constant' ..."""
    fam, _, arg = text.partition(":")
    fam = fam.strip().lower()
    if fam in ("cos", "sin", "indicator"):
        return FunctionalSpec(fam, u=float(arg or (0.0 if fam == "indicator" else 1.0)))
    if fam in ("power", "negpower"):
        return FunctionalSpec(fam, p=float(arg))
    if fam == "log":
        return FunctionalSpec("log")
    if fam == "custom":
        return FunctionalSpec.from_dict({"family": "custom", "name": arg})
    raise argparse.ArgumentTypeError(f"cannot parse functional {text!r}")


def _model_args(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, default=1.5, help="stable index (ignored for cp)")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--rho-L", type=float, default=1.0)
    p.add_argument("--driver", choices=("stable", "cp"), default="stable")
    p.add_argument("--family", choices=kn.FAMILIES, default="pure", help="kernel family")
    p.add_argument("--lam", type=float, default=1.0)


def _driver(a) -> DriverSpec:
    return DriverSpec.stable(a.beta, a.rho_L) if a.driver == "stable" else DriverSpec.compound_poisson()


def _kernel(a) -> kn.KernelSpec:
    return kn.KernelSpec(a.alpha, a.family, lam=a.lam) if a.family != "pure" else kn.KernelSpec(a.alpha)


def _dump(obj):
    print(json.dumps(obj, indent=2, default=lambda o: o.item() if hasattr(o, "item") else str(o)))


def cmd_simulate(a) -> int:
    cfg = PathConfig(M=a.M)
    panel = simulate_increments(_driver(a), _kernel(a), a.k, a.n, cfg, RngStream(a.seed))
    os.makedirs(a.out_dir, exist_ok=True)
    path = os.path.join(a.out_dir, "increments.csv")
    panel.to_csv(path)
    _dump({"increments": path, "budget": panel.budget})
    return 0


def _read_panel(path: str) -> IncrementPanel:
    with open(os.path.splitext(path)[0] + ".json") as fh:
        meta = json.load(fh)
    vals = np.loadtxt(path, delimiter=",", skiprows=1, usecols=1, ndmin=1)
    prov = {key: v for key, v in meta.items() if key not in ("k", "n", "budget")}
    return IncrementPanel(int(meta["k"]), int(meta["n"]), vals, None, meta.get("budget", {}), prov)


def cmd_vstat(a) -> int:
    panel = _read_panel(a.input)
    f = parse_functional(a.f)
    _dump({"V": vstat(panel, f, a.a, a.b), "f": f.to_dict(), "a": a.a, "b": a.b, "n": panel.n})
    return 0


def cmd_regime(a) -> int:
    f = parse_functional(a.f)
    beta = a.beta if a.driver == "stable" else 0.0
    print(classify_regime(a.alpha, beta, a.k, f, driver=a.driver).to_json())
    return 0


def cmd_limit_params(a) -> int:
    f = parse_functional(a.f)
    report = classify_regime(a.alpha, a.beta, a.k, f)
    try:
        if report.weak == "STABLE_RANK2":
            p = stable_limit_params(f, a.alpha, a.beta, a.k, a.rho_L, a.tol, a.c_convention)
            print(params_json(f, a.alpha, a.beta, a.k, a.rho_L, a.tol, a.c_convention, p))
        elif report.weak == "STABLE_RANK1":
            s = sigma_compute(f, kn.KernelSpec(a.alpha), a.k, a.beta, a.rho_L, a.tol)
            print(params_json(f, a.alpha, a.beta, a.k, a.rho_L, a.tol, a.c_convention,
                              {"sigma": s, "index": a.beta}))
        elif report.weak == "CLT":
            e = estimate_eta(f, a.alpha, a.beta, a.rho_L, a.k, R=a.eta_length, stream=RngStream(a.seed))
            print(params_json(f, a.alpha, a.beta, a.k, a.rho_L, a.tol, a.c_convention, e.to_dict()))
            return 0 if e.converged else EXIT_CODES[UNDETERMINED]
        else:
            predict_limit(report, f)
    except NoTheoremError as exc:
        print(f"no theorem: {exc}", file=sys.stderr)
        return EXIT_CODES[UNDETERMINED]
    return 0


def _load_config(a) -> ExperimentConfig:
    if a.config:
        cfg = ExperimentConfig.from_json(a.config)
    elif a.preset:
        cfg = preset(a.preset)
    else:
        raise SystemExit("experiment needs --config or --preset")
    d = cfg.to_dict()
    if a.seed is not None:
        d["seed"] = a.seed
    if a.c_convention:
        d["c_convention"] = a.c_convention
    if a.R is not None:
        d["R"] = a.R
    return ExperimentConfig.from_dict(d)


def cmd_experiment(a) -> int:
    cfg = _load_config(a)
    try:
        rec = run_experiment(cfg, threads=a.threads)
    except NoTheoremError as exc:
        print(f"no theorem: {exc}", file=sys.stderr)
        return EXIT_CODES[UNDETERMINED]
    out = a.out_dir or os.path.join("runs", cfg.name)
    paths = rec.write(out)
    print(f"{cfg.name}: {rec.verdict}  ({paths['results']})")
    return rec.exit_code


def cmd_report(a) -> int:
    """Aggregate results.csv files under --out-dir into plot-ready CSV tables."""
    summaries = sorted(glob.glob(os.path.join(a.out_dir, "**", "summary.json"), recursive=True))
    if not summaries:
        print(f"no summary.json under {a.out_dir}", file=sys.stderr)
        return 1
    worst = 0
    table = os.path.join(a.out_dir, "report.csv")
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "series", "n", "count", "mean", "sd", "q05", "q50", "q95", "verdict"])
        for sp in summaries:
            with open(sp) as sfh:
                s = json.load(sfh)
            worst = max(worst, SEVERITY[s["verdict"]])
            groups: dict = {}
            with open(os.path.join(os.path.dirname(sp), "results.csv")) as rfh:
                for row in csv.DictReader(rfh):
                    groups.setdefault((row["experiment"], int(row["n"])), []).append(float(row["value"]))
            for (series, n), vals in sorted(groups.items()):
                v = np.asarray(vals)
                q = np.quantile(v, [0.05, 0.5, 0.95])
                sd = float(v.std(ddof=1)) if len(v) > 1 else 0.0
                w.writerow([s["experiment"], series, n, len(v), repr(float(v.mean())), repr(sd),
                            *[repr(float(x)) for x in q], s["verdict"]])
            # empirical CDF, ready to plot
            ecdf = os.path.join(os.path.dirname(sp), "ecdf.csv")
            with open(ecdf, "w", newline="") as efh:
                ew = csv.writer(efh, lineterminator="\n")
                ew.writerow(["series", "n", "x", "F"])
                for (series, n), vals in sorted(groups.items()):
                    v = np.sort(vals)
                    for i, x in enumerate(v):
                        ew.writerow([series, n, repr(float(x)), repr((i + 1) / len(v))])
            print(f"{s['experiment']}: {s['verdict']}")
    print(f"report table: {table}")
    return EXIT_CODES[VERDICTS[worst]]


def _common(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(None))
    p.add_argument("--out-dir", default=d(None))
    p.add_argument("--threads", type=int, default=d(1))
    p.add_argument("--c-convention", choices=C_CONVENTIONS, default=d(None))
    p.add_argument("--config", default=d(None), help="experiment config (JSON)")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levyvar", description=__doc__.splitlines()[0])
    _common(p, False)
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(*args, **kw):
        sp = _add(*args, **kw)
        _common(sp, True)
        return sp
    sub.add_parser = add_parser

    s = sub.add_parser("simulate", help="simulate one panel of k-th order increments")
    _model_args(s)
    s.add_argument("--n", type=int, default=1024)
    s.add_argument("--M", type=int, default=32)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("vstat", help="V(f;k)^n of a saved panel")
    s.add_argument("--input", required=True)
    s.add_argument("--f", required=True)
    s.add_argument("--a", type=float, required=True)
    s.add_argument("--b", type=float, required=True)
    s.set_defaults(func=cmd_vstat)

    s = sub.add_parser("regime", help="classify the limit regime")
    _model_args(s)
    s.add_argument("--f", required=True)
    s.set_defaults(func=cmd_regime)

    s = sub.add_parser("limit-params", help="parameters of the predicted weak limit")
    _model_args(s)
    s.add_argument("--f", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--eta-length", type=int, default=200_000)
    s.set_defaults(func=cmd_limit_params)

    s = sub.add_parser("experiment", help="run an experiment and write results.csv / summary.json")
    s.add_argument("--preset", choices=sorted(PRESETS), default=None)
    s.add_argument("--R", type=int, default=None)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("report", help="aggregate experiment outputs into plot-ready CSV")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING)
    if a.seed is None:
        a.seed = None if a.command == "experiment" else 0
    if a.out_dir is None and a.command in ("simulate", "report"):
        a.out_dir = "." if a.command == "report" else "out"
    if a.c_convention is None and a.command == "limit-params":
        a.c_convention = "boxed"
    if not a.verbose:
        warnings.simplefilter("ignore")
    try:
        return a.func(a)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
