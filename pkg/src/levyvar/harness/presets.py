"""Named experiment configurations (the acceptance matrix plus a few demos)."""
from __future__ import annotations

import copy

from .experiments import ExperimentConfig

_STABLE = lambda beta: {"kind": "stable", "beta": beta, "rho_L": 1.0}
_CP = {"kind": "cp", "rate": 3.0, "jump_law": "laplace"}
_CP_PM1 = {"kind": "cp", "rate": 3.0, "jump_law": "pm1"}

PRESETS = {
    "lln2": dict(kind="LLN_II", driver=_STABLE(1.5), kernel={"family": "pure", "alpha": 0.3}, k=2,
                 f={"family": "cos", "u": 1.0}, n=[2 ** 14], R=1, seed=11),
    "lln3": dict(kind="LLN_III_COUPLED", driver=_CP_PM1, kernel={"family": "exp", "alpha": 0.8, "lam": 1.0},
                 k=1, f={"family": "power", "p": 2.0}, n=[2 ** 12], R=1, seed=12),
    "lln1": dict(kind="LLN_I_DIST", driver=_CP, kernel={"family": "exp", "alpha": 0.5, "lam": 1.0},
                 k=2, f={"family": "power", "p": 1.5}, n=[2 ** 10], R=400, seed=13),
    "clt": dict(kind="CLT", driver=_STABLE(1.5), kernel={"family": "pure", "alpha": 0.25}, k=2,
                f={"family": "cos", "u": 1.0}, n=[2 ** 12], R=500, seed=14,
                eta={"schedule": [2, 4, 8, 16, 32], "R": 200_000}),
    "rank1": dict(kind="STABLE_RANK1", driver=_STABLE(1.8), kernel={"family": "pure", "alpha": 0.3}, k=1,
                  f={"family": "sin", "u": 1.0}, n=[2 ** 13], R=400, seed=15),
    "rank2": dict(kind="STABLE_RANK2", driver=_STABLE(1.5), kernel={"family": "pure", "alpha": 1.0}, k=2,
                  f={"family": "cos", "u": 1.0}, n=[2 ** 13], R=400, seed=16),
    # non-degenerate variant of rank2 (k_alpha != 0)
    "rank2_alpha09": dict(kind="STABLE_RANK2", driver=_STABLE(1.5), kernel={"family": "pure", "alpha": 0.9},
                          k=2, f={"family": "cos", "u": 1.0}, n=[2 ** 13], R=400, seed=16,
                          tolerances={"hill_lo": 1.35, "hill_hi": 1.95}),
    "rate_det": dict(kind="RATE", driver=_STABLE(1.5), kernel={"family": "pure", "alpha": 0.25}, k=2,
                     f={"family": "power", "p": 1.0}, n=[2 ** j for j in range(9, 14)], R=1, seed=17,
                     tolerances={"slope_tol": 0.15}, options={"source": "deterministic", "path": "linear"}),
    "rate_clt": dict(kind="RATE", driver=_STABLE(1.5), kernel={"family": "pure", "alpha": 0.25}, k=2,
                     f={"family": "cos", "u": 1.0}, n=[2 ** j for j in range(9, 14)], R=200, seed=18,
                     options={"source": "clt"}),
}


def preset(key: str, **overrides) -> ExperimentConfig:
    if key not in PRESETS:
        raise KeyError(f"unknown preset {key!r}; known: {sorted(PRESETS)}")
    d = copy.deepcopy(PRESETS[key])
    d.update(overrides)
    d.setdefault("name", key)
    return ExperimentConfig.from_dict(d)
