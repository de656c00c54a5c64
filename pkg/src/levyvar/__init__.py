"""Power variations of Levy-driven moving averages: simulation, limit laws and experiments."""
from .appell import PhiEvaluator, appell_rank, check_assumption_B, expected_f_rho, phi_deriv, phi_eval
from .functionals import (Cos, Custom, FunctionalSpec, Indicator, Log, NegPower, Power, Sin,
                          classify_regime, deterministic_variation, vstat, vstat_process)
from .kernel import KernelSpec, c0_compute, hk_eval, rho0_compute
from .limitlaws import (LimitLaw, estimate_eta, eta_m_estimate, kappa_compute, predict_limit,
                        sigma_compute, stable_limit_params)
from .pathsim import (DriverSpec, PathConfig, simulate_F_path, simulate_increments,
                      simulate_lfsm_increments, simulate_Ym_sequence)
from .rng import RngStream
from .stable import StableLaw

__version__ = "0.1.0"
