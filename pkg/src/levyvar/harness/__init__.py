from .experiments import (ExperimentConfig, ResultRecord, rerun_from_manifest, run_clt, run_experiment,
                          run_lln, run_stable_limit, rate_regression_experiment)
from .stats import ecf_distance, hill, ks_one_sample, ks_two_sample, rate_regression, spread_regression
