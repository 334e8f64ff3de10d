"""Sparse estimation of a covariate-driven diffusion coefficient from high-frequency data."""

from .bench import ExperimentConfig, load_config, parse_config, run_experiment, verify_bounds
from .factors import (FactorReport, assumption_check, compatibility, cone_invertibility,
                      factor_report, restricted_eigenvalue)
from .lp import lp_min_l1, simplex
from .model_sim import (Drift, ModelSpec, ObservedPath, generate_covariates, load_path, save_path,
                        simulate_fine, simulate_path)
from .quasi_lik import (epsilon_n, g_function, hessian, j_matrix, log_quasi_likelihood, nu_factor,
                        score, score_decomposition, score_report)
from .selector import TuningRule, closed_form_1d, estimate, gamma_n, log_regression_init

__version__ = "0.1.0"
