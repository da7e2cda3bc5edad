"""Adaptive estimation of smooth functionals with wavelet U-statistics.

The package provides wavelet projection kernels on [0, 1]^d, second-order
U-statistic estimators with Lepski-type resolution choice, sup-norm
adaptive nuisance estimators, treatment-effect, missing-data, quadratic and
variance pipelines, a laboratory for two-point lower-bound priors, and a
Monte Carlo harness.
"""

from .errors import (
    AdaptFuncError,
    BoundsError,
    ConstructionError,
    ContractError,
    DomainError,
    GridError,
    InputError,
    SampleSizeError,
    SelectionError,
)
from .functionals import PipelineConfig, PipelineResult, make_split, run_pipeline
from .lepski import adaptive_estimate, build_grid, calibrate_copt, select_l
from .lowerbound import (
    build_priors,
    chi2_bound,
    chi2_mixture_bruteforce,
    compute_ingredients,
    constrained_risk_rhs,
    functional_value,
)
from .simulate import fit_rate, generate_dataset, model_from_dict, run_experiment, sample_holder_function
from .supnorm import build_window, density_adaptive, density_truncation, regression_adaptive
from .ustat import Dataset, InfluenceTriple, estimate_phi, estimate_phi_bruteforce
from .wavelets import (
    family_from_config,
    haar,
    holder_coeff_norm,
    kernel_eval,
    project,
    tabulated,
    wavelet_check,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptFuncError",
    "BoundsError",
    "ConstructionError",
    "ContractError",
    "Dataset",
    "DomainError",
    "GridError",
    "InfluenceTriple",
    "InputError",
    "PipelineConfig",
    "PipelineResult",
    "SampleSizeError",
    "SelectionError",
    "adaptive_estimate",
    "build_grid",
    "build_priors",
    "build_window",
    "calibrate_copt",
    "chi2_bound",
    "chi2_mixture_bruteforce",
    "compute_ingredients",
    "constrained_risk_rhs",
    "density_adaptive",
    "density_truncation",
    "estimate_phi",
    "estimate_phi_bruteforce",
    "family_from_config",
    "fit_rate",
    "functional_value",
    "generate_dataset",
    "haar",
    "holder_coeff_norm",
    "kernel_eval",
    "make_split",
    "model_from_dict",
    "project",
    "regression_adaptive",
    "run_experiment",
    "run_pipeline",
    "sample_holder_function",
    "select_l",
    "tabulated",
    "wavelet_check",
]
