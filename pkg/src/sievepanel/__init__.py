"""Linearity detection and inference for partially linear additive panel
models with fixed effects, using a group-SCAD penalty on a centralized spline
sieve."""

from .errors import InputError, NumericalError, SievePanelError
from .estimator import FitResult, WithinProblem, fit_penalized_lqa, fit_unpenalized, objective
from .inference import InferenceReport, Target, infer, joint_cov, pointwise_ci
from .panel_data import PanelDataset, PanelSchema, ScalingMap, load_panel_csv, scale_regressors, within_demean
from .penalty import ScadParams, lqa_weight, scad_deriv, scad_value
from .pipeline import Detection, detect, detect_and_infer
from .solution_path import SolutionPath, default_lambda_grid, extract_models, fit_path
from .spline_basis import BasisSpec, build_design, eval_basis, make_uniform_knots, uniform_specs
from .tuning import TuningConfig, select_bandwidth_degree, select_lambda_estimation, select_model

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "Detection",
    "FitResult",
    "InferenceReport",
    "InputError",
    "NumericalError",
    "PanelDataset",
    "PanelSchema",
    "ScadParams",
    "ScalingMap",
    "SievePanelError",
    "SolutionPath",
    "Target",
    "TuningConfig",
    "WithinProblem",
    "build_design",
    "default_lambda_grid",
    "detect",
    "detect_and_infer",
    "eval_basis",
    "extract_models",
    "fit_path",
    "fit_penalized_lqa",
    "fit_unpenalized",
    "infer",
    "joint_cov",
    "load_panel_csv",
    "lqa_weight",
    "make_uniform_knots",
    "objective",
    "pointwise_ci",
    "scad_deriv",
    "scad_value",
    "scale_regressors",
    "select_bandwidth_degree",
    "select_lambda_estimation",
    "select_model",
    "uniform_specs",
    "within_demean",
]
