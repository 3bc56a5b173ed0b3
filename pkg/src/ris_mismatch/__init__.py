# Файл: src/ris_mismatch/__init__.py

from .config import ExperimentConfig, EstimatorSettings, OptimizerSettings, get_settings, load_experiment_config
from .core.bounds import (
    bounds_at_noise,
    classical_crb,
    evaluate_bounds,
    matrix_A,
    matrix_B,
    pseudo_true,
    stationarity_residuals,
)
from .core.estimator import AngleSearch, bessel_j, init_angles, jacobi_basis, mml_estimate, monte_carlo_rmse
from .core.geometry import build_scene, combined_response, steering_vector, ue_position
from .core.ris_model import amplitude, load_profile, make_weights, random_profile, save_profile
from .core.signal import kl_divergence, noise_free_mean, noise_var_for_snr, simulate
from .exceptions import *
from .models import (
    AmplitudeModel,
    BoundsReport,
    CRBReport,
    EstimationResult,
    ObservationSet,
    ParameterVector,
    PhaseProfile,
    SceneConfig,
    WeightMode,
)

__all__ = [
    "ExperimentConfig", "OptimizerSettings", "EstimatorSettings", "get_settings", "load_experiment_config",
    "SceneConfig", "AmplitudeModel", "PhaseProfile", "WeightMode", "ParameterVector", "ObservationSet",
    "BoundsReport", "CRBReport", "EstimationResult",
    "build_scene", "ue_position", "steering_vector", "combined_response",
    "amplitude", "make_weights", "random_profile", "save_profile", "load_profile",
    "noise_free_mean", "noise_var_for_snr", "simulate", "kl_divergence",
    "pseudo_true", "matrix_A", "matrix_B", "bounds_at_noise", "evaluate_bounds", "classical_crb",
    "stationarity_residuals",
    "bessel_j", "jacobi_basis", "init_angles", "AngleSearch", "mml_estimate", "monte_carlo_rmse",
    "MismatchToolkitError", "InvalidArgumentError", "SingularGeometryError", "DegenerateChannelError",
    "NoSolutionError", "IllConditionedError", "UnsupportedRangeError", "NoInitError", "ConfigError",
]
