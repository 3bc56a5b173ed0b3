import numpy as np
import pytest

from ris_mismatch.config import EstimatorSettings, ExperimentConfig, OptimizerSettings
from ris_mismatch.core.geometry import build_scene, ue_position
from ris_mismatch.core.ris_model import random_profile
from ris_mismatch.models import AmplitudeModel, ParameterVector

CARRIER_HZ = 28e9
P_BS = (-5.77, 5.77, 5.77)


@pytest.fixture
def tiny_scene():
    """3x3 RIS, UE в 0.2 м: для проверок производных и оракулов перебора."""
    return build_scene(rows=3, cols=3, carrier_hz=CARRIER_HZ, p_bs=(-0.3, 0.3, 0.3), p_ue=ue_position(0.2, (1.0, 0.5, 1.0)))


@pytest.fixture
def small_scene():
    """5x5 RIS, UE в 0.15 м: кривизна фронта заметна, FIM хорошо обусловлена."""
    return build_scene(rows=5, cols=5, carrier_hz=CARRIER_HZ, p_bs=(-0.5, 0.5, 0.5), p_ue=ue_position(0.15, (1.0, 1.0, 1.0)))


@pytest.fixture
def medium_scene():
    """10x10 RIS, UE в 1 м: для оценщика."""
    return build_scene(rows=10, cols=10, carrier_hz=CARRIER_HZ, p_bs=P_BS, p_ue=ue_position(1.0, (1.0, 1.0, 1.0)))


def true_eta(scene, alpha: complex = 1.0) -> ParameterVector:
    return ParameterVector.from_alpha(alpha, scene.p_ue_true)


@pytest.fixture
def mismatched():
    return AmplitudeModel(beta_min=0.5, phi=0.0, kappa=2.0)


@pytest.fixture
def ideal():
    return AmplitudeModel(beta_min=1.0, phi=0.0, kappa=2.0)


@pytest.fixture
def optimizer_settings():
    return OptimizerSettings()


@pytest.fixture
def fast_estimator():
    return EstimatorSettings(azimuth_points=181, elevation_points=181, coarse_elevation_points=46, range_scan_points=200)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def profile_for(scene, T: int, seed: int = 7):
    return random_profile(T, scene.num_elements, seed)


@pytest.fixture
def tiny_config(tmp_path):
    """Эксперимент на 5x5 RIS с двумя профилями: секунды на прогон."""
    return ExperimentConfig.model_validate(
        {
            "scene": {
                "ris_rows": 5,
                "ris_cols": 5,
                "p_bs": [-0.5, 0.5, 0.5],
                "ue_distance": [0.15],
                "ris_sizes": [4, 5],
            },
            "model": {"beta_min": [0.5, 1.0]},
            "signal": {"T": 8, "snr_db": [10.0, 30.0]},
            "run": {
                "master_seed": 3,
                "n_profiles": 2,
                "n_trials": 2,
                "estimator": {
                    "azimuth_points": 91,
                    "elevation_points": 91,
                    "coarse_elevation_points": 16,
                    "n_distance_starts": 2,
                    "range_scan_points": 100,
                    "max_start_distance": 2.0,
                    "range_scan_min": 0.02,
                },
            },
            "output": {"directory": str(tmp_path / "out"), "formats": ["csv", "dat"]},
        }
    )
