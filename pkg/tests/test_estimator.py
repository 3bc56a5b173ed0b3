import numpy as np
import pytest

from conftest import profile_for, true_eta
from ris_mismatch.config import EstimatorSettings
from ris_mismatch.core.estimator import (
    AngleSearch,
    bessel_j,
    init_angles,
    jacobi_basis,
    mml_estimate,
    monte_carlo_rmse,
    rmse_from_trials,
)
from ris_mismatch.core.bounds import concentrated_objective
from ris_mismatch.core.geometry import build_scene, steering_vector, ue_position
from ris_mismatch.core.optimizer import multi_start
from ris_mismatch.core.ris_model import make_weights, random_profile
from ris_mismatch.core.signal import noise_free_mean, simulate
from ris_mismatch.exceptions import DegenerateChannelError, NoInitError, SingularGeometryError, UnsupportedRangeError
from ris_mismatch.models import AngleEstimate, ObservationSet, TrialRecord, WeightMode


def _angle_error_deg(angles: AngleEstimate) -> float:
    cos = np.clip(angles.direction() @ (np.ones(3) / np.sqrt(3)), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos)))


def _noiseless(scene, profile, model, alpha=1.0):
    weights = make_weights(profile, model, WeightMode.TRUE)
    return ObservationSet(y=noise_free_mean(scene, true_eta(scene, alpha), weights), noise_var=1.0)


def test_bessel_values():
    assert bessel_j(0, 0.0) == 1.0
    assert all(bessel_j(n, 0.0) == 0.0 for n in range(1, 6))
    assert bessel_j(0, 1.0) == pytest.approx(0.7651976866, abs=1e-10)
    x = np.linspace(-30, 30, 61)
    np.testing.assert_allclose(bessel_j(-1, x), -bessel_j(1, x))
    np.testing.assert_allclose(bessel_j(-4, x), bessel_j(4, x))


@pytest.mark.parametrize("n, x", [(65, 1.0), (1.5, 1.0), (2, np.inf), (2, 1e6)])
def test_bessel_unsupported_range(n, x):
    with pytest.raises(UnsupportedRangeError):
        bessel_j(n, x)


def test_jacobi_basis_at_broadside_is_flat(medium_scene):
    np.testing.assert_allclose(jacobi_basis(medium_scene, 0.0, 1.3, 5), 1.0)


def test_jacobi_basis_approximates_steering():
    scene = build_scene(rows=3, cols=3, carrier_hz=28e9, p_bs=(-1, 1, 1), p_ue=(0, 0, 1))
    elevation, azimuth = 0.7, -2.1
    direction = [np.sin(elevation) * np.cos(azimuth), np.sin(elevation) * np.sin(azimuth), np.cos(elevation)]
    exact = steering_vector(scene, ue_position(50 * scene.wavelength_m, direction))
    errors = [np.abs(jacobi_basis(scene, elevation, azimuth, n) - exact).max() for n in (2, 4, 8)]
    assert errors[-1] < 0.05
    assert errors[0] > errors[-1]


def test_jacobi_search_with_full_order(medium_scene, ideal, fast_estimator):
    profile = profile_for(medium_scene, 16)
    obs = _noiseless(medium_scene, profile, ideal)
    settings = fast_estimator.model_copy(update={"refine_angles": False})
    angles = AngleSearch(medium_scene, profile, 24, settings).estimate(obs.y)
    assert _angle_error_deg(angles) < 3.0


def test_init_angles_noiseless(medium_scene, ideal, fast_estimator):
    profile = profile_for(medium_scene, 16)
    angles = init_angles(medium_scene, _noiseless(medium_scene, profile, ideal), profile, 5, fast_estimator)
    assert _angle_error_deg(angles) < 1.0
    assert 0.0 <= angles.objective <= 1.0


def test_init_angles_ignore_gain(medium_scene, mismatched, fast_estimator):
    profile = profile_for(medium_scene, 16)
    search = AngleSearch(medium_scene, profile, 5, fast_estimator)
    y = _noiseless(medium_scene, profile, mismatched).y
    a = search.estimate(y)
    b = search.estimate((2.0 - 3.0j) * y)
    assert a.elevation == pytest.approx(b.elevation, abs=1e-6)
    assert a.azimuth == pytest.approx(b.azimuth, abs=1e-6)


def test_init_angles_on_pure_noise(medium_scene, fast_estimator, rng):
    profile = profile_for(medium_scene, 16)
    y = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    angles = AngleSearch(medium_scene, profile, 5, fast_estimator).estimate(y)
    assert 0.0 <= angles.elevation <= np.pi
    assert -np.pi <= angles.azimuth < np.pi


def test_init_angles_rejects_zero_observations(medium_scene, fast_estimator):
    profile = profile_for(medium_scene, 4)
    with pytest.raises(NoInitError):
        init_angles(medium_scene, ObservationSet(y=np.zeros(4), noise_var=1.0), profile, 5, fast_estimator)


def test_mml_recovers_position_without_noise(medium_scene, ideal, optimizer_settings, fast_estimator):
    profile = profile_for(medium_scene, 16)
    obs = _noiseless(medium_scene, profile, ideal, alpha=0.5 + 0.5j)
    result = mml_estimate(medium_scene, obs, profile, optimizer_settings, fast_estimator, seed=1)
    assert np.linalg.norm(result.eta_hat.position - medium_scene.p_ue_true) < 1e-4
    assert abs(result.eta_hat.alpha - (0.5 + 0.5j)) < 1e-4
    assert result.residual < 1e-4 * np.linalg.norm(obs.y)


def test_mml_residual_bounds(medium_scene, mismatched, optimizer_settings, fast_estimator, rng):
    profile = profile_for(medium_scene, 16)
    weights = make_weights(profile, mismatched, WeightMode.TRUE)
    obs = simulate(medium_scene, true_eta(medium_scene), weights, 1e-2, rng)
    result = mml_estimate(medium_scene, obs, profile, optimizer_settings, fast_estimator, seed=2)
    y_energy = float(np.vdot(obs.y, obs.y).real)
    assert result.residual <= np.linalg.norm(obs.y)
    assert len(result.starts_log) == fast_estimator.n_distance_starts + 1
    best = result.starts_log[result.best_start]
    assert all(best.f <= rec.f for rec in result.starts_log)
    assert result.residual**2 == pytest.approx(y_energy + best.f, rel=1e-6, abs=1e-12 * y_energy)


def test_monte_carlo_rmse_at_high_snr(medium_scene, ideal, optimizer_settings, fast_estimator):
    profile = profile_for(medium_scene, 16)
    eta = true_eta(medium_scene)
    result = monte_carlo_rmse(medium_scene, eta, profile, ideal, 80.0, 3, 11, optimizer_settings, fast_estimator)
    assert result.n_trials == 3 and result.n_failures == 0
    assert result.rmse < 5e-3
    assert [t.trial for t in result.trials] == [0, 1, 2]


def test_monte_carlo_rmse_independent_of_workers(medium_scene, mismatched, optimizer_settings, fast_estimator):
    profile = profile_for(medium_scene, 16)
    eta = true_eta(medium_scene)
    serial = monte_carlo_rmse(medium_scene, eta, profile, mismatched, 20.0, 4, 5, optimizer_settings, fast_estimator)
    parallel = monte_carlo_rmse(
        medium_scene, eta, profile, mismatched, 20.0, 4, 5, optimizer_settings, fast_estimator, workers=2
    )
    assert serial.trials == parallel.trials
    assert serial.rmse == parallel.rmse


def test_rmse_from_trials_counts_failures():
    records = [
        TrialRecord(trial=0, snr_db=0, beta_min=0.5, error_m=3.0, residual=1.0, start_used=0),
        TrialRecord(trial=1, snr_db=0, beta_min=0.5, error_m=4.0, residual=1.0, start_used=2),
        TrialRecord(trial=2, snr_db=0, beta_min=0.5, error_m=float("nan"), residual=float("nan"), start_used=-1, failed=True),
    ]
    result = rmse_from_trials(records)
    assert result.rmse == pytest.approx(np.sqrt(12.5))
    assert result.n_failures == 1 and result.n_trials == 3
    assert result.stderr == pytest.approx(np.std([9.0, 16.0], ddof=1) / np.sqrt(2) / (2 * np.sqrt(12.5)))


def test_estimator_settings_reject_bad_values():
    with pytest.raises(ValueError):
        EstimatorSettings(jacobi_order=0)


def test_angle_initialized_starts_beat_random_starts(medium_scene, ideal, optimizer_settings, fast_estimator):
    rng = np.random.default_rng(21)
    wins = 0
    for seed in range(5):
        profile = random_profile(16, medium_scene.num_elements, seed)
        obs = _noiseless(medium_scene, profile, ideal)
        guided = mml_estimate(medium_scene, obs, profile, optimizer_settings, fast_estimator, seed=seed)

        weights = make_weights(profile, ideal, WeightMode.ASSUMED)
        starts = [rng.uniform([-3.0, -3.0, 0.1], [3.0, 3.0, 3.0]) for _ in range(fast_estimator.n_distance_starts + 1)]
        blind = multi_start(
            lambda p: concentrated_objective(medium_scene, p, obs.y, weights),
            starts,
            optimizer_settings,
            guard_errors=(SingularGeometryError, DegenerateChannelError),
        )
        blind_residual = np.sqrt(max(float(np.vdot(obs.y, obs.y).real) + blind.f, 0.0))
        wins += guided.residual <= blind_residual * (1 + 1e-9) + 1e-12
    assert wins >= 4
