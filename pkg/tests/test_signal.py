import numpy as np
import pytest

from conftest import profile_for, true_eta
from ris_mismatch.core.geometry import combined_response
from ris_mismatch.core.ris_model import make_weights
from ris_mismatch.core.signal import (
    effective_channel,
    kl_divergence,
    kl_divergence_monte_carlo,
    noise_free_mean,
    noise_var_for_snr,
    simulate,
)
from ris_mismatch.exceptions import DegenerateChannelError, InvalidArgumentError
from ris_mismatch.models import ObservationSet, ParameterVector, WeightMode


def test_mean_is_gain_times_channel(small_scene, mismatched):
    profile = profile_for(small_scene, 6)
    weights = make_weights(profile, mismatched, WeightMode.TRUE)
    eta = true_eta(small_scene, 0.5 - 2j)
    mu = noise_free_mean(small_scene, eta, weights, pilot_energy=4.0)
    c = effective_channel(small_scene, eta.position, weights, pilot_energy=4.0)
    np.testing.assert_allclose(mu, (0.5 - 2j) * c)
    np.testing.assert_allclose(c, 2.0 * weights @ combined_response(small_scene, eta.position))


def test_noise_var_matches_snr_definition(small_scene, mismatched):
    profile = profile_for(small_scene, 6)
    weights = make_weights(profile, mismatched, WeightMode.TRUE)
    eta = true_eta(small_scene, 2.0)
    noise_var = noise_var_for_snr(small_scene, eta, weights, 20.0)
    mu = noise_free_mean(small_scene, eta, weights)
    snr = np.sum(np.abs(mu) ** 2) / (6 * noise_var)
    assert snr == pytest.approx(100.0)
    assert noise_var_for_snr(small_scene, eta, weights, 40.0) == pytest.approx(noise_var / 100)


def test_noise_var_rejects_zero_gain(small_scene, mismatched):
    profile = profile_for(small_scene, 3)
    weights = make_weights(profile, mismatched, WeightMode.TRUE)
    with pytest.raises(DegenerateChannelError):
        noise_var_for_snr(small_scene, true_eta(small_scene, 0.0), weights, 10.0)
    with pytest.raises(InvalidArgumentError):
        noise_var_for_snr(small_scene, true_eta(small_scene), weights, np.inf)


def test_simulated_noise_has_requested_variance(small_scene, ideal, rng):
    profile = profile_for(small_scene, 4000)
    weights = make_weights(profile, ideal, WeightMode.TRUE)
    eta = true_eta(small_scene)
    obs = simulate(small_scene, eta, weights, 0.3, rng)
    noise = obs.y - noise_free_mean(small_scene, eta, weights)
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.3, rel=0.05)
    assert abs(np.mean(noise.real * noise.imag)) < 0.02


def test_simulated_observations_average_to_noise_free_mean(small_scene, mismatched, rng):
    profile = profile_for(small_scene, 6)
    weights = make_weights(profile, mismatched, WeightMode.TRUE)
    eta = true_eta(small_scene, 0.4 + 0.3j)
    noise_var, draws = 0.5, 4000
    samples = np.array([simulate(small_scene, eta, weights, noise_var, rng).y for _ in range(draws)])
    mu = noise_free_mean(small_scene, eta, weights)
    # стандартное отклонение выборочного среднего: sqrt(N₀ / K) на элемент
    assert np.abs(samples.mean(axis=0) - mu).max() < 5 * np.sqrt(noise_var / draws)


def test_kl_is_zero_without_mismatch(small_scene, ideal):
    profile = profile_for(small_scene, 5)
    w = make_weights(profile, ideal, WeightMode.TRUE)
    eta = true_eta(small_scene)
    assert kl_divergence(small_scene, eta, eta, w, make_weights(profile, ideal, WeightMode.ASSUMED), 1e-3) == 0.0


def test_kl_closed_form_matches_monte_carlo(small_scene, mismatched):
    profile = profile_for(small_scene, 3)
    w_true = make_weights(profile, mismatched, WeightMode.TRUE)
    w_assumed = make_weights(profile, mismatched, WeightMode.ASSUMED)
    eta_true = true_eta(small_scene)
    eta = ParameterVector.from_alpha(0.9 + 0.05j, eta_true.position + np.array([1e-3, 0.0, -5e-4]))
    noise_var = noise_var_for_snr(small_scene, eta_true, w_true, 10.0)
    closed = kl_divergence(small_scene, eta_true, eta, w_true, w_assumed, noise_var)
    estimate, stderr = kl_divergence_monte_carlo(small_scene, eta_true, eta, w_true, w_assumed, noise_var, 20000, seed=5)
    assert abs(closed - estimate) < 3 * stderr


def test_observation_csv_round_trip(tmp_path):
    obs = ObservationSet(y=[1 + 2j, -0.5j, 3.25], noise_var=0.125, pilot_energy=2.0)
    path = tmp_path / "y.csv"
    obs.to_csv(path)
    loaded = ObservationSet.from_csv(path)
    np.testing.assert_array_equal(loaded.y, obs.y)
    assert (loaded.noise_var, loaded.pilot_energy) == (0.125, 2.0)


def test_observation_rejects_non_finite():
    with pytest.raises(ValueError):
        ObservationSet(y=[1.0, np.nan], noise_var=1.0)
