import numpy as np
import pytest

from ris_mismatch.core.ris_model import amplitude, load_profile, make_weights, random_profile, save_profile
from ris_mismatch.exceptions import InvalidArgumentError
from ris_mismatch.models import AmplitudeModel, PhaseProfile, WeightMode


def test_amplitude_extremes():
    model = AmplitudeModel(beta_min=0.3, phi=0.0, kappa=2.0)
    assert amplitude(model, -np.pi / 2) == pytest.approx(0.3)
    assert amplitude(model, np.pi / 2) == pytest.approx(1.0)
    assert amplitude(model, 0.0) == pytest.approx(0.7 * 0.25 + 0.3)


def test_amplitude_stays_in_unit_interval():
    theta = np.linspace(-np.pi, np.pi, 1001, endpoint=False)
    for beta_min in (0.0, 0.5, 1.0):
        beta = amplitude(AmplitudeModel(beta_min=beta_min, phi=0.4, kappa=1.5), theta)
        assert beta.min() >= beta_min - 1e-15
        assert beta.max() <= 1.0 + 1e-15


def test_ideal_model_gives_unit_amplitudes():
    theta = np.linspace(-np.pi, np.pi, 50, endpoint=False)
    np.testing.assert_array_equal(amplitude(AmplitudeModel(beta_min=1.0), theta), 1.0)


def test_weights_by_mode():
    profile = random_profile(4, 6, seed=11)
    model = AmplitudeModel(beta_min=0.2)
    assumed = make_weights(profile, model, WeightMode.ASSUMED)
    true = make_weights(profile, model, WeightMode.TRUE)
    np.testing.assert_allclose(np.abs(assumed), 1.0)
    np.testing.assert_allclose(np.angle(true), np.angle(assumed))
    np.testing.assert_allclose(np.abs(true), amplitude(model, profile.theta))


def test_random_profile_is_seeded_and_in_range():
    a = random_profile(5, 7, seed=42)
    b = random_profile(5, 7, seed=42)
    c = random_profile(5, 7, seed=43)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert not np.array_equal(a.theta, c.theta)
    assert a.theta.min() >= -np.pi and a.theta.max() < np.pi
    assert (a.n_transmissions, a.n_elements, a.seed) == (5, 7, 42)


def test_random_profile_rejects_empty():
    with pytest.raises(InvalidArgumentError):
        random_profile(0, 3, seed=1)


def test_profile_rejects_out_of_range_phase():
    with pytest.raises(ValueError):
        PhaseProfile(theta=[[0.0, np.pi]], seed=0)


@pytest.mark.parametrize("suffix", [".csv", ".npy"])
def test_profile_persistence(tmp_path, suffix):
    profile = random_profile(3, 4, seed=2**63 + 5)
    path = tmp_path / f"profile{suffix}"
    save_profile(profile, path)
    loaded = load_profile(path)
    np.testing.assert_array_equal(loaded.theta, profile.theta)
    assert loaded.seed == profile.seed
