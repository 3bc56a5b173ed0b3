import numpy as np
import pytest

from conftest import profile_for, true_eta
from ris_mismatch.config import OptimizerSettings
from ris_mismatch.core.bounds import (
    assemble_bounds,
    bounds_at_noise,
    classical_crb,
    concentrated_objective,
    evaluate_bounds,
    matrix_A,
    matrix_B,
    optimal_alpha,
    pseudo_true,
    stationarity_residuals,
)
from ris_mismatch.core.geometry import bs_steering, steering_vector
from ris_mismatch.core.optimizer import basin_bounds, local_minimize
from ris_mismatch.core.ris_model import make_weights, random_profile
from ris_mismatch.core.signal import noise_free_mean, noise_var_for_snr
from ris_mismatch.exceptions import IllConditionedError, InvalidArgumentError
from ris_mismatch.models import AmplitudeModel, ParameterVector, WeightMode


@pytest.fixture
def mismatch_case(small_scene, mismatched, optimizer_settings):
    profile = profile_for(small_scene, 8)
    eta_true = true_eta(small_scene)
    eta0 = pseudo_true(small_scene, eta_true, profile, mismatched, optimizer_settings)
    return small_scene, eta_true, profile, mismatched, eta0


def _noise_var(scene, eta_true, profile, model, snr_db):
    return noise_var_for_snr(scene, eta_true, make_weights(profile, model, WeightMode.TRUE), snr_db)


def test_no_mismatch_degenerates_to_crb(small_scene, ideal, optimizer_settings):
    profile = profile_for(small_scene, 8)
    eta_true = true_eta(small_scene)
    eta0 = pseudo_true(small_scene, eta_true, profile, ideal, optimizer_settings)
    assert np.linalg.norm(eta0.position - eta_true.position) < 1e-6

    noise_var = _noise_var(small_scene, eta_true, profile, ideal, 30.0)
    A = matrix_A(small_scene, eta0, eta_true, profile, ideal, noise_var)
    B = matrix_B(small_scene, eta0, eta_true, profile, ideal, noise_var)
    assert np.linalg.norm(A + B) < 1e-9 * np.linalg.norm(A)

    report = bounds_at_noise(small_scene, eta0, eta_true, profile, ideal, noise_var)
    crb = classical_crb(small_scene, eta_true, profile, ideal, noise_var)
    assert abs(report.peb_lb - crb.peb_crb) / crb.peb_crb < 1e-6


def test_pseudo_true_is_stationary(mismatch_case):
    scene, eta_true, profile, model, eta0 = mismatch_case
    residuals = stationarity_residuals(scene, eta0, eta_true, profile, model)
    assert residuals.shape == (5,)
    assert residuals.max() < 1e-6


def test_pseudo_true_gain_is_least_squares(mismatch_case):
    scene, eta_true, profile, model, eta0 = mismatch_case
    mu_true = noise_free_mean(scene, eta_true, make_weights(profile, model, WeightMode.TRUE))
    alpha = optimal_alpha(scene, eta0.position, mu_true, make_weights(profile, model, WeightMode.ASSUMED))
    assert abs(alpha - eta0.alpha) < 1e-8 * abs(alpha)


def test_pseudo_true_does_not_depend_on_noise(mismatch_case, optimizer_settings):
    scene, eta_true, profile, model, eta0 = mismatch_case
    low = evaluate_bounds(scene, eta_true, profile, model, 0.0, optimizer_settings)
    high = evaluate_bounds(scene, eta_true, profile, model, 40.0, optimizer_settings, eta0=eta0)
    np.testing.assert_allclose(low.eta0.as_array(), eta0.as_array())
    assert low.bias_norm == pytest.approx(high.bias_norm, rel=1e-12)


def test_mcrb_scales_with_noise(mismatch_case):
    scene, eta_true, profile, model, eta0 = mismatch_case
    reports = [
        bounds_at_noise(scene, eta0, eta_true, profile, model, _noise_var(scene, eta_true, profile, model, snr))
        for snr in (0.0, 20.0, 40.0)
    ]
    for lo, hi in zip(reports, reports[1:]):
        assert hi.peb_mcrb / lo.peb_mcrb == pytest.approx(0.1, rel=1e-6)
        assert hi.bias_norm == lo.bias_norm


def test_lb_is_mcrb_plus_bias(mismatch_case):
    scene, eta_true, profile, model, eta0 = mismatch_case
    report = bounds_at_noise(scene, eta0, eta_true, profile, model, _noise_var(scene, eta_true, profile, model, 20.0))
    bias = eta_true.as_array() - eta0.as_array()
    np.testing.assert_allclose(report.lb, report.mcrb + np.outer(bias, bias))
    assert report.bias_norm == pytest.approx(np.linalg.norm(eta_true.position - eta0.position))
    assert report.peb_lb**2 == pytest.approx(report.peb_mcrb**2 + report.bias_norm**2, rel=1e-9)
    np.testing.assert_allclose(report.mcrb, report.mcrb.T)
    assert np.all(np.linalg.eigvalsh(report.mcrb) > -1e-12 * np.abs(report.mcrb).max())

    record = report.to_record()
    assert set(record) >= {"peb_lb", "peb_mcrb", "bias_norm", "alpha0_re", "p0_x", "condition_A"}
    assert record["p0_z"] == eta0.position[2]


def test_bounds_do_not_depend_on_gain_scale(small_scene, mismatched, optimizer_settings):
    profile = profile_for(small_scene, 8)
    scale = 2.0 - 1.0j
    w_true = make_weights(profile, mismatched, WeightMode.TRUE)
    w_assumed = make_weights(profile, mismatched, WeightMode.ASSUMED)
    eta_unit, eta_scaled = true_eta(small_scene), true_eta(small_scene, scale)

    mu_unit = noise_free_mean(small_scene, eta_unit, w_true)
    mu_scaled = noise_free_mean(small_scene, eta_scaled, w_true)
    for dz in (0.0, 0.01, -0.02):
        p = small_scene.p_ue_true + np.array([0.005, 0.0, dz])
        f_unit = concentrated_objective(small_scene, p, mu_unit, w_assumed)
        assert concentrated_objective(small_scene, p, mu_scaled, w_assumed) == pytest.approx(abs(scale) ** 2 * f_unit, rel=1e-12)

    eta0_unit = pseudo_true(small_scene, eta_unit, profile, mismatched, optimizer_settings)
    eta0_scaled = pseudo_true(small_scene, eta_scaled, profile, mismatched, optimizer_settings)
    np.testing.assert_allclose(eta0_scaled.position, eta0_unit.position, rtol=0, atol=1e-7)
    assert eta0_scaled.alpha == pytest.approx(scale * eta0_unit.alpha, rel=1e-6)

    for snr_db in (0.0, 30.0):
        unit = bounds_at_noise(
            small_scene, eta0_unit, eta_unit, profile, mismatched, _noise_var(small_scene, eta_unit, profile, mismatched, snr_db)
        )
        scaled = bounds_at_noise(
            small_scene, eta0_scaled, eta_scaled, profile, mismatched, _noise_var(small_scene, eta_scaled, profile, mismatched, snr_db)
        )
        assert scaled.peb_mcrb == pytest.approx(unit.peb_mcrb, rel=1e-5)
        assert scaled.bias_norm == pytest.approx(unit.bias_norm, rel=1e-5)
        assert scaled.peb_lb == pytest.approx(unit.peb_lb, rel=1e-5)


def test_classical_crb_inverts_fim(small_scene, mismatched):
    profile = profile_for(small_scene, 8)
    eta_true = true_eta(small_scene)
    crb = classical_crb(small_scene, eta_true, profile, mismatched, _noise_var(small_scene, eta_true, profile, mismatched, 20.0))
    residual = np.linalg.norm(crb.fim @ crb.crb - np.eye(5))
    assert residual < 1e-12 * np.linalg.norm(crb.fim) * np.linalg.norm(crb.crb)
    np.testing.assert_allclose(crb.crb, crb.crb.T)
    assert crb.peb_crb > 0


def test_singular_a_is_reported():
    A = np.diag([1.0, 1.0, 1.0, 1.0, 0.0])
    eta = ParameterVector.from_alpha(1.0, (0.0, 0.0, 1.0))
    with pytest.raises(IllConditionedError) as info:
        assemble_bounds(A, np.eye(5), eta, eta)
    assert info.value.condition == np.inf


def test_bounds_reject_non_positive_noise(mismatch_case):
    scene, eta_true, profile, model, eta0 = mismatch_case
    with pytest.raises(InvalidArgumentError):
        matrix_A(scene, eta0, eta_true, profile, model, 0.0)


def test_concentrated_objective_range(small_scene, mismatched):
    profile = profile_for(small_scene, 8)
    eta_true = true_eta(small_scene, 0.3 + 0.4j)
    mu = noise_free_mean(small_scene, eta_true, make_weights(profile, mismatched, WeightMode.TRUE))
    w_assumed = make_weights(profile, mismatched, WeightMode.ASSUMED)
    energy = float(np.vdot(mu, mu).real)
    for dz in (0.0, 0.01, 0.05):
        value = concentrated_objective(small_scene, eta_true.position + np.array([0.0, 0.0, dz]), mu, w_assumed)
        assert -energy * (1 + 1e-12) <= value <= 0.0


def _grid_oracle(scene, mu_true, w_assumed, box, step=1e-3, chunk=100_000):
    """Полный перебор куба box с шагом step, затем уточнение внутри того же куба."""
    axes = [np.arange(lo, hi + step / 2, step) for lo, hi in box]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    points = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    best_value, best_point = np.inf, None
    for i in range(0, len(points), chunk):
        block = points[i : i + chunk]
        c = (steering_vector(scene, block) * bs_steering(scene)) @ w_assumed.T
        values = -np.abs(c.conj() @ mu_true) ** 2 / np.sum(np.abs(c) ** 2, axis=1)
        k = int(np.argmin(values))
        if values[k] < best_value:
            best_value, best_point = values[k], block[k]
    refined = local_minimize(
        lambda p: concentrated_objective(scene, p, mu_true, w_assumed),
        best_point,
        OptimizerSettings(x_tol=1e-10, min_step=1e-4),
        bounds=box,
    )
    return refined.x, refined.f


@pytest.mark.parametrize("beta_min", [0.3, 0.5])
def test_pseudo_true_matches_grid_oracle(tiny_scene, optimizer_settings, beta_min):
    model = AmplitudeModel(beta_min=beta_min, phi=0.0, kappa=2.0)
    eta_true = true_eta(tiny_scene)
    half_width = optimizer_settings.basin_fraction * np.linalg.norm(eta_true.position)
    box = basin_bounds(eta_true.position, half_width)
    assert half_width == pytest.approx(0.1)
    for seed in range(10):
        profile = random_profile(4, tiny_scene.num_elements, seed)
        w_true = make_weights(profile, model, WeightMode.TRUE)
        w_assumed = make_weights(profile, model, WeightMode.ASSUMED)
        mu_true = noise_free_mean(tiny_scene, eta_true, w_true)

        eta0 = pseudo_true(tiny_scene, eta_true, profile, model, optimizer_settings)
        assert np.all(np.abs(eta0.position - eta_true.position) <= half_width), f"profile seed {seed}"
        f0 = concentrated_objective(tiny_scene, eta0.position, mu_true, w_assumed)
        p_oracle, f_oracle = _grid_oracle(tiny_scene, mu_true, w_assumed, box)
        assert np.linalg.norm(eta0.position - p_oracle) < 1e-4, f"profile seed {seed}"
        assert f0 <= f_oracle + 1e-6 * abs(f_oracle), f"profile seed {seed}"
