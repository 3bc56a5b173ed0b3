import logging

import numpy as np

from ris_mismatch.core.geometry import combined_response
from ris_mismatch.exceptions import DegenerateChannelError, InvalidArgumentError
from ris_mismatch.models.scene import SceneConfig
from ris_mismatch.models.signal import ObservationSet, ParameterVector
from ris_mismatch.utils.seeding import generator

logger = logging.getLogger(__name__)


def effective_channel(config: SceneConfig, p: np.ndarray, weights: np.ndarray, pilot_energy: float = 1.0) -> np.ndarray:
    """[c(p)]_t = Σ_m [b(p)]_m w_{t,m} s_t."""
    return (weights @ combined_response(config, p)) * np.sqrt(pilot_energy)


def noise_free_mean(
    config: SceneConfig, eta: ParameterVector, weights: np.ndarray, pilot_energy: float = 1.0
) -> np.ndarray:
    """μ_t(η) = α Σ_m [b(p)]_m w_{t,m} s_t: с истинными или предполагаемыми весами."""
    return eta.alpha * effective_channel(config, eta.position, weights, pilot_energy)


def noise_var_for_snr(
    config: SceneConfig,
    eta_true: ParameterVector,
    true_weights: np.ndarray,
    snr_db: float,
    pilot_energy: float = 1.0,
) -> float:
    """N₀, при котором SNR = E_s|ᾱ|²/(T N₀) Σ_t |bᵀ(p̄) w_t|² равен 10^{snr_db/10}."""
    if not np.isfinite(snr_db):
        raise InvalidArgumentError(f"snr_db must be finite, got {snr_db}")
    gain = np.sum(np.abs(true_weights @ combined_response(config, eta_true.position)) ** 2)
    T = true_weights.shape[0]
    noise_var = pilot_energy * abs(eta_true.alpha) ** 2 * gain / (T * 10.0 ** (snr_db / 10.0))
    if not noise_var > 0:
        raise DegenerateChannelError("effective channel (or gain) is zero; SNR cannot be calibrated")
    return float(noise_var)


def complex_noise(rng: np.random.Generator, noise_var: float, size) -> np.ndarray:
    """Круговой комплексный гауссов шум: N₀/2 на каждую вещественную компоненту."""
    scale = np.sqrt(noise_var / 2.0)
    return scale * rng.standard_normal(size) + 1j * scale * rng.standard_normal(size)


def simulate(
    config: SceneConfig,
    eta_true: ParameterVector,
    true_weights: np.ndarray,
    noise_var: float,
    rng: np.random.Generator,
    pilot_energy: float = 1.0,
) -> ObservationSet:
    mu = noise_free_mean(config, eta_true, true_weights, pilot_energy)
    y = mu + complex_noise(rng, noise_var, mu.shape)
    return ObservationSet(y=y, noise_var=noise_var, pilot_energy=pilot_energy)


def kl_divergence(
    config: SceneConfig,
    eta_true: ParameterVector,
    eta: ParameterVector,
    weights_true: np.ndarray,
    weights_assumed: np.ndarray,
    noise_var: float,
    pilot_energy: float = 1.0,
) -> float:
    """D(p(·|η̄) ‖ p̃(·|η)) = ‖μ(η̄) − μ̃(η)‖²/N₀ для гауссиан с общей ковариацией N₀I."""
    if not noise_var > 0:
        raise InvalidArgumentError(f"noise_var must be positive, got {noise_var}")
    mu = noise_free_mean(config, eta_true, weights_true, pilot_energy)
    mu_tilde = noise_free_mean(config, eta, weights_assumed, pilot_energy)
    return float(np.sum(np.abs(mu - mu_tilde) ** 2) / noise_var)


def kl_divergence_monte_carlo(
    config: SceneConfig,
    eta_true: ParameterVector,
    eta: ParameterVector,
    weights_true: np.ndarray,
    weights_assumed: np.ndarray,
    noise_var: float,
    n_draws: int,
    seed: int,
    pilot_energy: float = 1.0,
) -> tuple[float, float]:
    """
    Оценка E_p[ln p(y|η̄) − ln p̃(y|η)] по n_draws выборкам y ~ p(·|η̄).
    Возвращает (оценка, стандартная ошибка); нормировочные константы сокращаются.
    """
    mu = noise_free_mean(config, eta_true, weights_true, pilot_energy)
    mu_tilde = noise_free_mean(config, eta, weights_assumed, pilot_energy)
    rng = generator(seed)
    y = mu[None, :] + complex_noise(rng, noise_var, (n_draws, mu.size))
    log_ratio = (np.sum(np.abs(y - mu_tilde) ** 2, axis=1) - np.sum(np.abs(y - mu) ** 2, axis=1)) / noise_var
    return float(log_ratio.mean()), float(log_ratio.std(ddof=1) / np.sqrt(n_draws))
