"""
Аналитические первые и вторые производные μ_t(η) по η = [α_r, α_i, x, y, z].

Формулы одинаковы для предполагаемых весов w̃ и истинных w: меняется только
матрица весов. Для позиционных производных используется (u_{m,ν} − u_ν).
"""
import logging

import numpy as np

from ris_mismatch.core.geometry import combined_response
from ris_mismatch.core.signal import noise_free_mean
from ris_mismatch.exceptions import InvalidArgumentError, SingularGeometryError
from ris_mismatch.models.derivatives import FiniteDiffReport, Hessian, Jacobian
from ris_mismatch.models.scene import SceneConfig
from ris_mismatch.models.signal import ParameterVector

logger = logging.getLogger(__name__)

N_PARAMS = 5
ALPHA = slice(0, 2)
POS = slice(2, 5)


def _unit_vectors(config: SceneConfig, p: np.ndarray):
    diff_m = p[None, :] - config.element_positions
    dist_m = np.linalg.norm(diff_m, axis=1)
    diff_0 = p - config.p_ris
    dist_0 = float(np.linalg.norm(diff_0))
    if dist_0 == 0.0 or np.any(dist_m == 0.0):
        raise SingularGeometryError("unit vectors undefined: position coincides with the RIS center or an element")
    return diff_m / dist_m[:, None], dist_m, diff_0 / dist_0, dist_0


def jacobian_mu(
    config: SceneConfig, eta: ParameterVector, weights: np.ndarray, pilot_energy: float = 1.0
) -> Jacobian:
    p = eta.position
    u_m, _, u, _ = _unit_vectors(config, p)
    b = combined_response(config, p)
    s = np.sqrt(pilot_energy)
    k = config.wavenumber
    delta = u_m - u  # (M, 3)

    c = (weights @ b) * s
    d_mu = np.empty((weights.shape[0], N_PARAMS), dtype=complex)
    d_mu[:, 0] = c
    d_mu[:, 1] = 1j * c
    d_mu[:, POS] = -1j * k * eta.alpha * (weights @ (b[:, None] * delta)) * s
    return Jacobian(d_mu=d_mu)


def hessian_mu(
    config: SceneConfig, eta: ParameterVector, weights: np.ndarray, pilot_energy: float = 1.0
) -> Hessian:
    p = eta.position
    u_m, dist_m, u, dist_0 = _unit_vectors(config, p)
    b = combined_response(config, p)
    s = np.sqrt(pilot_energy)
    k = config.wavenumber
    delta = u_m - u
    eye = np.eye(3)

    # ∂(u_{m,ν1} − u_{ν1})/∂ν2
    curvature = (eye[None] - u_m[:, :, None] * u_m[:, None, :]) / dist_m[:, None, None] - (
        eye - np.outer(u, u)
    ) / dist_0
    per_element = (-(k**2) * delta[:, :, None] * delta[:, None, :] - 1j * k * curvature) * b[:, None, None]

    T = weights.shape[0]
    d2_mu = np.zeros((T, N_PARAMS, N_PARAMS), dtype=complex)
    mixed = -1j * k * (weights @ (b[:, None] * delta)) * s  # ∂²μ/∂α_r∂ν
    d2_mu[:, 0, POS] = mixed
    d2_mu[:, 1, POS] = 1j * mixed
    d2_mu[:, POS, 0] = mixed
    d2_mu[:, POS, 1] = 1j * mixed
    d2_mu[:, POS, POS] = eta.alpha * s * np.einsum("tm,mij->tij", weights, per_element)
    return Hessian(d2_mu=d2_mu)


def misfit_gradient(eps: np.ndarray, jac: Jacobian) -> np.ndarray:
    """∇_η ‖μ(η̄) − μ̃(η)‖² = −2 Re{εᴴ ∂μ̃/∂η}."""
    return -2.0 * np.real(eps.conj() @ jac.d_mu)


def misfit_hessian(eps: np.ndarray, jac: Jacobian, hess: Hessian) -> np.ndarray:
    """∇²_η ‖μ(η̄) − μ̃(η)‖² = 2 Re{JᴴJ − εᴴ ∂²μ̃}."""
    J = jac.d_mu
    return 2.0 * np.real(J.conj().T @ J - np.einsum("t,tij->ij", eps.conj(), hess.d2_mu))


def _relative(diff: np.ndarray, ref: np.ndarray) -> float:
    scale = float(np.abs(ref).max())
    err = float(np.abs(diff).max())
    return err / scale if scale > 0 else err


def finite_diff_check(
    config: SceneConfig,
    eta: ParameterVector,
    weights: np.ndarray,
    step: float = 1e-6,
    pilot_energy: float = 1.0,
) -> FiniteDiffReport:
    """Сравнивает аналитические производные с центральными разностями."""
    if not 1e-8 <= step <= 1e-3:
        raise InvalidArgumentError(f"step must lie in [1e-8, 1e-3], got {step}")
    base = eta.as_array()
    jac = jacobian_mu(config, eta, weights, pilot_energy).d_mu
    hess = hessian_mu(config, eta, weights, pilot_energy).d2_mu

    jac_fd = np.empty_like(jac)
    hess_fd = np.empty_like(hess)
    for i in range(N_PARAMS):
        shift = np.zeros(N_PARAMS)
        shift[i] = step
        plus = ParameterVector.from_array(base + shift)
        minus = ParameterVector.from_array(base - shift)
        jac_fd[:, i] = (
            noise_free_mean(config, plus, weights, pilot_energy) - noise_free_mean(config, minus, weights, pilot_energy)
        ) / (2 * step)
        hess_fd[:, :, i] = (
            jacobian_mu(config, plus, weights, pilot_energy).d_mu - jacobian_mu(config, minus, weights, pilot_energy).d_mu
        ) / (2 * step)

    report = FiniteDiffReport(
        step=step,
        jacobian_alpha=_relative(jac_fd[:, ALPHA] - jac[:, ALPHA], jac[:, ALPHA]),
        jacobian_position=_relative(jac_fd[:, POS] - jac[:, POS], jac[:, POS]),
        hessian_alpha_position=_relative(hess_fd[:, ALPHA, POS] - hess[:, ALPHA, POS], hess[:, ALPHA, POS]),
        hessian_position=_relative(hess_fd[:, POS, POS] - hess[:, POS, POS], hess[:, POS, POS]),
        hessian_symmetry=_relative(hess - np.swapaxes(hess, 1, 2), hess),
    )
    logger.debug(f"Finite-difference check: {report.model_dump()}")
    return report
