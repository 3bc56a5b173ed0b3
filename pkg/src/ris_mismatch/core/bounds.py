"""
Псевдоистинный параметр, матрицы A/B, MCRB, LB, смещение и классическая CRB.

η₀ минимизирует ‖μ(η̄) − μ̃(η)‖ (минимум KL-дивергенции для гауссиан с общей
ковариацией); усиление исключается в замкнутой форме, остаётся поиск по p.
"""
import logging

import numpy as np

from ris_mismatch.config import OptimizerSettings
from ris_mismatch.core.derivatives import (
    POS,
    hessian_mu,
    jacobian_mu,
    misfit_gradient,
    misfit_hessian,
)
from ris_mismatch.core.optimizer import basin_bounds, local_minimize, multi_start, pseudo_true_starts
from ris_mismatch.core.ris_model import make_weights
from ris_mismatch.core.signal import effective_channel, noise_free_mean, noise_var_for_snr
from ris_mismatch.exceptions import (
    DegenerateChannelError,
    IllConditionedError,
    InvalidArgumentError,
    SingularGeometryError,
)
from ris_mismatch.models.bounds import BoundsReport, CRBReport
from ris_mismatch.models.ris import AmplitudeModel, PhaseProfile, WeightMode
from ris_mismatch.models.scene import SceneConfig
from ris_mismatch.models.signal import ParameterVector

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
_GEOMETRY_ERRORS = (SingularGeometryError, DegenerateChannelError)


def optimal_alpha(
    config: SceneConfig, p: np.ndarray, mu_true: np.ndarray, assumed_weights: np.ndarray, pilot_energy: float = 1.0
) -> complex:
    """α = cᴴ(p)μ / cᴴ(p)c(p): МНК-усиление при фиксированной позиции."""
    c = effective_channel(config, p, assumed_weights, pilot_energy)
    energy = float(np.real(np.vdot(c, c)))
    if not energy > 0:
        raise DegenerateChannelError("effective channel c(p) is zero")
    return complex(np.vdot(c, mu_true) / energy)


def concentrated_objective(
    config: SceneConfig, p: np.ndarray, mu_true: np.ndarray, assumed_weights: np.ndarray, pilot_energy: float = 1.0
) -> float:
    """−μᴴ P_{c(p)} μ: минус мощность проекции μ на span{c(p)}; значения в [−‖μ‖², 0]."""
    c = effective_channel(config, p, assumed_weights, pilot_energy)
    energy = float(np.real(np.vdot(c, c)))
    if not energy > 0:
        raise DegenerateChannelError("effective channel c(p) is zero")
    return -float(np.abs(np.vdot(c, mu_true)) ** 2) / energy


def _misfit(config, eta, mu_true, assumed_weights, pilot_energy) -> np.ndarray:
    return mu_true - noise_free_mean(config, eta, assumed_weights, pilot_energy)


def _newton_polish(
    config: SceneConfig,
    eta: ParameterVector,
    mu_true: np.ndarray,
    assumed_weights: np.ndarray,
    pilot_energy: float,
    iterations: int,
    bounds: list[tuple[float, float]] | None = None,
) -> ParameterVector:
    """
    Шаги Ньютона по аналитическим градиенту и гессиану ‖ε(η)‖²; шаг принимается,
    только если не ухудшает и не выводит позицию из bounds.
    """
    lower, upper = np.array(bounds, dtype=float).T if bounds is not None else (-np.inf, np.inf)

    def _state(candidate: ParameterVector):
        eps = _misfit(config, candidate, mu_true, assumed_weights, pilot_energy)
        jac = jacobian_mu(config, candidate, assumed_weights, pilot_energy)
        return float(np.vdot(eps, eps).real), eps, jac

    misfit, eps, jac = _state(eta)
    for it in range(iterations):
        grad = misfit_gradient(eps, jac)
        gnorm = float(np.linalg.norm(grad))
        if gnorm == 0.0:
            break
        hess = misfit_hessian(eps, jac, hessian_mu(config, eta, assumed_weights, pilot_energy))
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            logger.debug("Newton polish stopped: singular misfit Hessian")
            break
        try:
            candidate = ParameterVector.from_array(eta.as_array() + step)
            if np.any(candidate.position < lower) or np.any(candidate.position > upper):
                logger.debug("Newton polish stopped: step leaves the search box")
                break
            c_misfit, c_eps, c_jac = _state(candidate)
        except _GEOMETRY_ERRORS:
            break
        c_gnorm = float(np.linalg.norm(misfit_gradient(c_eps, c_jac)))
        improves = c_misfit < misfit or (c_misfit <= misfit * (1 + 1e-12) and c_gnorm < gnorm)
        if not improves:
            break
        eta, misfit, eps, jac = candidate, c_misfit, c_eps, c_jac
        logger.debug(f"Newton polish iter {it}: |grad| {gnorm:.3e} -> {c_gnorm:.3e}")
    return eta


def pseudo_true(
    config: SceneConfig,
    eta_true: ParameterVector,
    profile: PhaseProfile,
    model: AmplitudeModel,
    settings: OptimizerSettings,
    pilot_energy: float = 1.0,
) -> ParameterVector:
    """
    η₀ = argmin_η ‖μ(η̄) − μ̃(η)‖.

    Поиск по p стартует из p̄ (истинный параметр известен) и ещё n_starts − 1
    возмущённых точек и не выходит из куба полушириной basin_fraction·‖p̄‖ вокруг p̄.
    Затем полировка с x_tol = polish_x_tol и ньютоновское уточнение по всем пяти
    компонентам.
    """
    weights_true = make_weights(profile, model, WeightMode.TRUE)
    weights_assumed = make_weights(profile, model, WeightMode.ASSUMED)
    mu_true = noise_free_mean(config, eta_true, weights_true, pilot_energy)

    def objective(p: np.ndarray) -> float:
        return concentrated_objective(config, p, mu_true, weights_assumed, pilot_energy)

    box = basin_bounds(eta_true.position, settings.basin_fraction * float(np.linalg.norm(eta_true.position)))
    starts = pseudo_true_starts(eta_true.position, settings.n_starts, settings.start_seed, box)
    best = multi_start(objective, starts, settings, guard_errors=_GEOMETRY_ERRORS, bounds=box)
    polished = local_minimize(
        objective, best.x, settings.model_copy(update={"x_tol": settings.polish_x_tol}), _GEOMETRY_ERRORS, box
    )
    p0 = polished.x
    eta0 = ParameterVector.from_alpha(optimal_alpha(config, p0, mu_true, weights_assumed, pilot_energy), p0)
    eta0 = _newton_polish(config, eta0, mu_true, weights_assumed, pilot_energy, settings.newton_iters, box)
    lower, upper = np.array(box).T
    margin = 1e-6 * (upper - lower)
    if np.any(eta0.position - lower < margin) or np.any(upper - eta0.position < margin):
        logger.warning(
            f"Pseudo-true (beta_min={model.beta_min}) sits on the search box boundary; "
            "stationarity does not hold, consider a larger basin_fraction"
        )
    logger.debug(
        f"Pseudo-true (beta_min={model.beta_min}): |p0 - p_true| = "
        f"{np.linalg.norm(eta0.position - eta_true.position):.6g} m, start {best.best_index} won"
    )
    return eta0


def _mismatch_terms(config, eta0, eta_true, profile, model, pilot_energy):
    weights_true = make_weights(profile, model, WeightMode.TRUE)
    weights_assumed = make_weights(profile, model, WeightMode.ASSUMED)
    mu_true = noise_free_mean(config, eta_true, weights_true, pilot_energy)
    eps = _misfit(config, eta0, mu_true, weights_assumed, pilot_energy)
    return eps, weights_assumed


def stationarity_residuals(
    config: SceneConfig,
    eta0: ParameterVector,
    eta_true: ParameterVector,
    profile: PhaseProfile,
    model: AmplitudeModel,
    pilot_energy: float = 1.0,
) -> np.ndarray:
    """|Re{εᴴ ∂μ̃/∂η_i}| / (‖ε‖·‖∂μ̃/∂η_i‖) для каждого i; нули, если ε = 0."""
    eps, weights_assumed = _mismatch_terms(config, eta0, eta_true, profile, model, pilot_energy)
    J = jacobian_mu(config, eta0, weights_assumed, pilot_energy).d_mu
    eps_norm = float(np.linalg.norm(eps))
    if eps_norm == 0.0:
        return np.zeros(J.shape[1])
    col_norms = np.linalg.norm(J, axis=0)
    col_norms[col_norms == 0] = 1.0
    return np.abs(np.real(eps.conj() @ J)) / (eps_norm * col_norms)


def matrix_A(
    config: SceneConfig,
    eta0: ParameterVector,
    eta_true: ParameterVector,
    profile: PhaseProfile,
    model: AmplitudeModel,
    noise_var: float,
    pilot_energy: float = 1.0,
) -> np.ndarray:
    """[A]_ij = (2/N₀) Re{εᴴ ∂²μ̃/∂η_i∂η_j − (∂μ̃/∂η_i)ᴴ ∂μ̃/∂η_j} в η₀."""
    if not noise_var > 0:
        raise InvalidArgumentError(f"noise_var must be positive, got {noise_var}")
    eps, weights_assumed = _mismatch_terms(config, eta0, eta_true, profile, model, pilot_energy)
    J = jacobian_mu(config, eta0, weights_assumed, pilot_energy).d_mu
    H = hessian_mu(config, eta0, weights_assumed, pilot_energy).d2_mu
    A = (2.0 / noise_var) * np.real(np.einsum("t,tij->ij", eps.conj(), H) - J.conj().T @ J)
    return 0.5 * (A + A.T)


def matrix_B(
    config: SceneConfig,
    eta0: ParameterVector,
    eta_true: ParameterVector,
    profile: PhaseProfile,
    model: AmplitudeModel,
    noise_var: float,
    pilot_energy: float = 1.0,
) -> np.ndarray:
    """[B]_ij = (2/N₀)[(2/N₀) Re{εᴴ∂μ̃_i} Re{εᴴ∂μ̃_j} + Re{(∂μ̃_i)ᴴ ∂μ̃_j}] в η₀."""
    if not noise_var > 0:
        raise InvalidArgumentError(f"noise_var must be positive, got {noise_var}")
    eps, weights_assumed = _mismatch_terms(config, eta0, eta_true, profile, model, pilot_energy)
    J = jacobian_mu(config, eta0, weights_assumed, pilot_energy).d_mu
    g = np.real(eps.conj() @ J)
    B = (2.0 / noise_var) * ((2.0 / noise_var) * np.outer(g, g) + np.real(J.conj().T @ J))
    return 0.5 * (B + B.T)


def _equilibrated_condition(M: np.ndarray) -> float:
    scale = np.sqrt(np.abs(np.diag(M)))
    if np.any(scale == 0) or not np.all(np.isfinite(M)):
        return float("inf")
    return float(np.linalg.cond(M / np.outer(scale, scale)))


def _peb(matrix: np.ndarray) -> float:
    return float(np.sqrt(max(np.trace(matrix[POS, POS]), 0.0)))


def assemble_bounds(
    A: np.ndarray,
    B: np.ndarray,
    eta0: ParameterVector,
    eta_true: ParameterVector,
    noise_var: float | None = None,
) -> BoundsReport:
    """MCRB = A⁻¹BA⁻¹ (через два решения линейных систем), LB = MCRB + (η̄−η₀)(η̄−η₀)ᵀ."""
    condition = _equilibrated_condition(A)
    logger.debug(f"cond(A) after diagonal scaling: {condition:.3e}")
    if not condition <= MAX_CONDITION:
        raise IllConditionedError(
            f"matrix A is numerically singular (condition {condition:.3e})",
            condition=condition,
            diagnostics={"diag_A": np.diag(A).tolist(), "raw_condition": float(np.linalg.cond(A))},
        )
    a_inv_b = np.linalg.solve(A, B)
    mcrb = np.linalg.solve(A, a_inv_b.T).T
    mcrb = 0.5 * (mcrb + mcrb.T)
    bias = eta_true.as_array() - eta0.as_array()
    bias_matrix = np.outer(bias, bias)
    lb = mcrb + bias_matrix
    return BoundsReport(
        eta0=eta0,
        eta_true=eta_true,
        A=A,
        B=B,
        mcrb=mcrb,
        lb=lb,
        bias_matrix=bias_matrix,
        peb_mcrb=_peb(mcrb),
        peb_lb=_peb(lb),
        bias_norm=float(np.linalg.norm(bias[POS])),
        condition_A=condition,
        noise_var=noise_var,
    )


def classical_crb(
    config: SceneConfig,
    eta_true: ParameterVector,
    profile: PhaseProfile,
    model: AmplitudeModel,
    noise_var: float,
    pilot_energy: float = 1.0,
) -> CRBReport:
    """CRB при точном знании амплитуд: FIM по производным истинной модели в η̄."""
    if not noise_var > 0:
        raise InvalidArgumentError(f"noise_var must be positive, got {noise_var}")
    weights_true = make_weights(profile, model, WeightMode.TRUE)
    J = jacobian_mu(config, eta_true, weights_true, pilot_energy).d_mu
    fim = (2.0 / noise_var) * np.real(J.conj().T @ J)
    fim = 0.5 * (fim + fim.T)
    condition = _equilibrated_condition(fim)
    if not condition <= MAX_CONDITION:
        raise IllConditionedError(
            f"Fisher information matrix is numerically singular (condition {condition:.3e})",
            condition=condition,
            diagnostics={"diag_fim": np.diag(fim).tolist()},
        )
    crb = np.linalg.solve(fim, np.eye(fim.shape[0]))
    crb = 0.5 * (crb + crb.T)
    return CRBReport(fim=fim, crb=crb, peb_crb=_peb(crb), condition_fim=condition)


def bounds_at_noise(
    config: SceneConfig,
    eta0: ParameterVector,
    eta_true: ParameterVector,
    profile: PhaseProfile,
    model: AmplitudeModel,
    noise_var: float,
    pilot_energy: float = 1.0,
) -> BoundsReport:
    A = matrix_A(config, eta0, eta_true, profile, model, noise_var, pilot_energy)
    B = matrix_B(config, eta0, eta_true, profile, model, noise_var, pilot_energy)
    return assemble_bounds(A, B, eta0, eta_true, noise_var)


def evaluate_bounds(
    config: SceneConfig,
    eta_true: ParameterVector,
    profile: PhaseProfile,
    model: AmplitudeModel,
    snr_db: float,
    settings: OptimizerSettings,
    pilot_energy: float = 1.0,
    eta0: ParameterVector | None = None,
) -> BoundsReport:
    """
    Одна ячейка (профиль, β_min, SNR). η₀ не зависит от N₀, поэтому его можно
    передать готовым и переиспользовать по всей SNR-развёртке.
    """
    if eta0 is None:
        eta0 = pseudo_true(config, eta_true, profile, model, settings, pilot_energy)
    weights_true = make_weights(profile, model, WeightMode.TRUE)
    noise_var = noise_var_for_snr(config, eta_true, weights_true, snr_db, pilot_energy)
    return bounds_at_noise(config, eta0, eta_true, profile, model, noise_var, pilot_energy)
