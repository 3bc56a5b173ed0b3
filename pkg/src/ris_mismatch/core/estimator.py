"""
MML-оценка позиции UE при предполагаемой (единичной) амплитудной модели.

Инициализация: разложение Якоби-Ангера вектора RIS даёт разделимую по углам
структуру a ≈ Gᵀ(ϑ)h(φ), по которой выполняются два одномерных поиска
(сначала азимут с профилированием угла места, затем угол места).
"""
import logging
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import jv

from ris_mismatch.config import EstimatorSettings, OptimizerSettings
from ris_mismatch.core.bounds import concentrated_objective, optimal_alpha
from ris_mismatch.core.geometry import bs_steering, steering_vector
from ris_mismatch.core.optimizer import local_minimize, multi_start
from ris_mismatch.core.ris_model import make_weights
from ris_mismatch.core.signal import noise_free_mean, noise_var_for_snr, simulate
from ris_mismatch.exceptions import (
    DegenerateChannelError,
    InvalidArgumentError,
    NoInitError,
    NoSolutionError,
    SingularGeometryError,
    UnsupportedRangeError,
)
from ris_mismatch.models.estimation import AngleEstimate, EstimationResult, RmseResult, TrialRecord
from ris_mismatch.models.ris import AmplitudeModel, PhaseProfile, WeightMode
from ris_mismatch.models.scene import SceneConfig
from ris_mismatch.models.signal import ObservationSet, ParameterVector
from ris_mismatch.utils.parallel import run_cells
from ris_mismatch.utils.seeding import NOISE, STARTS, derive_seed, generator

logger = logging.getLogger(__name__)

MAX_BESSEL_ORDER = 64
MAX_BESSEL_ARGUMENT = 1e5
TRIAL_COLUMNS = ["trial", "snr_db", "beta_min", "error_m", "residual", "start_used"]

_GEOMETRY_ERRORS = (SingularGeometryError, DegenerateChannelError)
# jⁿ без ошибок округления комплексной степени
_J_POWERS = (1.0 + 0j, 1j, -1.0 + 0j, -1j)
_ASSUMED = AmplitudeModel(beta_min=1.0)


def bessel_j(n: int, x):
    """J_n(x): функция Бесселя первого рода целого порядка; x скаляр или массив."""
    if int(n) != n or abs(n) > MAX_BESSEL_ORDER:
        raise UnsupportedRangeError(f"Bessel order must be an integer with |n| <= {MAX_BESSEL_ORDER}, got {n}")
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > MAX_BESSEL_ARGUMENT):
        raise UnsupportedRangeError(f"Bessel argument must be finite with |x| <= {MAX_BESSEL_ARGUMENT:g}")
    value = jv(int(n), arr)
    return float(value) if value.ndim == 0 else value


def _polar(config: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """(‖p_m − p_RIS‖, ψ_m) в плоскости RIS; для элемента в центре ψ = 0."""
    q = config.element_positions - config.p_ris
    radius = np.hypot(q[:, 0], q[:, 1])
    psi = np.where(radius > 0, np.arctan2(q[:, 1], q[:, 0]), 0.0)
    return radius, psi


def jacobi_matrix(config: SceneConfig, elevation: float, order: int) -> np.ndarray:
    """[G(ϑ)]_{n,m} = jⁿ J_n(k r_m sin ϑ) e^{−jnψ_m}, n = −N..N; форма (2N+1, M)."""
    if order < 1:
        raise InvalidArgumentError(f"expansion order must be >= 1, got {order}")
    radius, psi = _polar(config)
    z = config.wavenumber * radius * np.sin(elevation)
    return np.stack(
        [_J_POWERS[n % 4] * bessel_j(n, z) * np.exp(-1j * n * psi) for n in range(-order, order + 1)]
    )


def jacobi_harmonics(azimuth, order: int) -> np.ndarray:
    """h_n(φ) = e^{jnφ}; для массива азимутов: форма (K, 2N+1)."""
    n = np.arange(-order, order + 1)
    return np.exp(1j * np.multiply.outer(np.asarray(azimuth, dtype=float), n))


def jacobi_basis(config: SceneConfig, elevation: float, azimuth: float, order: int) -> np.ndarray:
    """Приближение a(p) ≈ Gᵀ(ϑ)h(φ) дальнепольной частью вектора RIS."""
    return jacobi_harmonics(azimuth, order) @ jacobi_matrix(config, elevation, order)


def _wrap_angles(elevation: float, azimuth: float) -> tuple[float, float]:
    elevation = float(elevation)
    if elevation < 0:
        elevation, azimuth = -elevation, azimuth + np.pi
    if elevation > np.pi:
        elevation, azimuth = 2 * np.pi - elevation, azimuth + np.pi
    azimuth = float((azimuth + np.pi) % (2 * np.pi) - np.pi)
    if azimuth >= np.pi:
        azimuth = -np.pi
    return min(max(elevation, 0.0), np.pi), azimuth


def _normalized_fit(numerator: np.ndarray, energy: np.ndarray, y_energy: float) -> np.ndarray:
    """|cᴴy|²/(‖c‖²‖y‖²) ∈ [0, 1]; направления с нулевым откликом получают 0."""
    energy = np.asarray(energy, dtype=float)
    safe = np.where(energy > 0, energy, 1.0)
    return np.where(energy > 0, numerator / (safe * y_energy), 0.0)


class AngleSearch:
    """
    Предвычисленный базис двухшагового поиска для пары (сцена, профиль).

    X(ϑ) = G(ϑ)Vᵀ, где V = w̃ ⊙ a(p_BS)·s: отклик с учётом профиля; для
    c(ϑ, φ) = Xᵀ(ϑ)h(φ) корреляция с y и энергия ‖c‖² считаются через
    (2N+1)-мерные величины, без пересчёта по элементам RIS.
    """

    def __init__(
        self,
        config: SceneConfig,
        profile: PhaseProfile,
        order: int,
        settings: EstimatorSettings | None = None,
        pilot_energy: float = 1.0,
    ):
        if order < 1:
            raise InvalidArgumentError(f"expansion order must be >= 1, got {order}")
        if profile.n_elements != config.num_elements:
            raise InvalidArgumentError(
                f"profile has {profile.n_elements} elements, scene has {config.num_elements}"
            )
        self.config = config
        self.order = order
        self.settings = settings or EstimatorSettings()
        weights = make_weights(profile, _ASSUMED, WeightMode.ASSUMED)
        self._response = weights * bs_steering(config)[None, :] * np.sqrt(pilot_energy)
        q = config.element_positions - config.p_ris
        self._qx, self._qy = q[:, 0], q[:, 1]

        s = self.settings
        self.azimuths = -np.pi + 2 * np.pi * np.arange(s.azimuth_points) / s.azimuth_points
        self.coarse_elevations = np.linspace(0.0, np.pi / 2, s.coarse_elevation_points)
        self.elevations = np.linspace(0.0, np.pi / 2, s.elevation_points)
        self._harmonics = jacobi_harmonics(self.azimuths, order)

        self._x_coarse, gram_coarse = self._project(self.coarse_elevations)
        self._x_fine, self._gram_fine = self._project(self.elevations)
        h = self._harmonics
        self._energy_coarse = np.real(np.einsum("kn,enm,km->ek", h.conj(), gram_coarse, h))
        logger.debug(
            f"Angle search basis ready: N={order}, {s.azimuth_points} azimuths, "
            f"{s.coarse_elevation_points}/{s.elevation_points} elevations, T={profile.n_transmissions}"
        )

    def _project(self, elevations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.stack([jacobi_matrix(self.config, el, self.order) @ self._response.T for el in elevations])
        # R[n, m] = Σ_t conj(X[n,t]) X[m,t], так что ‖c‖² = hᴴRh
        gram = np.einsum("ent,emt->enm", x.conj(), x)
        return x, gram

    def jacobi_search(self, y: np.ndarray) -> AngleEstimate:
        """Два одномерных поиска по сеткам: азимут (угол места профилирован), затем угол места."""
        y_energy = float(np.real(np.vdot(y, y)))
        corr = np.einsum("ent,t->en", self._x_coarse.conj(), y)
        numerator = np.abs(corr @ self._harmonics.conj().T) ** 2
        fit = _normalized_fit(numerator, self._energy_coarse, y_energy)
        k_best = int(np.argmax(fit.max(axis=0)))
        azimuth = float(self.azimuths[k_best])

        h = self._harmonics[k_best]
        corr = np.einsum("ent,t->en", self._x_fine.conj(), y)
        numerator = np.abs(corr @ h.conj()) ** 2
        energy = np.real(np.einsum("n,enm,m->e", h.conj(), self._gram_fine, h))
        fit = _normalized_fit(numerator, energy, y_energy)
        e_best = int(np.argmax(fit))
        return AngleEstimate(elevation=float(self.elevations[e_best]), azimuth=azimuth, objective=float(fit[e_best]))

    def plane_wave_fit(self, y: np.ndarray, elevation, azimuth, chunk: int = 256) -> np.ndarray:
        """Нормированная подгонка y плоской волной по всей апертуре для массивов углов."""
        el = np.atleast_1d(np.asarray(elevation, dtype=float))
        az = np.atleast_1d(np.asarray(azimuth, dtype=float))
        y_energy = float(np.real(np.vdot(y, y)))
        k = self.config.wavenumber
        out = np.empty(el.size)
        for start in range(0, el.size, chunk):
            sl = slice(start, start + chunk)
            st = np.sin(el[sl])[:, None]
            phase = k * st * (np.cos(az[sl])[:, None] * self._qx + np.sin(az[sl])[:, None] * self._qy)
            c = np.exp(1j * phase) @ self._response.T  # (K, T)
            numerator = np.abs(c.conj() @ y) ** 2
            out[sl] = _normalized_fit(numerator, np.sum(np.abs(c) ** 2, axis=1), y_energy)
        return out

    def refine(self, y: np.ndarray, angles: AngleEstimate) -> AngleEstimate:
        """Локальная сетка вокруг оценки Якоби-Ангера и полировка симплексом."""
        s = self.settings
        grid_el = np.clip(angles.elevation + np.linspace(-s.refine_window, s.refine_window, s.refine_points), 0.0, np.pi / 2)
        grid_az = angles.azimuth + np.linspace(-s.refine_window, s.refine_window, s.refine_points)
        el, az = np.meshgrid(grid_el, grid_az, indexing="ij")
        fit = self.plane_wave_fit(y, el.ravel(), az.ravel())
        best = int(np.argmax(fit))
        x0 = np.array([el.ravel()[best], az.ravel()[best]])

        def objective(x: np.ndarray) -> float:
            return -float(self.plane_wave_fit(y, x[0], x[1])[0])

        polished = local_minimize(
            objective, x0, OptimizerSettings(x_tol=1e-6, initial_step=1e-3, min_step=1e-3, gradient_refine=False)
        )
        elevation, azimuth = _wrap_angles(polished.x[0], polished.x[1])
        return AngleEstimate(elevation=elevation, azimuth=azimuth, objective=-polished.f)

    def estimate(self, y: np.ndarray) -> AngleEstimate:
        y = np.asarray(y, dtype=complex)
        if y.shape[0] != self._response.shape[0]:
            raise InvalidArgumentError(f"expected {self._response.shape[0]} observations, got {y.shape[0]}")
        if y.shape[0] < 2:
            raise InvalidArgumentError("angle initialization needs T >= 2")
        if not np.any(y):
            raise NoInitError("observations are identically zero")
        angles = self.jacobi_search(y)
        if self.settings.refine_angles:
            angles = self.refine(y, angles)
        logger.debug(
            f"Angles: elevation {np.degrees(angles.elevation):.3f} deg, "
            f"azimuth {np.degrees(angles.azimuth):.3f} deg, fit {angles.objective:.4f}"
        )
        return angles


def init_angles(
    config: SceneConfig,
    observations: ObservationSet,
    profile: PhaseProfile,
    order: int = 5,
    settings: EstimatorSettings | None = None,
) -> AngleEstimate:
    search = AngleSearch(config, profile, order, settings, observations.pilot_energy)
    return search.estimate(observations.y)


def distance_starts(
    direction: np.ndarray, origin: np.ndarray, n_starts: int, max_distance: float, seed: int
) -> list[np.ndarray]:
    """p_RIS + d̃·u, d̃ ~ U(0, max_distance): по одному на старт."""
    rng = generator(seed, STARTS)
    return [origin + d * direction for d in rng.uniform(0.0, max_distance, size=n_starts)]


def range_scan_start(
    config: SceneConfig,
    y: np.ndarray,
    direction: np.ndarray,
    assumed_weights: np.ndarray,
    settings: EstimatorSettings,
    pilot_energy: float = 1.0,
) -> np.ndarray:
    """Лучшая по концентрированной функции точка на луче из центра RIS (логарифмическая сетка дальностей)."""
    distances = np.geomspace(settings.range_scan_min, settings.max_start_distance, settings.range_scan_points)
    points = config.p_ris + distances[:, None] * direction
    b = steering_vector(config, points) * bs_steering(config)
    c = (b @ assumed_weights.T) * np.sqrt(pilot_energy)  # (K, T)
    fit = _normalized_fit(np.abs(c.conj() @ y) ** 2, np.sum(np.abs(c) ** 2, axis=1), 1.0)
    return points[int(np.argmax(fit))]


def mml_estimate(
    config: SceneConfig,
    observations: ObservationSet,
    profile: PhaseProfile,
    settings: OptimizerSettings,
    estimator: EstimatorSettings | None = None,
    seed: int = 0,
    search: AngleSearch | None = None,
) -> EstimationResult:
    """
    η̂ = argmin_η ‖y − μ̃(η)‖: усиление исключено в замкнутой форме, поиск по p
    из стартов вдоль оценённого направления.
    """
    estimator = estimator or EstimatorSettings()
    y = observations.y
    if y.shape[0] != profile.n_transmissions:
        raise InvalidArgumentError(f"profile has {profile.n_transmissions} transmissions, y has {y.shape[0]}")
    if search is None:
        search = AngleSearch(config, profile, estimator.jacobi_order, estimator, observations.pilot_energy)
    angles = search.estimate(y)
    direction = angles.direction()

    weights_assumed = make_weights(profile, _ASSUMED, WeightMode.ASSUMED)
    starts = distance_starts(direction, config.p_ris, estimator.n_distance_starts, estimator.max_start_distance, seed)
    if estimator.range_scan:
        starts.append(range_scan_start(config, y, direction, weights_assumed, estimator, observations.pilot_energy))

    def objective(p: np.ndarray) -> float:
        return concentrated_objective(config, p, y, weights_assumed, observations.pilot_energy)

    best = multi_start(objective, starts, settings, guard_errors=_GEOMETRY_ERRORS)
    alpha = optimal_alpha(config, best.x, y, weights_assumed, observations.pilot_energy)
    eta_hat = ParameterVector.from_alpha(alpha, best.x)
    residual = float(np.linalg.norm(y - noise_free_mean(config, eta_hat, weights_assumed, observations.pilot_energy)))
    return EstimationResult(
        eta_hat=eta_hat, residual=residual, angles=angles, starts_log=best.log, best_start=best.best_index
    )


class _TrialContext(NamedTuple):
    config: SceneConfig
    eta_true: ParameterVector
    profile: PhaseProfile
    model: AmplitudeModel
    snr_db: float
    noise_var: float
    seed: int
    settings: OptimizerSettings
    estimator: EstimatorSettings
    pilot_energy: float
    search: AngleSearch


def _run_trial(ctx: _TrialContext, trial: int) -> TrialRecord:
    weights_true = make_weights(ctx.profile, ctx.model, WeightMode.TRUE)
    # испытание, где все старты разошлись, повторяется один раз с новым шумом
    for redraw in range(2):
        rng = generator(ctx.seed, NOISE, trial, redraw)
        observations = simulate(ctx.config, ctx.eta_true, weights_true, ctx.noise_var, rng, ctx.pilot_energy)
        try:
            result = mml_estimate(
                ctx.config,
                observations,
                ctx.profile,
                ctx.settings,
                ctx.estimator,
                seed=derive_seed(ctx.seed, STARTS, trial, redraw),
                search=ctx.search,
            )
        except (NoSolutionError, NoInitError) as e:
            logger.warning(f"Trial {trial} (redraw {redraw}) failed: {e}")
            continue
        return TrialRecord(
            trial=trial,
            snr_db=ctx.snr_db,
            beta_min=ctx.model.beta_min,
            error_m=float(np.linalg.norm(result.eta_hat.position - ctx.eta_true.position)),
            residual=result.residual,
            start_used=result.best_start,
        )
    return TrialRecord(
        trial=trial,
        snr_db=ctx.snr_db,
        beta_min=ctx.model.beta_min,
        error_m=float("nan"),
        residual=float("nan"),
        start_used=-1,
        failed=True,
    )


def _run_trial_chunk(args: tuple[_TrialContext, Sequence[int]]) -> list[TrialRecord]:
    ctx, trials = args
    return [_run_trial(ctx, int(t)) for t in trials]


def rmse_from_trials(trials: Sequence[TrialRecord]) -> RmseResult:
    """RMSE по успешным испытаниям; стандартная ошибка: дельта-методом от среднего квадрата."""
    errors = np.array([t.error_m for t in trials if not t.failed])
    n_failures = len(trials) - errors.size
    if errors.size == 0:
        logger.warning(f"All {len(trials)} trials failed")
        return RmseResult(rmse=float("nan"), stderr=float("nan"), n_trials=len(trials), n_failures=n_failures, trials=list(trials))
    squared = errors**2
    rmse = float(np.sqrt(squared.mean()))
    if errors.size > 1 and rmse > 0:
        stderr = float(squared.std(ddof=1) / np.sqrt(errors.size) / (2 * rmse))
    else:
        stderr = 0.0
    return RmseResult(rmse=rmse, stderr=stderr, n_trials=len(trials), n_failures=n_failures, trials=list(trials))


def monte_carlo_rmse(
    config: SceneConfig,
    eta_true: ParameterVector,
    profile: PhaseProfile,
    model: AmplitudeModel,
    snr_db: float,
    n_trials: int,
    seed: int,
    settings: OptimizerSettings,
    estimator: EstimatorSettings | None = None,
    pilot_energy: float = 1.0,
    workers: int = 1,
    search: AngleSearch | None = None,
) -> RmseResult:
    """
    √(среднее ‖p̂ − p̄‖²) по n_trials реализациям шума. Поток шума испытания i
    определяется (seed, i), поэтому результат не зависит от числа воркеров.
    """
    if n_trials < 1:
        raise InvalidArgumentError(f"n_trials must be >= 1, got {n_trials}")
    estimator = estimator or EstimatorSettings()
    weights_true = make_weights(profile, model, WeightMode.TRUE)
    noise_var = noise_var_for_snr(config, eta_true, weights_true, snr_db, pilot_energy)
    if search is None:
        search = AngleSearch(config, profile, estimator.jacobi_order, estimator, pilot_energy)
    ctx = _TrialContext(
        config, eta_true, profile, model, float(snr_db), noise_var, seed, settings, estimator, pilot_energy, search
    )
    chunks = [(ctx, part) for part in np.array_split(np.arange(n_trials), max(1, min(workers, n_trials)))]
    trials = [record for chunk in run_cells(_run_trial_chunk, chunks, workers) for record in chunk]
    result = rmse_from_trials(trials)
    logger.info(
        f"MML beta_min={model.beta_min} SNR={snr_db} dB: RMSE {result.rmse:.6g} m "
        f"(± {result.stderr:.2g}), {result.n_failures}/{n_trials} failed"
    )
    return result
