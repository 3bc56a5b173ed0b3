"""
Развёртки экспериментов: LB против β_min, средний LB против размера RIS,
MML/LB/MCRB против SNR, отчёт по псевдоистинному параметру и проверка инвариантов.

Каждая функция возвращает строки (dict) в детерминированном порядке; запись
на диск: в utils.io.write_table.
"""
import logging
from typing import NamedTuple

import numpy as np

from ris_mismatch.config import ExperimentConfig
from ris_mismatch.core.bounds import (
    bounds_at_noise,
    classical_crb,
    matrix_A,
    matrix_B,
    pseudo_true,
    stationarity_residuals,
)
from ris_mismatch.core.derivatives import finite_diff_check
from ris_mismatch.core.estimator import TRIAL_COLUMNS, AngleSearch, monte_carlo_rmse
from ris_mismatch.core.geometry import build_scene, ue_position
from ris_mismatch.core.ris_model import make_weights, random_profile
from ris_mismatch.core.signal import kl_divergence, kl_divergence_monte_carlo, noise_var_for_snr
from ris_mismatch.exceptions import IllConditionedError, NoSolutionError
from ris_mismatch.models.ris import AmplitudeModel, PhaseProfile, WeightMode
from ris_mismatch.models.scene import SceneConfig
from ris_mismatch.models.signal import ParameterVector
from ris_mismatch.models.verification import CheckResult, VerifyReport
from ris_mismatch.utils.parallel import run_cells
from ris_mismatch.utils.seeding import NOISE, PROFILE, derive_seed, generator

logger = logging.getLogger(__name__)

BETA_COLUMNS = ["beta_min", "snr_db", "peb_lb", "peb_mcrb", "bias_norm", "peb_crb_perfect", "profile_seed", "distance_m"]
SIZE_COLUMNS = ["M", "beta_min", "avg_peb_lb", "avg_peb_crb", "n_profiles", "snr_db", "distance_m"]
SNR_COLUMNS = ["snr_db", "beta_min", "rmse", "rmse_stderr", "peb_lb", "peb_mcrb", "bias_norm", "distance_m", "profile_seed"]
SNR_TRIAL_COLUMNS = TRIAL_COLUMNS + ["distance_m", "failed"]
PSEUDO_TRUE_COLUMNS = [
    "distance_m", "beta_min", "snr_db", "profile_seed",
    "peb_lb", "peb_mcrb", "bias_norm", "alpha0_re", "alpha0_im", "p0_x", "p0_y", "p0_z",
    "condition_A", "noise_var", "stationarity",
]

# пороги проверок verify
FD_JACOBIAN_TOL = 1e-5
FD_HESSIAN_TOL = 1e-4
STATIONARITY_TOL = 1e-6
DEGENERACY_POSITION_TOL = 1e-6
DEGENERACY_MATRIX_TOL = 1e-9
DEGENERACY_PEB_TOL = 1e-6
SNR_SCALING_TOL = 1e-6
KL_SIGMAS = 3.0

_NAN_BOUNDS = {"peb_lb": float("nan"), "peb_mcrb": float("nan"), "bias_norm": float("nan")}


# --- Сборка сцены, профиля и модели из конфигурации ---
def experiment_scene(cfg: ExperimentConfig, distance: float, rows: int | None = None, cols: int | None = None) -> SceneConfig:
    s = cfg.scene
    return build_scene(
        rows=rows or s.ris_rows,
        cols=cols or s.ris_cols,
        carrier_hz=s.carrier_hz,
        spacing_m=s.spacing_m,
        p_bs=s.p_bs,
        p_ue=ue_position(distance, s.ue_direction, s.p_ris),
        p_ris=s.p_ris,
    )


def true_parameter(cfg: ExperimentConfig, scene: SceneConfig) -> ParameterVector:
    re, im = cfg.signal.alpha
    return ParameterVector.from_alpha(complex(re, im), scene.p_ue_true)


def profile_seed(cfg: ExperimentConfig, n_elements: int, index: int) -> int:
    return derive_seed(cfg.run.master_seed, PROFILE, n_elements, index)


def experiment_profile(cfg: ExperimentConfig, n_elements: int, index: int) -> PhaseProfile:
    return random_profile(cfg.signal.n_transmissions, n_elements, profile_seed(cfg, n_elements, index))


def amplitude_model(cfg: ExperimentConfig, beta_min: float) -> AmplitudeModel:
    return AmplitudeModel(beta_min=beta_min, phi=cfg.model.phi, kappa=cfg.model.kappa)


def _pseudo_true_or_none(cfg, scene, eta_true, profile, model) -> ParameterVector | None:
    try:
        return pseudo_true(scene, eta_true, profile, model, cfg.run.optimizer, cfg.signal.pilot_energy)
    except NoSolutionError as e:
        logger.warning(f"Pseudo-true search failed (beta_min={model.beta_min}, seed {profile.seed}): {e}")
        return None


def _bounds_row(cfg, scene, eta0, eta_true, profile, model, snr_db) -> dict:
    """peb_lb/peb_mcrb/bias_norm одной ячейки; при вырожденности: NaN и предупреждение."""
    if eta0 is None:
        return dict(_NAN_BOUNDS)
    weights_true = make_weights(profile, model, WeightMode.TRUE)
    noise_var = noise_var_for_snr(scene, eta_true, weights_true, snr_db, cfg.signal.pilot_energy)
    try:
        report = bounds_at_noise(scene, eta0, eta_true, profile, model, noise_var, cfg.signal.pilot_energy)
    except IllConditionedError as e:
        logger.warning(f"Bounds skipped (beta_min={model.beta_min}, SNR={snr_db} dB): {e}")
        return dict(_NAN_BOUNDS)
    return {"peb_lb": report.peb_lb, "peb_mcrb": report.peb_mcrb, "bias_norm": report.bias_norm}


def _crb_value(cfg, scene, eta_true, profile, model, snr_db) -> float:
    weights_true = make_weights(profile, model, WeightMode.TRUE)
    noise_var = noise_var_for_snr(scene, eta_true, weights_true, snr_db, cfg.signal.pilot_energy)
    try:
        return classical_crb(scene, eta_true, profile, model, noise_var, cfg.signal.pilot_energy).peb_crb
    except IllConditionedError as e:
        logger.warning(f"CRB skipped (beta_min={model.beta_min}, SNR={snr_db} dB): {e}")
        return float("nan")


class _Cell(NamedTuple):
    cfg: ExperimentConfig
    distance_m: float
    rows: int
    cols: int
    profile_index: int


def _profile_cell(cell: _Cell) -> list[dict]:
    """Все (β_min, SNR) для одного профиля: η₀ ищется один раз на β_min."""
    cfg = cell.cfg
    scene = experiment_scene(cfg, cell.distance_m, cell.rows, cell.cols)
    eta_true = true_parameter(cfg, scene)
    profile = experiment_profile(cfg, scene.num_elements, cell.profile_index)
    out = []
    for beta_min in cfg.model.beta_min:
        model = amplitude_model(cfg, beta_min)
        eta0 = _pseudo_true_or_none(cfg, scene, eta_true, profile, model)
        for snr_db in cfg.signal.snr_db:
            out.append(
                {
                    "beta_min": beta_min,
                    "snr_db": snr_db,
                    **_bounds_row(cfg, scene, eta0, eta_true, profile, model, snr_db),
                    "peb_crb_perfect": _crb_value(cfg, scene, eta_true, profile, model, snr_db),
                    "profile_seed": profile.seed,
                    "distance_m": cell.distance_m,
                    "M": scene.num_elements,
                }
            )
    logger.debug(f"Cell done: d={cell.distance_m} m, M={scene.num_elements}, profile {cell.profile_index}")
    return out


def _sorted(rows: list[dict], keys: tuple[str, ...]) -> list[dict]:
    # сортировка устойчивая: внутри ключа сохраняется порядок профилей
    return sorted(rows, key=lambda r: tuple(r[k] for k in keys))


# --- 1. LB против β_min ---
def run_sweep_beta(cfg: ExperimentConfig) -> list[dict]:
    """Строка на каждую комбинацию (β_min, SNR, профиль, дальность)."""
    s = cfg.scene
    cells = [
        _Cell(cfg, d, s.ris_rows, s.ris_cols, j)
        for d in s.ue_distance
        for j in range(cfg.run.effective_profiles)
    ]
    logger.info(f"sweep-beta: {len(cells)} profile cells on {cfg.run.workers} worker(s)")
    rows = [row for chunk in run_cells(_profile_cell, cells, cfg.run.workers) for row in chunk]
    return [{k: r[k] for k in BETA_COLUMNS} for r in _sorted(rows, ("distance_m", "beta_min", "snr_db"))]


# --- 2. Средний LB против размера RIS ---
def run_sweep_size(cfg: ExperimentConfig) -> list[dict]:
    """Квадратные RIS side×side; усреднение по профилям (невычислимые ячейки пропускаются)."""
    s = cfg.scene
    cells = [
        _Cell(cfg, d, side, side, j)
        for d in s.ue_distance
        for side in s.ris_sizes
        for j in range(cfg.run.effective_profiles)
    ]
    logger.info(f"sweep-size: {len(cells)} profile cells on {cfg.run.workers} worker(s)")
    rows = [row for chunk in run_cells(_profile_cell, cells, cfg.run.workers) for row in chunk]

    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["distance_m"], r["M"], r["beta_min"], r["snr_db"]), []).append(r)
    out = []
    for (distance, m, beta_min, snr_db), members in sorted(groups.items()):
        lb = np.array([r["peb_lb"] for r in members])
        crb = np.array([r["peb_crb_perfect"] for r in members])
        valid = np.isfinite(lb) & np.isfinite(crb)
        out.append(
            {
                "M": m,
                "beta_min": beta_min,
                "avg_peb_lb": float(lb[valid].mean()) if valid.any() else float("nan"),
                "avg_peb_crb": float(crb[valid].mean()) if valid.any() else float("nan"),
                "n_profiles": int(valid.sum()),
                "snr_db": snr_db,
                "distance_m": distance,
            }
        )
    return out


# --- 3. MML против SNR (профиль с индексом 0) ---
def run_sweep_snr(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """
    Возвращает (строки развёртки, записи отдельных испытаний). Испытания
    распараллеливаются внутри monte_carlo_rmse; поток шума ячейки задаётся
    (master_seed, индексы дальности, β_min и SNR).
    """
    rows: list[dict] = []
    trial_rows: list[dict] = []
    pilot = cfg.signal.pilot_energy
    for d_idx, distance in enumerate(cfg.scene.ue_distance):
        scene = experiment_scene(cfg, distance)
        eta_true = true_parameter(cfg, scene)
        profile = experiment_profile(cfg, scene.num_elements, 0)
        search = AngleSearch(scene, profile, cfg.run.estimator.jacobi_order, cfg.run.estimator, pilot)
        for b_idx, beta_min in enumerate(cfg.model.beta_min):
            model = amplitude_model(cfg, beta_min)
            eta0 = _pseudo_true_or_none(cfg, scene, eta_true, profile, model)
            for s_idx, snr_db in enumerate(cfg.signal.snr_db):
                result = monte_carlo_rmse(
                    scene,
                    eta_true,
                    profile,
                    model,
                    snr_db,
                    cfg.run.effective_trials,
                    derive_seed(cfg.run.master_seed, NOISE, d_idx, b_idx, s_idx),
                    cfg.run.optimizer,
                    cfg.run.estimator,
                    pilot,
                    workers=cfg.run.workers,
                    search=search,
                )
                rows.append(
                    {
                        "snr_db": snr_db,
                        "beta_min": beta_min,
                        "rmse": result.rmse,
                        "rmse_stderr": result.stderr,
                        **_bounds_row(cfg, scene, eta0, eta_true, profile, model, snr_db),
                        "distance_m": distance,
                        "profile_seed": profile.seed,
                    }
                )
                trial_rows.extend({**t.model_dump(), "distance_m": distance} for t in result.trials)
    rows = _sorted(rows, ("distance_m", "beta_min", "snr_db"))
    trial_rows = _sorted(trial_rows, ("distance_m", "beta_min", "snr_db", "trial"))
    return [{k: r[k] for k in SNR_COLUMNS} for r in rows], [{k: r[k] for k in SNR_TRIAL_COLUMNS} for r in trial_rows]


# --- 4. Псевдоистинный параметр и полный отчёт по границам ---
def run_pseudo_true(cfg: ExperimentConfig) -> list[dict]:
    out = []
    pilot = cfg.signal.pilot_energy
    for distance in cfg.scene.ue_distance:
        scene = experiment_scene(cfg, distance)
        eta_true = true_parameter(cfg, scene)
        profile = experiment_profile(cfg, scene.num_elements, 0)
        for beta_min in cfg.model.beta_min:
            model = amplitude_model(cfg, beta_min)
            eta0 = _pseudo_true_or_none(cfg, scene, eta_true, profile, model)
            if eta0 is None:
                continue
            stationarity = float(np.max(stationarity_residuals(scene, eta0, eta_true, profile, model, pilot)))
            weights_true = make_weights(profile, model, WeightMode.TRUE)
            for snr_db in cfg.signal.snr_db:
                noise_var = noise_var_for_snr(scene, eta_true, weights_true, snr_db, pilot)
                try:
                    report = bounds_at_noise(scene, eta0, eta_true, profile, model, noise_var, pilot)
                except IllConditionedError as e:
                    logger.warning(f"Bounds skipped (beta_min={beta_min}, SNR={snr_db} dB): {e}")
                    continue
                out.append(
                    {
                        "distance_m": distance,
                        "beta_min": beta_min,
                        "snr_db": snr_db,
                        "profile_seed": profile.seed,
                        **report.to_record(),
                        "stationarity": stationarity,
                    }
                )
    return out


# --- 5. Проверка инвариантов ---
def _small_scene(cfg: ExperimentConfig, rng: np.random.Generator, rows: int = 3, cols: int = 3) -> SceneConfig:
    direction = rng.normal(size=3)
    direction[2] = abs(direction[2]) + 0.2
    return build_scene(
        rows=rows,
        cols=cols,
        carrier_hz=cfg.scene.carrier_hz,
        p_bs=cfg.scene.p_bs,
        p_ue=ue_position(rng.uniform(0.05, 0.5), direction, cfg.scene.p_ris),
        p_ris=cfg.scene.p_ris,
    )


def _check(name: str, measured: float, threshold: float, detail: str = "") -> CheckResult:
    passed = bool(np.isfinite(measured) and measured < threshold)
    return CheckResult(name=name, passed=passed, measured=float(measured), threshold=threshold, detail=detail)


def _derivative_checks(cfg: ExperimentConfig, n_scenes: int = 20) -> list[CheckResult]:
    worst_jac = worst_hess = 0.0
    for i in range(n_scenes):
        rng = generator(cfg.run.master_seed, "verify-derivatives", i)
        scene = _small_scene(cfg, rng)
        profile = random_profile(4, scene.num_elements, derive_seed(cfg.run.master_seed, PROFILE, "verify", i))
        model = AmplitudeModel(beta_min=rng.uniform(0.0, 1.0), phi=cfg.model.phi, kappa=cfg.model.kappa)
        eta = ParameterVector.from_alpha(complex(*rng.normal(size=2)), scene.p_ue_true)
        for mode in WeightMode:
            report = finite_diff_check(scene, eta, make_weights(profile, model, mode), pilot_energy=cfg.signal.pilot_energy)
            worst_jac = max(worst_jac, report.jacobian_max)
            worst_hess = max(worst_hess, report.hessian_max)
    return [
        _check("jacobian_finite_diff", worst_jac, FD_JACOBIAN_TOL, f"{n_scenes} random scenes"),
        _check("hessian_finite_diff", worst_hess, FD_HESSIAN_TOL, f"{n_scenes} random scenes"),
    ]


def _kl_check(cfg: ExperimentConfig, n_draws: int = 20000) -> CheckResult:
    rng = generator(cfg.run.master_seed, "verify-kl")
    scene = _small_scene(cfg, rng)
    profile = random_profile(3, scene.num_elements, derive_seed(cfg.run.master_seed, PROFILE, "verify-kl"))
    model = AmplitudeModel(beta_min=0.5, phi=cfg.model.phi, kappa=cfg.model.kappa)
    eta_true = ParameterVector.from_alpha(1.0, scene.p_ue_true)
    eta = ParameterVector.from_alpha(0.8 + 0.1j, scene.p_ue_true + rng.normal(scale=1e-3, size=3))
    w_true = make_weights(profile, model, WeightMode.TRUE)
    w_assumed = make_weights(profile, model, WeightMode.ASSUMED)
    noise_var = noise_var_for_snr(scene, eta_true, w_true, 10.0)
    closed = kl_divergence(scene, eta_true, eta, w_true, w_assumed, noise_var)
    estimate, stderr = kl_divergence_monte_carlo(
        scene, eta_true, eta, w_true, w_assumed, noise_var, n_draws, derive_seed(cfg.run.master_seed, NOISE, "verify-kl")
    )
    return _check(
        "kl_closed_form_vs_monte_carlo",
        abs(closed - estimate) / stderr if stderr > 0 else abs(closed - estimate),
        KL_SIGMAS,
        f"closed {closed:.6g}, Monte Carlo {estimate:.6g} ± {stderr:.2g} (in standard errors)",
    )


def _bounds_checks(cfg: ExperimentConfig) -> list[CheckResult]:
    pilot = cfg.signal.pilot_energy
    rng = generator(cfg.run.master_seed, "verify-bounds")
    scene = _small_scene(cfg, rng, rows=5, cols=5)
    profile = random_profile(8, scene.num_elements, derive_seed(cfg.run.master_seed, PROFILE, "verify-bounds"))
    eta_true = ParameterVector.from_alpha(1.0, scene.p_ue_true)
    settings = cfg.run.optimizer
    checks = []

    mismatched = AmplitudeModel(beta_min=0.5, phi=cfg.model.phi, kappa=cfg.model.kappa)
    eta0 = pseudo_true(scene, eta_true, profile, mismatched, settings, pilot)
    stationarity = float(np.max(stationarity_residuals(scene, eta0, eta_true, profile, mismatched, pilot)))
    checks.append(_check("stationarity_at_pseudo_true", stationarity, STATIONARITY_TOL, "beta_min=0.5"))

    w_true = make_weights(profile, mismatched, WeightMode.TRUE)
    low, high = (
        bounds_at_noise(scene, eta0, eta_true, profile, mismatched, noise_var_for_snr(scene, eta_true, w_true, snr, pilot), pilot)
        for snr in (10.0, 30.0)
    )
    ratio = high.peb_mcrb / low.peb_mcrb
    checks.append(_check("mcrb_snr_scaling", abs(ratio / 0.1 - 1.0), SNR_SCALING_TOL, f"ratio {ratio:.9g} per +20 dB"))

    ideal = AmplitudeModel(beta_min=1.0, phi=cfg.model.phi, kappa=cfg.model.kappa)
    eta0 = pseudo_true(scene, eta_true, profile, ideal, settings, pilot)
    checks.append(
        _check(
            "no_mismatch_pseudo_true",
            float(np.linalg.norm(eta0.position - eta_true.position)),
            DEGENERACY_POSITION_TOL,
            "beta_min=1, meters",
        )
    )
    noise_var = noise_var_for_snr(scene, eta_true, make_weights(profile, ideal, WeightMode.TRUE), 30.0, pilot)
    A = matrix_A(scene, eta0, eta_true, profile, ideal, noise_var, pilot)
    B = matrix_B(scene, eta0, eta_true, profile, ideal, noise_var, pilot)
    checks.append(
        _check("no_mismatch_A_plus_B", float(np.linalg.norm(A + B) / np.linalg.norm(A)), DEGENERACY_MATRIX_TOL, "relative")
    )
    report = bounds_at_noise(scene, eta0, eta_true, profile, ideal, noise_var, pilot)
    crb = classical_crb(scene, eta_true, profile, ideal, noise_var, pilot)
    checks.append(
        _check("no_mismatch_lb_equals_crb", abs(report.peb_lb - crb.peb_crb) / crb.peb_crb, DEGENERACY_PEB_TOL, "relative")
    )
    return checks


def run_verify(cfg: ExperimentConfig) -> VerifyReport:
    checks = [*_derivative_checks(cfg), _kl_check(cfg), *_bounds_checks(cfg)]
    report = VerifyReport(checks=checks)
    for c in checks:
        log = logger.info if c.passed else logger.warning
        log(f"verify {c.name}: measured {c.measured:.3e} (threshold {c.threshold:.1e}) {'PASS' if c.passed else 'FAIL'}")
    return report
