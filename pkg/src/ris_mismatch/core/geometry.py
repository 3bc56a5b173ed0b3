import logging
from typing import Sequence

import numpy as np

from ris_mismatch.config import SPEED_OF_LIGHT
from ris_mismatch.exceptions import InvalidArgumentError, SingularGeometryError
from ris_mismatch.models.scene import SceneConfig, as_point

logger = logging.getLogger(__name__)

# расстояние до элемента, ниже которого точка считается совпавшей с ним
_COINCIDENCE_TOL = 1e-12


def build_ris_grid(rows: int, cols: int, spacing: float, center: Sequence[float]) -> np.ndarray:
    """
    Центрированная прямоугольная решётка в плоскости z = center.z.

    Строки идут вдоль локальной оси x, столбцы: вдоль y; порядок row-major:
    m = i * cols + j.
    """
    if rows < 1 or cols < 1:
        raise InvalidArgumentError(f"grid dimensions must be >= 1, got {rows}x{cols}")
    if not spacing > 0:
        raise InvalidArgumentError(f"spacing must be positive, got {spacing}")
    center = as_point(center)
    xs = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    ys = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    grid = np.stack([gx.ravel(), gy.ravel(), np.zeros(rows * cols)], axis=1)
    return grid + center


def ue_position(distance: float, direction: Sequence[float], origin: Sequence[float] = (0, 0, 0)) -> np.ndarray:
    """Точка на расстоянии distance от origin вдоль direction."""
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise InvalidArgumentError("UE direction must be non-zero")
    return as_point(origin) + distance * direction / norm


def build_scene(
    *,
    rows: int,
    cols: int,
    p_bs: Sequence[float],
    p_ue: Sequence[float],
    carrier_hz: float | None = None,
    wavelength_m: float | None = None,
    spacing_m: float | None = None,
    p_ris: Sequence[float] = (0.0, 0.0, 0.0),
) -> SceneConfig:
    """Собирает SceneConfig: недостающую из (несущая, длина волны) вычисляет, шаг по умолчанию λ/2."""
    if carrier_hz is None and wavelength_m is None:
        raise InvalidArgumentError("either carrier_hz or wavelength_m is required")
    if wavelength_m is None:
        wavelength_m = SPEED_OF_LIGHT / carrier_hz
    if spacing_m is None:
        spacing_m = wavelength_m / 2.0
    positions = build_ris_grid(rows, cols, spacing_m, p_ris)
    scene = SceneConfig(
        carrier_hz=carrier_hz,
        wavelength_m=wavelength_m,
        ris_rows=rows,
        ris_cols=cols,
        spacing_m=spacing_m,
        p_ris=p_ris,
        p_bs=p_bs,
        p_ue_true=p_ue,
        element_positions=positions,
    )
    logger.debug(
        f"Scene built: M={scene.num_elements}, lambda={scene.wavelength_m:.6g} m, "
        f"UE distance {scene.ue_distance:.4g} m"
    )
    return scene


def with_ue(config: SceneConfig, p_ue: Sequence[float]) -> SceneConfig:
    """Та же сцена с другой истинной позицией UE."""
    return config.model_copy(update={"p_ue_true": as_point(p_ue)})


def steering_vector(config: SceneConfig, p: np.ndarray) -> np.ndarray:
    """
    Ближнепольный вектор RIS: [a(p)]_m = exp(−j2π(‖p−p_m‖ − ‖p−p_RIS‖)/λ).

    p может быть (3,) или (K, 3); результат (M,) или (K, M).
    """
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    d_elem = np.linalg.norm(pts[:, None, :] - config.element_positions[None, :, :], axis=-1)
    if np.any(d_elem < _COINCIDENCE_TOL):
        raise SingularGeometryError("position coincides with a RIS element")
    d_ref = np.linalg.norm(pts - config.p_ris, axis=-1)
    a = np.exp(-1j * config.wavenumber * (d_elem - d_ref[:, None]))
    return a[0] if single else a


def bs_steering(config: SceneConfig) -> np.ndarray:
    cached = config._bs_steering
    if cached is None:
        cached = steering_vector(config, config.p_bs)
        cached.setflags(write=False)
        config._bs_steering = cached
    return cached


def combined_response(config: SceneConfig, p: np.ndarray) -> np.ndarray:
    """b(p) = a(p) ⊙ a(p_BS)."""
    return steering_vector(config, p) * bs_steering(config)
