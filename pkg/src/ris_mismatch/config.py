# Файл: src/ris_mismatch/config.py

import re
from pathlib import Path
from typing import Literal, Optional

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ris_mismatch.exceptions import ConfigError

SPEED_OF_LIGHT = 299_792_458.0


# --- 1. Настройки оптимизатора (общие для псевдоистинного решения и MML) ---
class OptimizerSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    max_iters: int = Field(2000, gt=0)
    x_tol: float = Field(1e-7, gt=0, description="meters")
    f_tol: float = Field(1e-12, gt=0, description="relative")
    n_starts: int = Field(10, ge=1)
    start_seed: int = Field(0, ge=0)
    # размер начального симплекса: доля ‖x0‖, но не меньше min_step метров
    initial_step: float = Field(0.01, gt=0)
    min_step: float = Field(1e-3, gt=0)
    gradient_refine: bool = True
    polish_x_tol: float = Field(1e-9, gt=0)
    newton_iters: int = Field(5, ge=0)
    # поиск η₀ ограничен кубом вокруг p̄ с полушириной basin_fraction·‖p̄‖
    basin_fraction: float = Field(0.5, gt=0)
    max_workers: int = Field(1, ge=1)


# --- 2. Настройки MML-оценщика ---
class EstimatorSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    jacobi_order: int = Field(5, ge=1)
    azimuth_points: int = Field(721, ge=8)
    elevation_points: int = Field(721, ge=8)
    coarse_elevation_points: int = Field(91, ge=4)
    # локальное уточнение направления по полной апертуре (плоская волна)
    refine_angles: bool = True
    refine_window: float = Field(0.35, gt=0, description="radians, half-width")
    refine_points: int = Field(41, ge=3)
    n_distance_starts: int = Field(10, ge=0)
    max_start_distance: float = Field(1000.0, gt=0)
    range_scan: bool = True
    range_scan_points: int = Field(400, ge=2)
    range_scan_min: float = Field(0.5, gt=0)


# --- 3. Секции файла эксперимента ---
class SceneSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    carrier_hz: float = Field(28e9, gt=0)
    ris_rows: int = Field(50, ge=1)
    ris_cols: int = Field(50, ge=1)
    spacing_m: Optional[float] = Field(None, gt=0, description="default: wavelength / 2")
    p_bs: list[float] = Field(default_factory=lambda: [-5.77, 5.77, 5.77])
    p_ris: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    ue_direction: list[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])
    ue_distance: list[float] = Field(default_factory=lambda: [5.0], min_length=1)
    ris_sizes: list[int] = Field(
        default_factory=lambda: [30, 40, 50, 60, 70, 80, 90, 100], min_length=1
    )

    @field_validator("p_bs", "p_ris", "ue_direction")
    @classmethod
    def _three_vector(cls, v: list[float]) -> list[float]:
        if len(v) != 3:
            raise ValueError("expected a 3-vector")
        return v

    @field_validator("ue_distance")
    @classmethod
    def _positive_distances(cls, v: list[float]) -> list[float]:
        if any(d <= 0 for d in v):
            raise ValueError("distances must be positive")
        return v

    @field_validator("ris_sizes")
    @classmethod
    def _positive_sizes(cls, v: list[int]) -> list[int]:
        if any(n < 1 for n in v):
            raise ValueError("RIS side lengths must be >= 1")
        return v


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    beta_min: list[float] = Field(
        default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0], min_length=1
    )
    phi: float = Field(0.0, ge=0)
    kappa: float = Field(2.0, ge=0)

    @field_validator("beta_min")
    @classmethod
    def _unit_interval(cls, v: list[float]) -> list[float]:
        if any(not 0.0 <= b <= 1.0 for b in v):
            raise ValueError("beta_min values must lie in [0, 1]")
        return v


class SignalSection(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    n_transmissions: int = Field(50, ge=1, alias="T")
    pilot_energy: float = Field(1.0, gt=0, alias="E_s")
    snr_db: list[float] = Field(default_factory=lambda: [20.0, 30.0, 40.0], min_length=1)
    alpha: list[float] = Field(default_factory=lambda: [1.0, 0.0], description="[Re, Im]")

    @field_validator("alpha")
    @classmethod
    def _complex_pair(cls, v: list[float]) -> list[float]:
        if len(v) != 2:
            raise ValueError("alpha must be [re, im]")
        return v


class RunSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    master_seed: int = Field(..., ge=0, lt=2**64)
    n_profiles: int = Field(20, ge=1)
    n_trials: int = Field(100, ge=1)
    full_scale: bool = False
    full_scale_profiles: int = Field(200, ge=1)
    full_scale_trials: int = Field(500, ge=1)
    workers: int = Field(1, ge=1)
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    estimator: EstimatorSettings = Field(default_factory=EstimatorSettings)

    @property
    def effective_profiles(self) -> int:
        return self.full_scale_profiles if self.full_scale else self.n_profiles

    @property
    def effective_trials(self) -> int:
        return self.full_scale_trials if self.full_scale else self.n_trials


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Path = Path("results")
    formats: list[Literal["csv", "dat"]] = Field(default_factory=lambda: ["csv"], min_length=1)


# --- 4. Корневой объект: одна переменная на весь эксперимент ---
class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scene: SceneSection = Field(default_factory=SceneSection)
    model: ModelSection = Field(default_factory=ModelSection)
    signal: SignalSection = Field(default_factory=SignalSection)
    run: RunSection
    output: OutputSection = Field(default_factory=OutputSection)

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        profiles: int | None = None,
        trials: int | None = None,
        out: Path | None = None,
        full_scale: bool | None = None,
        workers: int | None = None,
    ) -> "ExperimentConfig":
        """Применяет флаги CLI поверх значений из файла (CLI > файл > умолчания)."""
        run_patch: dict = {}
        if seed is not None:
            run_patch["master_seed"] = seed
        if profiles is not None:
            run_patch["n_profiles"] = profiles
        if trials is not None:
            run_patch["n_trials"] = trials
        if full_scale is not None:
            run_patch["full_scale"] = full_scale
        if workers is not None:
            run_patch["workers"] = workers
        data = self.model_dump(by_alias=True)
        data["run"].update(run_patch)
        if out is not None:
            data["output"]["directory"] = out
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(validation_message(e)) from e


def validation_message(e: ValidationError) -> str:
    err = e.errors()[0]
    where = ".".join(str(part) for part in err["loc"])
    return f"{where}: {err['msg']}"


def _locate_line(text: str, loc: tuple) -> int | None:
    """
    Ищет строку TOML-файла, к которой относится ошибка валидации.
    Возвращает номер строки (с единицы) или None.
    """
    names = [str(part) for part in loc if isinstance(part, str)]
    if not names:
        return None
    key, section = names[-1], ".".join(names[:-1])
    current = ""
    header_line = None
    key_re = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line.strip("[]").strip()
            if current == ".".join(names):
                header_line = lineno
            if current == section and header_line is None:
                header_line = lineno
            continue
        if current == section and key_re.match(raw):
            return lineno
    return header_line


def load_experiment_config(path: Path | str) -> ExperimentConfig:
    """Загружает и валидирует TOML-конфигурацию эксперимента. Неизвестные ключи: ошибка."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigError(e.msg, line=e.lineno) from e
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        err = e.errors()[0]
        raise ConfigError(validation_message(e), line=_locate_line(text, err["loc"])) from e


# --- 5. Настройки процесса из окружения / .env ---
class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="RIS_MISMATCH_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        env_nested_delimiter="__",
        extra="ignore",
    )

    log_level: str = "INFO"
    log_json: bool = True
    workers: int = Field(1, ge=1)


_cached_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """
    Возвращает синглтон-экземпляр настроек, создавая его при первом вызове.
    Это предотвращает ошибки валидации при импорте.
    """
    global _cached_settings
    if _cached_settings is None:
        _cached_settings = Settings()
    return _cached_settings
