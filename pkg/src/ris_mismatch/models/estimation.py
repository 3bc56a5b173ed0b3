from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, field_validator

import numpy as np

from ris_mismatch.models.optimization import StartRecord
from ris_mismatch.models.signal import ParameterVector


class AngleEstimate(BaseModel):
    """ϑ̂ (угол места от нормали RIS) и φ̂ (азимут); objective: нормированное качество подгонки в [0, 1]."""

    model_config = ConfigDict(frozen=True)

    elevation: float = Field(ge=0.0, le=np.pi)
    azimuth: float
    objective: float

    @field_validator("azimuth")
    @classmethod
    def _azimuth_range(cls, v: float) -> float:
        if not -np.pi <= v < np.pi:
            raise ValueError("azimuth must lie in [-pi, pi)")
        return v

    def direction(self) -> np.ndarray:
        st = np.sin(self.elevation)
        return np.array([st * np.cos(self.azimuth), st * np.sin(self.azimuth), np.cos(self.elevation)])


class EstimationResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eta_hat: ParameterVector
    residual: float = Field(ge=0.0)
    angles: AngleEstimate | None = None
    starts_log: list[StartRecord] = Field(default_factory=list)
    best_start: int = 0


class TrialRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    trial: int
    snr_db: float
    beta_min: float
    error_m: float
    residual: float
    start_used: int
    failed: bool = False


class RmseResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    rmse: float
    stderr: float
    n_trials: int
    n_failures: int
    trials: list[TrialRecord]
