from __future__ import annotations

from enum import Enum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class WeightMode(str, Enum):
    TRUE = "true"  # w = β(θ) e^{jθ}
    ASSUMED = "assumed"  # w̃ = e^{jθ}


class AmplitudeModel(BaseModel):
    """Фазозависимая амплитуда элемента RIS: константы (β_min, φ, κ) конкретной схемы."""

    model_config = ConfigDict(frozen=True)

    beta_min: float = Field(ge=0.0, le=1.0)
    phi: float = Field(0.0, ge=0.0)
    kappa: float = Field(2.0, ge=0.0)

    @property
    def is_ideal(self) -> bool:
        return self.beta_min == 1.0 or self.kappa == 0.0


class PhaseProfile(BaseModel):
    """Матрица фаз θ_{t,m} размера T×M (радианы, [−π, π)) и сид, из которого она получена."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    theta: np.ndarray
    seed: int = Field(ge=0, lt=2**64)

    @field_validator("theta", mode="before")
    @classmethod
    def _coerce_theta(cls, v: Any) -> np.ndarray:
        theta = np.array(v, dtype=float)
        if theta.ndim != 2 or theta.size == 0:
            raise ValueError(f"theta must be a non-empty T x M matrix, got shape {theta.shape}")
        if np.any(theta < -np.pi) or np.any(theta >= np.pi):
            raise ValueError("every phase must lie in [-pi, pi)")
        theta.setflags(write=False)
        return theta

    @property
    def n_transmissions(self) -> int:
        return self.theta.shape[0]

    @property
    def n_elements(self) -> int:
        return self.theta.shape[1]
