from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict

from ris_mismatch.models.signal import ParameterVector


class BoundsReport(BaseModel):
    """
    Псевдоистинный параметр η₀, матрицы A/B, MCRB, LB и смещение,
    плюс скалярные метрики ошибки позиции (метры).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    eta0: ParameterVector
    eta_true: ParameterVector
    A: np.ndarray
    B: np.ndarray
    mcrb: np.ndarray
    lb: np.ndarray
    bias_matrix: np.ndarray
    peb_mcrb: float
    peb_lb: float
    bias_norm: float
    condition_A: float
    noise_var: float | None = None

    def to_record(self) -> dict[str, float]:
        """Плоская запись для строки CSV."""
        p0 = self.eta0.position
        return {
            "peb_lb": self.peb_lb,
            "peb_mcrb": self.peb_mcrb,
            "bias_norm": self.bias_norm,
            "alpha0_re": self.eta0.alpha_re,
            "alpha0_im": self.eta0.alpha_im,
            "p0_x": float(p0[0]),
            "p0_y": float(p0[1]),
            "p0_z": float(p0[2]),
            "condition_A": self.condition_A,
            "noise_var": float("nan") if self.noise_var is None else self.noise_var,
        }


class CRBReport(BaseModel):
    """Классическая CRB при точном знании амплитудной модели."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    fim: np.ndarray
    crb: np.ndarray
    peb_crb: float
    condition_fim: float
