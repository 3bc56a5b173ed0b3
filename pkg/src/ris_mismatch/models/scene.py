from __future__ import annotations

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from ris_mismatch.config import SPEED_OF_LIGHT


def as_point(value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"expected a finite 3-vector, got {value!r}")
    arr.setflags(write=False)
    return arr


class SceneConfig(BaseModel):
    """
    Геометрия сцены: несущая, решётка RIS, позиции BS / RIS / UE.

    Неизменяема после создания. Обычно создаётся через
    `ris_mismatch.core.geometry.build_scene`, который сам заполняет
    element_positions; здесь только проверяются инварианты.
    Площадь элемента A = λ²/4 в формулах не участвует и не хранится.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    carrier_hz: float = Field(gt=0)
    wavelength_m: float = Field(gt=0)
    ris_rows: int = Field(ge=1)
    ris_cols: int = Field(ge=1)
    spacing_m: float = Field(gt=0)
    p_ris: np.ndarray
    p_bs: np.ndarray
    p_ue_true: np.ndarray
    element_positions: np.ndarray

    # a(p_BS) считается один раз: он нужен в каждом вызове combined_response
    _bs_steering: np.ndarray | None = PrivateAttr(default=None)

    @model_validator(mode="before")
    @classmethod
    def _fill_missing(cls, data: Any):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        carrier, wavelength = data.get("carrier_hz"), data.get("wavelength_m")
        if carrier is None and wavelength is None:
            raise ValueError("either carrier_hz or wavelength_m is required")
        if wavelength is None:
            data["wavelength_m"] = SPEED_OF_LIGHT / float(carrier)
        if carrier is None:
            data["carrier_hz"] = SPEED_OF_LIGHT / float(wavelength)
        if data.get("spacing_m") is None:
            data["spacing_m"] = float(data["wavelength_m"]) / 2.0
        for key in ("p_ris", "p_bs", "p_ue_true"):
            data[key] = as_point(data.get(key, (0.0, 0.0, 0.0)))
        if data.get("element_positions") is not None:
            pos = np.array(data["element_positions"], dtype=float)
            pos.setflags(write=False)
            data["element_positions"] = pos
        return data

    @model_validator(mode="after")
    def _check_invariants(self):
        if abs(self.wavelength_m * self.carrier_hz - SPEED_OF_LIGHT) > 1e-6 * SPEED_OF_LIGHT:
            raise ValueError("wavelength_m * carrier_hz must equal the speed of light")
        pos = self.element_positions
        if pos.shape != (self.num_elements, 3):
            raise ValueError(
                f"element_positions must be ({self.num_elements}, 3), got {pos.shape}"
            )
        tol = 1e-12 * max(self.spacing_m, float(np.abs(self.p_ris).max()))
        if np.abs(pos[:, 2] - self.p_ris[2]).max() > tol:
            raise ValueError("RIS elements must lie in the plane z = p_ris.z")
        if np.abs(pos.mean(axis=0) - self.p_ris).max() > tol:
            raise ValueError("centroid of element_positions must equal p_ris")
        return self

    @property
    def num_elements(self) -> int:
        return self.ris_rows * self.ris_cols

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength_m

    @property
    def ue_distance(self) -> float:
        return float(np.linalg.norm(self.p_ue_true - self.p_ris))
