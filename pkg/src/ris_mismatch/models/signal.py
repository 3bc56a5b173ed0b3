from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ris_mismatch.models.scene import as_point


class ParameterVector(BaseModel):
    """η = [α_r, α_i, x, y, z]: комплексное усиление канала и позиция UE (метры)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    alpha_re: float
    alpha_im: float
    position: np.ndarray

    @field_validator("alpha_re", "alpha_im")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError("gain components must be finite")
        return v

    @field_validator("position", mode="before")
    @classmethod
    def _point(cls, v: Any) -> np.ndarray:
        return as_point(v)

    @property
    def alpha(self) -> complex:
        return complex(self.alpha_re, self.alpha_im)

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.alpha_re, self.alpha_im], self.position))

    @classmethod
    def from_array(cls, eta: np.ndarray) -> "ParameterVector":
        eta = np.asarray(eta, dtype=float)
        return cls(alpha_re=float(eta[0]), alpha_im=float(eta[1]), position=eta[2:5])

    @classmethod
    def from_alpha(cls, alpha: complex, position: Any) -> "ParameterVector":
        return cls(alpha_re=float(np.real(alpha)), alpha_im=float(np.imag(alpha)), position=position)


class ObservationSet(BaseModel):
    """Принятые отсчёты y_t, t = 1..T, вместе с N₀ и энергией пилота E_s (s_t = √E_s)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    y: np.ndarray
    noise_var: float = Field(gt=0)
    pilot_energy: float = Field(1.0, gt=0)

    @field_validator("y", mode="before")
    @classmethod
    def _complex_vector(cls, v: Any) -> np.ndarray:
        y = np.array(v, dtype=complex).reshape(-1)
        if y.size == 0 or not np.all(np.isfinite(y)):
            raise ValueError("y must be a non-empty finite complex vector")
        y.setflags(write=False)
        return y

    @property
    def n_transmissions(self) -> int:
        return self.y.shape[0]

    def to_csv(self, path: Path | str) -> None:
        """CSV с колонками t, re, im; N₀ и E_s пишутся в строке-комментарии."""
        path = Path(path)
        frame = pd.DataFrame({"t": np.arange(self.n_transmissions), "re": self.y.real, "im": self.y.imag})
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(f"# noise_var={self.noise_var!r} pilot_energy={self.pilot_energy!r}\n")
            frame.to_csv(fh, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: Path | str) -> "ObservationSet":
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            header = fh.readline().lstrip("#").split()
        meta = dict(item.split("=", 1) for item in header)
        frame = pd.read_csv(path, comment="#").sort_values("t")
        return cls(
            y=frame["re"].to_numpy() + 1j * frame["im"].to_numpy(),
            noise_var=float(meta["noise_var"]),
            pilot_energy=float(meta["pilot_energy"]),
        )
