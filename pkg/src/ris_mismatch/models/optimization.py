from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict


class LocalResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray
    f: float
    converged: bool
    iterations: int
    diverged: bool = False


class StartRecord(BaseModel):
    """Запись журнала для одной стартовой точки multi-start."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    index: int
    start: np.ndarray
    x: np.ndarray
    f: float
    converged: bool
    iterations: int
    diverged: bool


class MultiStartResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray
    f: float
    best_index: int
    log: list[StartRecord]
