from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict


class Jacobian(BaseModel):
    """∂μ_t/∂η_i, матрица T×5 (порядок η: α_r, α_i, x, y, z)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    d_mu: np.ndarray


class Hessian(BaseModel):
    """∂²μ_t/∂η_i∂η_j, тензор T×5×5, симметричный по (i, j) по построению."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    d2_mu: np.ndarray


class FiniteDiffReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: float
    jacobian_alpha: float
    jacobian_position: float
    hessian_alpha_position: float
    hessian_position: float
    hessian_symmetry: float

    @property
    def jacobian_max(self) -> float:
        return max(self.jacobian_alpha, self.jacobian_position)

    @property
    def hessian_max(self) -> float:
        return max(self.hessian_alpha_position, self.hessian_position)
