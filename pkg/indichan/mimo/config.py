from __future__ import annotations

from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from indichan.core.priors import TrimmedGaussianPrior
from indichan.errors import InvalidParameterError


class MimoConfig(BaseModel):
    """高斯 MIMO 设置：天线数、实/复、相关/协方差统计、先验与方案参数。"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    t: int = Field(ge=1, description="发射天线数（X 的列数）")
    r: int = Field(ge=1, description="接收天线数（Y 的列数）")
    d: int = Field(default=1, description="实数 1 / 复数 2")
    u: int = Field(default=0, description="0：相关（不去均值）；1：协方差（去均值）")
    cov: Optional[np.ndarray] = Field(default=None, description="先验协方差 Λ_X（t×t），缺省为单位阵")
    omega: float = Field(default=5.0, description="截断半径 Ω")
    d_fb: int = Field(default=1, ge=1, description="反馈间隔 d_FB")
    epsilon: float = Field(default=1e-3, description="错误概率 ε")
    n: int = Field(default=100_000, ge=1, description="块长 n")
    K: Optional[int] = Field(default=None, description="每块比特数 K")
    gamma: Optional[float] = Field(default=None, description="度量指数 γ ∈ (0,1)")

    @field_validator("d")
    @classmethod
    def _check_d(cls, v: int) -> int:
        if v not in (1, 2):
            raise ValueError("d must be 1 (real) or 2 (complex)")
        return v

    @field_validator("u")
    @classmethod
    def _check_u(cls, v: int) -> int:
        if v not in (0, 1):
            raise ValueError("u must be 0 or 1")
        return v

    @field_validator("omega")
    @classmethod
    def _check_omega(cls, v: float) -> float:
        if not np.isfinite(v) or v <= 0:
            raise ValueError("omega must be > 0")
        return v

    @field_validator("epsilon")
    @classmethod
    def _check_epsilon(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("epsilon must be in (0,1)")
        return v

    @field_validator("gamma")
    @classmethod
    def _check_gamma(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0 < v < 1:
            raise ValueError("gamma must be in (0,1)")
        return v

    @field_validator("cov", mode="before")
    @classmethod
    def _coerce_cov(cls, v: Any) -> Optional[np.ndarray]:
        if v is None:
            return None
        return np.atleast_2d(np.asarray(v))

    @model_validator(mode="after")
    def _check_cov(self) -> "MimoConfig":
        if self.cov is not None:
            cov = self.cov
            if cov.shape != (self.t, self.t):
                raise ValueError(f"cov must be {self.t}x{self.t}")
            if not np.allclose(cov, cov.conj().T, atol=1e-12):
                raise ValueError("cov must be symmetric/hermitian")
            if np.min(np.linalg.eigvalsh(cov)) <= 0:
                raise ValueError("cov must be positive definite")
        return self

    @property
    def complex_valued(self) -> bool:
        return self.d == 2

    @property
    def lambda_x(self) -> np.ndarray:
        dtype = np.complex128 if self.complex_valued else np.float64
        if self.cov is None:
            return np.eye(self.t, dtype=dtype)
        return np.asarray(self.cov, dtype=dtype)

    def prior(self) -> TrimmedGaussianPrior:
        return TrimmedGaussianPrior(self.lambda_x, self.omega, complex_valued=self.complex_valued)

    def require_gamma(self) -> float:
        if self.gamma is None:
            raise InvalidParameterError("gamma is required for this calculation")
        return float(self.gamma)

    def to_dict(self) -> dict:
        out = self.model_dump(exclude={"cov"})
        out["cov_real"] = np.real(self.lambda_x).tolist()
        out["cov_imag"] = np.imag(self.lambda_x).tolist()
        return out
