from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy import linalg

from indichan.errors import InvalidInputError
from indichan.mimo.config import MimoConfig

LOG2E = float(np.log2(np.e))


def log2_abs_det(m: np.ndarray) -> float:
    """log₂|det M|（复数取模）；奇异时为 -inf。"""
    if m.size == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(m)
    if sign == 0:
        return -np.inf
    return float(logdet * LOG2E)


def _matrix(a: Any, cols: int, config: MimoConfig, what: str) -> np.ndarray:
    dtype = np.complex128 if config.complex_valued else np.float64
    arr = np.asarray(a)
    if config.complex_valued:
        arr = arr.astype(np.complex128)
    else:
        if np.iscomplexobj(arr) and np.any(np.imag(arr) != 0):
            raise InvalidInputError(f"{what} has complex entries but config is real")
        arr = np.real(arr).astype(np.float64)
    if arr.ndim == 1 and cols == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise InvalidInputError(f"{what} must have shape (n, {cols}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} has non-finite entries")
    return arr.astype(dtype)


def gram(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(1/n) A* B。"""
    return np.conj(a).T @ b / a.shape[0]


def prune_columns(y: np.ndarray, rtol: float = 1e-10) -> List[int]:
    """从左到右保留使秩增加的列（等价于优先删除靠后的线性相关列）。"""
    kept: List[int] = []
    for c in range(y.shape[1]):
        trial = y[:, kept + [c]]
        s = np.linalg.svd(trial, compute_uv=False)
        if s.size and s[-1] > rtol * max(s[0], 1e-300):
            kept.append(c)
    return kept


@dataclass(frozen=True)
class EmpiricalSecondOrder:
    cxx: np.ndarray
    cyy: np.ndarray
    cyx: np.ndarray
    cx_given_y: np.ndarray
    mu_x: np.ndarray
    mu_y: np.ndarray
    kept_columns: List[int] = field(default_factory=list)
    degenerate: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cxx": np.real_if_close(self.cxx).tolist(),
            "cyy": np.real_if_close(self.cyy).tolist(),
            "cyx": np.real_if_close(self.cyx).tolist(),
            "cx_given_y": np.real_if_close(self.cx_given_y).tolist(),
            "kept_columns": list(self.kept_columns),
            "degenerate": self.degenerate,
        }


def centered(x: np.ndarray, y: np.ndarray, config: MimoConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    mu_x = x.mean(axis=0) if config.u == 1 else np.zeros(x.shape[1], dtype=x.dtype)
    mu_y = y.mean(axis=0) if config.u == 1 else np.zeros(y.shape[1], dtype=y.dtype)
    return x - mu_x, y - mu_y, mu_x, mu_y


def empirical_second_order(X: Any, Y: Any, config: MimoConfig) -> EmpiricalSecondOrder:
    x = _matrix(X, config.t, config, "X")
    y = _matrix(Y, config.r, config, "Y")
    if x.shape[0] != y.shape[0]:
        raise InvalidInputError(f"length mismatch: {x.shape[0]} != {y.shape[0]}")
    n = x.shape[0]
    xc, yc, mu_x, mu_y = centered(x, y, config)
    kept = prune_columns(yc)
    yk = yc[:, kept]
    cxx = gram(xc, xc)
    cyy = gram(yk, yk)
    cyx = gram(yk, xc)
    if kept:
        cond = cxx - np.conj(cyx).T @ np.linalg.solve(cyy, cyx)
    else:
        cond = cxx.copy()
    cond = (cond + np.conj(cond).T) / 2
    return EmpiricalSecondOrder(
        cxx=cxx,
        cyy=cyy,
        cyx=cyx,
        cx_given_y=cond,
        mu_x=mu_x,
        mu_y=mu_y,
        kept_columns=kept,
        degenerate=n < config.t + config.r + config.u + 1,
    )


def _pml_from_logdet(logdet: float, n: int, config: MimoConfig) -> float:
    """−(d/2)·n·log₂|(2π/d)e·Ĉ|；奇异 Ĉ 时为 +inf。"""
    if np.isneginf(logdet):
        return np.inf
    t = config.t
    scale = t * float(np.log2(2.0 * np.pi * np.e / config.d))
    return -(config.d / 2.0) * n * (scale + logdet)


def pml_gaussian(X: Any, config: MimoConfig) -> float:
    x = _matrix(X, config.t, config, "X")
    xc = x - x.mean(axis=0) if config.u == 1 else x
    return _pml_from_logdet(log2_abs_det(gram(xc, xc)), x.shape[0], config)


def pml_gaussian_conditional(X: Any, Y: Any, config: MimoConfig) -> float:
    so = empirical_second_order(X, Y, config)
    return _pml_from_logdet(log2_abs_det(so.cx_given_y), np.asarray(X).shape[0], config)


def innovation_log2_det(x: np.ndarray, y: np.ndarray) -> float:
    """
    QR 路径：对 [Y X] 做 QR，X 各列的新息范数平方 |R_ii|²/n 之积即 |Ĉ_X|Y|。
    """
    n = x.shape[0]
    r_mat = linalg.qr(np.hstack([y, x]), mode="r")[0]
    diag = np.abs(np.diag(r_mat))[y.shape[1]:]
    if np.any(diag == 0):
        return -np.inf
    return float(np.sum(np.log2(diag ** 2 / n)))


def pml_gaussian_conditional_qr(X: Any, Y: Any, config: MimoConfig) -> float:
    x = _matrix(X, config.t, config, "X")
    y = _matrix(Y, config.r, config, "Y")
    xc, yc, _, _ = centered(x, y, config)
    kept = prune_columns(yc)
    return _pml_from_logdet(innovation_log2_det(xc, yc[:, kept]), x.shape[0], config)


def lmmse_residual_covariance(X: Any, Y: Any, config: MimoConfig) -> np.ndarray:
    """直接回归：X 对 Y 的最小二乘残差的样本协方差（交叉校验用）。"""
    x = _matrix(X, config.t, config, "X")
    y = _matrix(Y, config.r, config, "Y")
    xc, yc, _, _ = centered(x, y, config)
    yk = yc[:, prune_columns(yc)]
    if yk.shape[1] == 0:
        return gram(xc, xc)
    coef, *_ = np.linalg.lstsq(yk, xc, rcond=None)
    resid = xc - yk @ coef
    return gram(resid, resid)
