from __future__ import annotations

from typing import Any, Tuple

import numpy as np

from indichan.errors import InvalidInputError
from indichan.mimo.config import MimoConfig
from indichan.mimo.params import mimo_metric_metadata
from indichan.mimo.second_order import (
    LOG2E,
    _matrix,
    centered,
    empirical_second_order,
    gram,
    log2_abs_det,
    pml_gaussian_conditional,
)
from indichan.ratefn.base import DecodingMetric, raw


def mimo_rate(X: Any, Y: Any, config: MimoConfig) -> Tuple[float, float]:
    """
    (R_ML, R_ML*)：
      R_ML  = (d/2)log₂(|Λ_X|/|Ĉ_X|Y|) + (d/2)log₂e·tr((1/n)X*XΛ_X⁻¹ − I)
      R_ML* = (d/2)log₂(|Ĉ_XX|/|Ĉ_X|Y|)
    Ĉ_X|Y 奇异时两者均为 +inf。
    """
    so = empirical_second_order(X, Y, config)
    x = _matrix(X, config.t, config, "X")
    half_d = config.d / 2.0
    lam = config.lambda_x
    log_cond = log2_abs_det(so.cx_given_y)
    if np.isneginf(log_cond):
        return np.inf, np.inf
    trace = float(np.real(np.trace(gram(x, x) @ np.linalg.inv(lam)))) - config.t
    r_ml = half_d * (log2_abs_det(lam) - log_cond) + half_d * LOG2E * trace
    r_ml_star = half_d * (log2_abs_det(so.cxx) - log_cond)
    return float(r_ml), float(r_ml_star)


def symmetric_rate(X: Any, Y: Any, config: MimoConfig) -> float:
    """(d/2)log₂(|Ĉ_XX||Ĉ_YY| / |Ĉ_(XY)(XY)|)，Y 取剪枝后的列。"""
    x = _matrix(X, config.t, config, "X")
    y = _matrix(Y, config.r, config, "Y")
    so = empirical_second_order(x, y, config)
    xc, yc, _, _ = centered(x, y, config)
    joint = np.hstack([xc, yc[:, so.kept_columns]])
    log_joint = log2_abs_det(gram(joint, joint))
    if np.isneginf(log_joint):
        return np.inf
    return float(config.d / 2.0 * (log2_abs_det(so.cxx) + log2_abs_det(so.cyy) - log_joint))


def rho_rate(x: Any, y: Any) -> float:
    """实标量、u=0：½log₂(1/(1−ρ̂²))，ρ̂ = Σxy / √(Σx²·Σy²)。"""
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.shape != ya.shape:
        raise InvalidInputError(f"length mismatch: {xa.shape[0]} != {ya.shape[0]}")
    denom = float(np.sqrt(np.sum(xa ** 2) * np.sum(ya ** 2)))
    if denom == 0:
        return 0.0
    rho2 = min((float(np.sum(xa * ya)) / denom) ** 2, 1.0)
    if rho2 >= 1.0:
        return np.inf
    return float(-0.5 * np.log2(1.0 - rho2))


def _batched_log2_det(mats: np.ndarray) -> np.ndarray:
    sign, logdet = np.linalg.slogdet(mats)
    out = logdet * LOG2E
    return np.where(sign == 0, -np.inf, out)


class MimoGammaMetric(DecodingMetric):
    """
    log₂ψ(X^k, Y^k, j) = γ·(log₂ p̂_ML(X_{j+1}^k | Y_{j+1}^k) − log₂ Q(X_{j+1}^k))，Q 为截断高斯先验。
    只依赖第 j+1..k 行。
    """

    def __init__(self, config: MimoConfig, gamma: float) -> None:
        self.config = config
        self.gamma = float(gamma)
        self.prior = config.prior()
        self.metadata = mimo_metric_metadata(config, self.gamma)

    def log_metric(self, x, y, j: int, k: int) -> float:
        if k <= j:
            raise InvalidInputError(f"metric needs k > j, got j={j} k={k}")
        xs = raw(x)[j:k]
        ys = raw(y)[j:k]
        pml = pml_gaussian_conditional(xs, ys, self.config)
        return self.gamma * (pml - self.prior.log_mass(xs))

    def log_metric_path(self, x: np.ndarray, y: np.ndarray, j: int, k_end: int) -> np.ndarray:
        cfg = self.config
        xs = _matrix(raw(x)[j:k_end], cfg.t, cfg, "X")
        ys = _matrix(raw(y)[j:k_end], cfg.r, cfg, "Y")
        m = xs.shape[0]
        if m == 0:
            return np.zeros(0)
        joint = np.hstack([ys, xs])
        outer = np.conj(joint)[:, :, None] * joint[:, None, :]
        sums = np.cumsum(outer, axis=0)
        counts = np.arange(1, m + 1, dtype=np.float64)
        if cfg.u == 1:
            first = np.cumsum(joint, axis=0)
            sums = sums - np.conj(first)[:, :, None] * first[:, None, :] / counts[:, None, None]
        cov = sums / counts[:, None, None]
        r = cfg.r
        log_joint = _batched_log2_det(cov)
        log_yy = _batched_log2_det(cov[:, :r, :r])
        log_cond = log_joint - log_yy
        scale = cfg.t * float(np.log2(2.0 * np.pi * np.e / cfg.d))
        pml = -(cfg.d / 2.0) * counts * (scale + log_cond)
        pml = np.where(np.isneginf(log_joint), np.inf, pml)
        pml = np.where(np.isneginf(log_yy), np.nan, pml)
        pml = np.where(counts < cfg.t + cfg.r + cfg.u + 1, np.nan, pml)

        # Y 列相关导致的奇异点改用列剪枝路径
        for idx in np.flatnonzero(np.isnan(pml)):
            if counts[idx] >= cfg.t + cfg.r + cfg.u + 1:
                pml[idx] = pml_gaussian_conditional(xs[: idx + 1], ys[: idx + 1], cfg)
        log_q = np.cumsum(self.prior.letter_log_masses(xs))
        return self.gamma * (pml - log_q)


def mimo_gamma_metric(X: Any, Y: Any, j: int, k: int, config: MimoConfig, gamma: float) -> float:
    return MimoGammaMetric(config, gamma).log_metric(X, Y, j, k)
