from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.special import gammaincc

from indichan.analysis.report import OverheadReport
from indichan.errors import InvalidParameterError
from indichan.mimo.config import MimoConfig
from indichan.ratefn.base import MetricMetadata

LOG2E = float(np.log2(np.e))


@dataclass(frozen=True)
class TrimmedPriorStats:
    delta_omega: float
    log2_q_min: float
    log2_q_max: float
    a0: float

    @property
    def q_min(self) -> float:
        return float(2.0 ** self.log2_q_min)

    @property
    def q_max(self) -> float:
        return float(2.0 ** self.log2_q_max)

    def to_dict(self) -> Dict[str, float]:
        return {
            "delta_omega": self.delta_omega,
            "log2_q_min": self.log2_q_min,
            "log2_q_max": self.log2_q_max,
            "a0": self.a0,
        }


def trimmed_prior_stats(config: MimoConfig) -> TrimmedPriorStats:
    """δ_Ω = Γ(dt/2, dΩ²/2)/Γ(dt/2)，a₀ = log₂(1/(1−δ_Ω))，以及截断先验密度的上下界。"""
    d, t = config.d, config.t
    delta = float(gammaincc(d * t / 2.0, d * config.omega ** 2 / 2.0))
    a0 = float(-np.log2(1.0 - delta))
    _, logdet = np.linalg.slogdet((2.0 * np.pi / d) * config.lambda_x)
    log_q_max = a0 - (d / 2.0) * logdet * LOG2E
    log_q_min = log_q_max - (d / 2.0) * config.omega ** 2 * LOG2E
    return TrimmedPriorStats(delta, float(log_q_min), float(log_q_max), a0)


def a_constants(config: MimoConfig) -> Dict[str, float]:
    """a₀…a₅（a₆ 依赖 R₀，另算）。"""
    d, t, r, u = config.d, config.t, config.r, config.u
    a0 = trimmed_prior_stats(config).a0
    a2 = (d / 4.0) * (t + 1 + 2 * r + 2 * u) * t
    a3 = float(t + 1 + r + u)
    a4 = float(2 * config.d_fb - 1)
    a5 = (d / 2.0) * (t + config.omega ** 2) * LOG2E
    a1 = a0 + float(np.log2(1.0 / (config.d_fb * config.epsilon))) + a2 * LOG2E
    return {"a0": a0, "a1": a1, "a2": a2, "a3": a3, "a4": a4, "a5": a5}


def mimo_metric_metadata(config: MimoConfig, gamma: float) -> MetricMetadata:
    """γ-度量的元数据：log₂L = a₀ + a₂log₂(e/(1−γ))，b₀ = ⌈a₃/(1−γ)⌉，f₀ = γ·a₅。"""
    a = a_constants(config)
    log2_L = a["a0"] + a["a2"] * float(np.log2(np.e / (1.0 - gamma)))
    return MetricMetadata(
        log2_L=lambda m: log2_L,
        b0=int(math.ceil(a["a3"] / (1.0 - gamma))),
        f0=gamma * a["a5"],
        r_max=None,
    )


def gaussian_theorem_params(config: MimoConfig, R0: Optional[float] = None) -> OverheadReport:
    """
    高斯 MIMO 自适应定理的全部参数：A、B、η、α、δ 以及 F(t) = ηt/(1+αt) − δ。

    给定 R₀ 时按 a₆ 选取 K = ⌈(n√a₆·R₀)^{2/3}⌉、γ = 1 − √(a₆/K)，并给出 δ₀。
    """
    n = config.n
    a = a_constants(config)
    report = OverheadReport(title="gaussian_mimo")
    inputs = {"n": n, "t": config.t, "r": config.r, "d": config.d, "u": config.u,
              "epsilon": config.epsilon, "omega": config.omega, "d_fb": config.d_fb}
    stats = trimmed_prior_stats(config)
    report.add("delta_omega", stats.delta_omega, "incomplete_gamma(dt/2, d*omega^2/2)", inputs)
    for name in ("a0", "a1", "a2", "a3", "a4", "a5"):
        report.add(name, a[name], f"{name}(d,t,r,u,omega,d_fb,epsilon)", inputs)

    if R0 is not None:
        if R0 <= 0:
            raise InvalidParameterError(f"R0 must be > 0, got {R0}")
        a6 = float(np.log2(n)) + a["a1"] + a["a2"] + (a["a3"] + a["a4"]) * (R0 + a["a5"])
        K = int(math.ceil((n * math.sqrt(a6) * R0) ** (2.0 / 3.0)))
        if K <= a6:
            raise InvalidParameterError(f"K={K} must exceed a6={a6:.3g}; increase n or R0")
        gamma = 1.0 - math.sqrt(a6 / K)
        delta0 = 3.0 * n ** (-1.0 / 3.0) * a6 ** (1.0 / 3.0) * R0 ** (2.0 / 3.0) + 1.0 / n
        report.add("a6", a6, "log2(n)+a1+a2+(a3+a4)(R0+a5)", {**inputs, "R0": R0})
        report.add("delta0", delta0, "3 n^(-1/3) a6^(1/3) R0^(2/3) + 1/n", {**inputs, "R0": R0})
    else:
        if config.K is None or config.gamma is None:
            raise InvalidParameterError("either R0 or both K and gamma must be given")
        K = int(config.K)
        gamma = float(config.gamma)
    if not 0 < gamma < 1:
        raise InvalidParameterError(f"gamma must be in (0,1), got {gamma}")
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")

    b1 = a["a3"] / (1.0 - gamma) + a["a4"]
    A = gamma * b1
    B = float(np.log2(n)) + a["a1"] + a["a2"] * float(np.log2(1.0 / (1.0 - gamma))) + b1 * gamma * a["a5"]
    eta = gamma / (1.0 + B / K)
    alpha = A / (K + B)
    delta = a["a0"] + K / n
    report.add("K", K, "ceil((n sqrt(a6) R0)^(2/3))" if R0 is not None else "given", inputs)
    report.add("gamma", gamma, "1 - sqrt(a6/K)" if R0 is not None else "given", inputs)
    report.add("A", A, "gamma (a3/(1-gamma) + a4)", inputs)
    report.add("B", B, "log2 n + a1 + a2 log2(1/(1-gamma)) + (a3/(1-gamma)+a4) gamma a5", inputs)
    report.add("eta", eta, "gamma / (1 + B/K)", inputs)
    report.add("alpha", alpha, "A / (K + B)", inputs)
    report.add("delta", delta, "a0 + K/n", inputs)
    report.add("saturation", eta / alpha - delta, "eta/alpha - delta", inputs)

    def F(t: float) -> float:
        return eta * t / (1.0 + alpha * t) - delta

    report.attach("F", F)
    return report


def gaussian_nonadaptive_redundancy(config: MimoConfig, gamma: float) -> float:
    """
    非自适应方案下 γ·R_ML 的内在冗余上界：(1/n)a₀ + (1/n)a₂log₂(e/(1−γ))。
    仅在 γ ≤ 1 − (t+1+r+u)/n 时成立。
    """
    if not 0 < gamma < 1:
        raise InvalidParameterError(f"gamma must be in (0,1), got {gamma}")
    a = a_constants(config)
    n = config.n
    if gamma > 1.0 - a["a3"] / n:
        raise InvalidParameterError(f"gamma={gamma} exceeds 1-(t+1+r+u)/n for n={n}")
    return (a["a0"] + a["a2"] * float(np.log2(np.e / (1.0 - gamma)))) / n
