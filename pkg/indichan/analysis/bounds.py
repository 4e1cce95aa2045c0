from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import gammaln

from indichan.analysis.report import OverheadReport
from indichan.empirics.types import all_sequences
from indichan.errors import InvalidParameterError
from indichan.ratefn.base import MetricMetadata

LOG2E = float(np.log2(np.e))


def achievability_gap(epsilon: float) -> float:
    """充分与必要条件之间的差距 log₂((1−ε)/ε) 比特。"""
    if not 0 < epsilon < 1:
        raise InvalidParameterError(f"epsilon must be in (0,1), got {epsilon}")
    return float(np.log2((1.0 - epsilon) / epsilon))


def ab_bound(a: float, b: float) -> Tuple[int, float, float]:
    """K* = ⌈√(a/b)⌉ 时 a/K* + b·K* ≤ 3√(ab)（要求 0 < b ≤ a）。返回 (K*, 实际值, 3√(ab))。"""
    if a <= 0 or b <= 0:
        raise InvalidParameterError(f"a and b must be positive, got a={a} b={b}")
    if b > a:
        raise InvalidParameterError(f"bound needs b <= a, got a={a} b={b}")
    K = int(math.ceil(math.sqrt(a / b)))
    return K, a / K + b * K, 3.0 * math.sqrt(a * b)


def framework_rate(t: float, n: int, K: int, c_n: float, b1: int, f0: float) -> float:
    """F_n(t) = t / (1 + (c_n + b₁f₀)/K) − K/n。"""
    return t / (1.0 + (c_n + b1 * f0) / K) - K / n


def theorem_framework_params(
    log2_L_n: float,
    b0: int,
    f0: float,
    r_max: float,
    n: int,
    epsilon: float,
    d_fb: int = 1,
    K: Optional[int] = None,
) -> OverheadReport:
    """
    分块方案的保证参数：c_n = log₂(n·L_n/(d_FB·ε))，b₁ = b₀ + 2d_FB − 1，
    δ_n = 3√(R_max·(c_n + b₁f₀)/n)。K 缺省时按 a/K + bK 的最优取 K* = ⌈√(n·R_max·k_n)⌉。
    报告挂载 F_n。
    """
    if n < 1 or d_fb < 1 or b0 < 0 or f0 < 0:
        raise InvalidParameterError(f"invalid framework inputs n={n} d_fb={d_fb} b0={b0} f0={f0}")
    if not 0 < epsilon < 1:
        raise InvalidParameterError(f"epsilon must be in (0,1), got {epsilon}")
    if r_max <= 0:
        raise InvalidParameterError(f"R_max must be positive, got {r_max}")
    c_n = float(np.log2(n) + log2_L_n - np.log2(d_fb * epsilon))
    b1 = b0 + 2 * d_fb - 1
    k_n = c_n + b1 * f0
    inputs: Dict[str, Any] = {
        "log2_L_n": log2_L_n, "b0": b0, "f0": f0, "r_max": r_max, "n": n, "epsilon": epsilon, "d_fb": d_fb,
    }
    report = OverheadReport(title="framework")
    report.add("c_n", c_n, "log(n L_n/(d eps))", inputs)
    report.add("b1", b1, "b0 + 2 d - 1", inputs)
    report.add("k_n", k_n, "c_n + b1 f0", inputs)
    report.add("delta_n", 3.0 * math.sqrt(max(r_max * k_n, 0.0) / n), "3 sqrt(R_max k_n / n)", inputs)
    K_opt = max(1, int(math.ceil(math.sqrt(max(n * r_max * k_n, 0.0)))))
    report.add("K_opt", K_opt, "ceil(sqrt(n R_max k_n))", inputs)
    K = K_opt if K is None else int(K)
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    report.add("K", K, "block size", inputs)
    report.add("delta_K", r_max * k_n / K + K / n, "R_max k_n / K + K / n", inputs)
    report.attach("F", lambda t: framework_rate(t, n, K, c_n, b1, f0))
    return report


def framework_from_metadata(
    metadata: MetricMetadata,
    n: int,
    epsilon: float,
    d_fb: int = 1,
    K: Optional[int] = None,
    r_max: Optional[float] = None,
) -> OverheadReport:
    r = r_max if r_max is not None else metadata.r_max
    if r is None:
        raise InvalidParameterError("metric metadata has no R_max; pass r_max")
    return theorem_framework_params(metadata.log2_L(n), metadata.b0, metadata.f0, r, n, epsilon, d_fb, K)


def conditional_form_converse(r_max: float, n: int, epsilon: float) -> float:
    """−(log₂n + log₂(e·R_max/(1−ε)))/(n − 1/R_max)：条件形式速率函数只能在此（负）偏移下被超越。"""
    if r_max <= 0:
        raise InvalidParameterError(f"R_max must be positive, got {r_max}")
    if n <= 1.0 / r_max:
        raise InvalidParameterError(f"n must exceed 1/R_max, got n={n} R_max={r_max}")
    if not 0 <= epsilon < 1:
        raise InvalidParameterError(f"epsilon must be in [0,1), got {epsilon}")
    return float(-(np.log2(n) + np.log2(np.e * r_max / (1.0 - epsilon))) / (n - 1.0 / r_max))


@dataclass(frozen=True)
class ConverseLengths:
    n: int
    delta_L: float
    kraft_sum: float

    @property
    def feasible(self) -> bool:
        return self.kraft_sum <= 1.0 + 1e-12

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "delta_L": self.delta_L, "kraft_sum": self.kraft_sum, "feasible": self.feasible}


def converse_delta_L(n: int, epsilon: float, size: int) -> float:
    """δ_L = log₂(n·e·ln|X|/(1−ε))。"""
    if n < 1 or size < 2 or not 0 <= epsilon < 1:
        raise InvalidParameterError(f"invalid converse inputs n={n} epsilon={epsilon} size={size}")
    return float(np.log2(n * np.e * np.log(size) / (1.0 - epsilon)))


def modadd_converse_lengths(
    rate_z: Callable[[np.ndarray], float],
    n: int,
    epsilon: float,
    size: int = 2,
    guard: Optional[int] = None,
) -> ConverseLengths:
    """
    只依赖噪声 z 的可达速率函数 R(z) 对应的压缩长度 L(z) = n·log₂|X| − n·R(z)，
    补偿 δ_L 后取整 ⌈L(z) + δ_L⌉ 并穷举检查 Kraft 不等式。
    """
    delta = converse_delta_L(n, epsilon, size)
    log_size = float(np.log2(size))
    total = 0.0
    for z in all_sequences(size, n, guard):
        length = n * log_size - n * float(rate_z(z))
        total += 2.0 ** (-math.ceil(length + delta - 1e-12))
    return ConverseLengths(n, delta, total)


def symbol_constant(x_size: int) -> float:
    """C_X = log₂(Γ(½)^|X| / Γ(|X|/2))。"""
    if x_size < 2:
        raise InvalidParameterError(f"|X| must be >= 2, got {x_size}")
    return float((x_size * gammaln(0.5) - gammaln(x_size / 2.0)) * LOG2E)


def dirichlet_regret_bound(x_size: int, z_size: int, n: int) -> float:
    """
    Dirichlet-½ 混合相对条件无记忆最大似然的最大遗憾上界：
    r_n = |Z|·[(|X|−1)/2·log₂(n/(2π|Z|)) + C_X + (|X|/2)·log₂e + |X|²·log₂e/(4n)]。
    """
    if z_size < 1 or n < 1:
        raise InvalidParameterError(f"invalid regret inputs z_size={z_size} n={n}")
    per_state = (
        (x_size - 1) / 2.0 * np.log2(n / (2.0 * np.pi * z_size))
        + symbol_constant(x_size)
        + x_size / 2.0 * LOG2E
        + x_size ** 2 * LOG2E / (4.0 * n)
    )
    return float(z_size * per_state)
