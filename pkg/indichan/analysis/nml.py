from __future__ import annotations

from typing import Optional

import numpy as np

from indichan.empirics.distributions import FiniteLike, empirical_distribution, finite_array
from indichan.empirics.types import all_sequences
from indichan.errors import InvalidInputError
from indichan.ratefn.models import kt_letter_log_probs


def _states(n: int, z: Optional[FiniteLike]) -> np.ndarray:
    if z is None:
        return np.zeros(n, dtype=np.int64)
    arr, _ = finite_array(z)
    if arr.shape[0] != n:
        raise InvalidInputError(f"state sequence has length {arr.shape[0]}, expected {n}")
    return arr


def ml_log_probability(x: np.ndarray, z: np.ndarray) -> float:
    """log₂ p̂_ML(x|z)，条件无记忆族。"""
    return empirical_distribution(x, z).log2_probability()


def nml_constant(x_size: int, n: int, z: Optional[FiniteLike] = None, guard: Optional[int] = None) -> float:
    """log₂ c_NML = log₂ Σ_x p̂_ML(x|z)，穷举 𝒳ⁿ；即 NML 分布的最小最大遗憾。"""
    states = _states(n, z)
    logs = np.array([ml_log_probability(row, states) for row in all_sequences(x_size, n, guard)])
    peak = float(np.max(logs))
    return peak + float(np.log2(np.sum(2.0 ** (logs - peak))))


def mixture_regret(x: FiniteLike, z: Optional[FiniteLike], x_size: int) -> float:
    """log₂(p̂_ML(x|z) / P_w(x|z))，P_w 为逐状态的 add-½ 混合。"""
    xa, _ = finite_array(x, x_size)
    states = _states(xa.shape[0], z)
    return ml_log_probability(xa, states) - float(np.sum(kt_letter_log_probs(xa, states, x_size)))


def max_mixture_regret(x_size: int, n: int, z: Optional[FiniteLike] = None, guard: Optional[int] = None) -> float:
    states = _states(n, z)
    return float(max(mixture_regret(row, states, x_size) for row in all_sequences(x_size, n, guard)))
