from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from indichan.errors import InvalidParameterError
from indichan.infrastructure.config.config_manager import config_manager


def _z(confidence: float) -> float:
    if not 0 < confidence < 1:
        raise InvalidParameterError(f"confidence must be in (0,1), got {confidence}")
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def default_confidence() -> float:
    return float(config_manager.get("monte_carlo.confidence", 0.95))


def wilson_interval(successes: int, trials: int, confidence: Optional[float] = None) -> Tuple[float, float]:
    """二项比例的 Wilson 区间。"""
    if trials <= 0:
        return 0.0, 1.0
    z = _z(confidence or default_confidence())
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return float(max(0.0, center - half)), float(min(1.0, center + half))


def normal_interval(values: Sequence[float], confidence: Optional[float] = None) -> Tuple[float, float]:
    """样本均值的正态区间。"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    mean = float(arr.mean())
    if arr.size == 1:
        return mean, mean
    half = _z(confidence or default_confidence()) * float(arr.std(ddof=1)) / np.sqrt(arr.size)
    return mean - half, mean + half
