from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np

from indichan.core.alphabet import SymbolSequence
from indichan.errors import InvalidInputError, UnknownIdError

SequenceLike = Union[SymbolSequence, np.ndarray]


def raw(seq: SequenceLike) -> np.ndarray:
    return seq.data if isinstance(seq, SymbolSequence) else np.asarray(seq)


@dataclass(frozen=True)
class MetricMetadata:
    """
    自适应方案所需的度量参数。

    Attributes:
        log2_L: m ↦ log₂ L_m，CCDF 界 Pr_Q{ψ ≥ t} ≤ L_m / t 的常数
        b0: 块长 k−j ≤ b0 时界不成立，不做判决
        f0: 每个无约束符号的可加性松弛 f₀*（比特）
        r_max: R_emp 的上界（用于 δ_n 与倍增技巧中的 K 选择）
    """

    log2_L: Callable[[int], float]
    b0: int = 0
    f0: float = 0.0
    r_max: Optional[float] = None

    def to_dict(self, n: Optional[int] = None) -> Dict[str, Any]:
        out: Dict[str, Any] = {"b0": self.b0, "f0": self.f0, "r_max": self.r_max}
        if n is not None:
            out["log2_L_n"] = self.log2_L(n)
        return out


def constant_log2_L(value: float) -> Callable[[int], float]:
    return lambda m: float(value)


class DecodingMetric(ABC):
    """顺序译码度量 ψ(x^k, y^k, j)，以 log₂ 表示。"""

    metadata: Optional[MetricMetadata] = None

    @abstractmethod
    def log_metric_path(self, x: np.ndarray, y: np.ndarray, j: int, k_end: int) -> np.ndarray:
        """log₂ ψ(x^k, y^k, j)，k = j+1..k_end。"""

    def log_metric(self, x: SequenceLike, y: SequenceLike, j: int, k: int) -> float:
        if k <= j:
            raise InvalidInputError(f"metric needs k > j, got j={j} k={k}")
        return float(self.log_metric_path(raw(x), raw(y), j, k)[-1])


class RateFunction(ABC):
    """
    速率函数 R_emp(x, y)（比特/符号）。可为负；Q(x)=0 时返回 nan。

    有度量的条目满足 log₂ψ(x^n, y^n, 0) = n·R_emp(x, y)。
    """

    rate_id: str = ""
    adaptive: bool = False

    @abstractmethod
    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        ...

    def __call__(self, x: SequenceLike, y: SequenceLike) -> float:
        return self.rate(x, y)

    def metric(self) -> Optional[DecodingMetric]:
        return None

    @property
    def metadata(self) -> Optional[MetricMetadata]:
        m = self.metric()
        return m.metadata if m is not None else None

    def describe(self) -> Dict[str, Any]:
        return {"id": self.rate_id, "adaptive": self.adaptive, "has_metric": self.metric() is not None}


RateFactory = Callable[..., RateFunction]


@dataclass(frozen=True)
class RegistryEntry:
    rate_id: str
    factory: RateFactory
    description: str = ""
    adaptive: bool = False
    params: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.rate_id,
            "description": self.description,
            "adaptive": self.adaptive,
            "params": list(self.params),
        }


class RateFunctionRegistry:
    def __init__(self) -> None:
        self._entries: Dict[str, RegistryEntry] = {}

    def register(self, entry: RegistryEntry) -> None:
        if entry.rate_id in self._entries:
            raise ValueError(f"Rate function already registered: {entry.rate_id}")
        self._entries[entry.rate_id] = entry

    def get(self, rate_id: str) -> RegistryEntry:
        try:
            return self._entries[rate_id]
        except KeyError as e:
            raise UnknownIdError(f"Rate function not found: {rate_id}") from e

    def create(self, rate_id: str, **params: Any) -> RateFunction:
        return self.get(rate_id).factory(**params)

    def ids(self) -> List[str]:
        return sorted(self._entries)

    def entries(self, contains: Optional[str] = None) -> List[RegistryEntry]:
        return [self._entries[i] for i in self.ids() if contains is None or contains in i]


rate_registry = RateFunctionRegistry()


def register_rate_function(
    rate_id: str,
    description: str = "",
    adaptive: bool = False,
    params: Optional[List[str]] = None,
) -> Callable[[RateFactory], RateFactory]:
    def decorator(factory: RateFactory) -> RateFactory:
        rate_registry.register(RegistryEntry(rate_id, factory, description, adaptive, list(params or [])))
        return factory

    return decorator
