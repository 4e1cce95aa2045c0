from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from indichan.core.priors import MarkovPrior, Prior
from indichan.errors import InvalidInputError, InvalidParameterError
from indichan.ratefn.base import SequenceLike, raw


class ConditionalModel(ABC):
    """
    条件概率模型 P(x | y)，按字母分解为 P(x_i | x^{i-1}, y^{i+D})。

    delay D 为因果延迟：P(x^k | y) 只依赖 y^{k+D}。
    """

    family: str = "conditional"
    delay: int = 0

    @abstractmethod
    def letter_log_probs(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """log₂ P(x_i | x^{i-1}, y^{i+D})，i = 1..n。"""

    def log_prob(self, x: SequenceLike, y: SequenceLike) -> float:
        terms = self.letter_log_probs(raw(x), raw(y))
        if np.any(np.isneginf(terms)):
            return -np.inf
        return float(np.sum(terms))

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "delay": self.delay}


@dataclass(frozen=True)
class PriorModel(ConditionalModel):
    """P(x|y) = Q(x)：与 y 无关。"""

    prior: Prior
    family: str = field(default="prior", init=False)

    def letter_log_probs(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.prior.letter_log_masses(x)


@dataclass(frozen=True)
class MemorylessModel(ConditionalModel):
    """P(x_i | y_i) = table[y_i, x_i]。"""

    table: np.ndarray
    family: str = field(default="memoryless", init=False)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.ndim != 2 or np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-12):
            raise InvalidParameterError("memoryless table rows must be distributions over x")
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @classmethod
    def bsc(cls, p: float) -> "MemorylessModel":
        return cls(np.array([[1.0 - p, p], [p, 1.0 - p]]))

    @classmethod
    def identity(cls, size: int) -> "MemorylessModel":
        return cls(np.eye(size))

    def letter_log_probs(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if x.shape[0] != y.shape[0]:
            raise InvalidInputError(f"length mismatch: {x.shape[0]} != {y.shape[0]}")
        with np.errstate(divide="ignore"):
            return np.log2(self.table[y, x])

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "delay": self.delay, "table": self.table.tolist()}


def occurrence_rank(keys: np.ndarray) -> np.ndarray:
    """rank[i] = #{i' < i : keys[i'] = keys[i]}。"""
    keys = np.asarray(keys, dtype=np.int64)
    n = keys.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_keys)) + 1]
    group_start = np.repeat(starts, np.diff(np.r_[starts, n]))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n) - group_start
    return rank


def kt_letter_log_probs(symbols: np.ndarray, states: np.ndarray, size: int) -> np.ndarray:
    """
    每个状态独立的 add-½（Krichevsky–Trofimov）顺序概率：
    P(a | z) = (n_{a,z} + ½) / (n_z + |X|/2)，计数只用此前的符号。
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    states = np.asarray(states, dtype=np.int64)
    joint_rank = occurrence_rank(states * size + symbols)
    state_rank = occurrence_rank(states)
    return np.log2(joint_rank + 0.5) - np.log2(state_rank + size / 2.0)


@dataclass(frozen=True)
class KTMixtureModel(ConditionalModel):
    """
    条件无记忆族在 Dirichlet-½ 先验下的混合 P_w(x | z)。
    状态 z_i = y_i（use_y=True）或常数；0-因果。
    """

    x_size: int
    use_y: bool = True
    family: str = field(default="kt", init=False)

    def letter_log_probs(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        states = y if self.use_y else np.zeros_like(x)
        if states.shape[0] != x.shape[0]:
            raise InvalidInputError(f"length mismatch: {x.shape[0]} != {states.shape[0]}")
        return kt_letter_log_probs(x, states, self.x_size)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "x_size": self.x_size, "use_y": self.use_y}


@dataclass(frozen=True)
class ModuloKTModel(ConditionalModel):
    """P(x_i | x^{i-1}, y^i) = P_w(z_i | z^{i-1})，z = y − x (mod |X|)。给定 y_i，x_i ↔ z_i 一一对应。"""

    size: int
    family: str = field(default="modulo-kt", init=False)

    def letter_log_probs(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if x.shape[0] != y.shape[0]:
            raise InvalidInputError(f"length mismatch: {x.shape[0]} != {y.shape[0]}")
        z = np.mod(y - x, self.size)
        return kt_letter_log_probs(z, np.zeros_like(z), self.size)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "size": self.size}


def _shifted(arr: np.ndarray, lag: int, pad: int) -> np.ndarray:
    """s_i = arr[i + lag]，越界位置填 pad。"""
    n = arr.shape[0]
    out = np.full(n, pad, dtype=np.int64)
    if lag >= 0:
        if lag < n:
            out[: n - lag] = arr[lag:]
    elif -lag < n:
        out[-lag:] = arr[: n + lag]
    return out


def _state_index(columns: List[np.ndarray], n: int) -> np.ndarray:
    if not columns:
        return np.zeros(n, dtype=np.int64)
    _, inverse = np.unique(np.stack(columns, axis=1), axis=0, return_inverse=True)
    return np.asarray(inverse, dtype=np.int64).ravel()


def markov_states(x: np.ndarray, y: np.ndarray, order: int, x_pad: int = 0, y_pad: int = 0):
    """z_x,i = x_{i−D}^{i−1}，z_y,i = y_{i−D}^{i+D}；边界用固定初始状态补齐。返回紧凑编号。"""
    n = x.shape[0]
    zx_cols = [_shifted(x, -m, x_pad) for m in range(1, order + 1)]
    zy_cols = [_shifted(y, lag, y_pad) for lag in range(-order, order + 1)]
    zx = _state_index(zx_cols, n)
    zy = _state_index(zy_cols, n)
    return zx, zy, _state_index([zx, zy], n)


@dataclass(frozen=True)
class MarkovKTModel(ConditionalModel):
    """
    D 阶马尔可夫状态 z_i = (x_{i−D}^{i−1}, y_{i−D}^{i+D}) 上的 add-½ 混合，delay = D。

    第 i 个字母只用到 y^{i+D}；超出序列末尾的 y 用 y_pad 补齐，因果度量不会取到这些字母。
    """

    x_size: int
    order: int = 1
    x_pad: int = 0
    y_pad: int = 0
    family: str = field(default="markov-kt", init=False)

    def __post_init__(self):
        if self.order < 0:
            raise InvalidParameterError(f"markov order must be >= 0, got {self.order}")

    @property
    def delay(self) -> int:
        return self.order

    def letter_log_probs(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if x.shape[0] != y.shape[0]:
            raise InvalidInputError(f"length mismatch: {x.shape[0]} != {y.shape[0]}")
        x = np.asarray(x, dtype=np.int64)
        _, _, z = markov_states(x, np.asarray(y, dtype=np.int64), self.order, self.x_pad, self.y_pad)
        return kt_letter_log_probs(x, z, self.x_size)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "x_size": self.x_size, "delay": self.delay}


def conditional_form_rate(model: ConditionalModel, prior: Prior, x: SequenceLike, y: SequenceLike) -> float:
    """(1/n)(log₂ P(x|y) − log₂ Q(x))；Q(x)=0 时为 nan。"""
    xa, ya = raw(x), raw(y)
    log_q = prior.log_mass(xa)
    if np.isneginf(log_q):
        return float("nan")
    return (model.log_prob(xa, ya) - log_q) / xa.shape[0]


def _initial_symbol(prior: Optional[Prior]) -> int:
    return prior.initial_symbol if isinstance(prior, MarkovPrior) else 0


def model_from_name(
    kind: str, size: int = 2, p: Optional[float] = None, prior: Optional[Prior] = None, order: int = 1
) -> ConditionalModel:
    if kind == "kt":
        return KTMixtureModel(size)
    if kind == "modulo-kt":
        return ModuloKTModel(size)
    if kind == "markov-kt":
        return MarkovKTModel(size, order, x_pad=_initial_symbol(prior))
    if kind == "bsc":
        if p is None:
            raise InvalidParameterError("bsc model needs p")
        return MemorylessModel.bsc(p)
    if kind == "identity":
        return MemorylessModel.identity(size)
    if kind == "prior":
        if prior is None:
            raise InvalidParameterError("prior model needs a prior")
        return PriorModel(prior)
    raise InvalidParameterError(f"unknown conditional model: {kind}")
