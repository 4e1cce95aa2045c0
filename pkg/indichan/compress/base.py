from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from indichan.compress.bitcost import elias_delta_length


@dataclass(frozen=True)
class Phrase:
    """
    一个解析短语。

    Attributes:
        start: 起始位置（0 起始）
        prefix: 引用的字典短语编号（0 为空短语）
        symbol: 新增符号；末尾未完成短语为 None
        x: 短语的 x 部分
        context: 短语的 y 部分（无条件解析为空元组）
    """

    start: int
    prefix: int
    symbol: Optional[int]
    x: Tuple[int, ...]
    context: Tuple[int, ...] = ()

    @property
    def complete(self) -> bool:
        return self.symbol is not None

    @property
    def length(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class ParseRecord:
    """增量解析结果。counts[l] 为第 l 个完整短语的候选数 c_l。"""

    n: int
    phrases: List[Phrase]
    counts: List[int] = field(default_factory=list)

    @property
    def complete_phrases(self) -> List[Phrase]:
        return [p for p in self.phrases if p.complete]

    @property
    def c(self) -> int:
        return len(self.phrases)

    @property
    def pending(self) -> Optional[Phrase]:
        if self.phrases and not self.phrases[-1].complete:
            return self.phrases[-1]
        return None

    def x_phrases(self) -> List[Tuple[int, ...]]:
        return [p.x for p in self.phrases]

    def complexity(self) -> float:
        """Σ_l log₂ c_l。"""
        return float(np.sum(np.log2(np.asarray(self.counts, dtype=np.float64)))) if self.counts else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "phrases": ["".join(str(s) for s in p.x) for p in self.phrases],
            "contexts": ["".join(str(s) for s in p.context) for p in self.phrases],
            "counts": list(self.counts),
            "pending": self.pending is not None,
        }


class SequentialCoder(ABC):
    """
    顺序压缩器：逐符号喂入，L_S 为已输出比特数（不减），
    terminate() 给出终止码长 L_T ≥ L_S（含长度头与未完成短语）。
    """

    def __init__(self) -> None:
        self.k = 0
        self.bits = 0

    @property
    def L_S(self) -> int:
        return self.bits

    @abstractmethod
    def feed(self, a: int, b: int = 0) -> None:
        ...

    @abstractmethod
    def pending_bits(self) -> int:
        ...

    def header_bits(self) -> int:
        return elias_delta_length(self.k) if self.k else 0

    def terminate(self) -> int:
        if self.k == 0:
            return 0
        return self.bits + self.pending_bits() + self.header_bits()

    @abstractmethod
    def fork(self) -> "SequentialCoder":
        """复制当前状态；分支继续喂入不影响原状态。"""

    def feed_many(self, xs, ys=None) -> None:
        if ys is None:
            for a in xs:
                self.feed(int(a))
        else:
            for a, b in zip(xs, ys):
                self.feed(int(a), int(b))

    def length_path(self, xs, ys=None) -> Tuple[np.ndarray, np.ndarray]:
        """继续喂入 xs，返回每步之后的 (L_S, L_T)。"""
        m = len(xs)
        ls = np.zeros(m, dtype=np.int64)
        lt = np.zeros(m, dtype=np.int64)
        for i in range(m):
            if ys is None:
                self.feed(int(xs[i]))
            else:
                self.feed(int(xs[i]), int(ys[i]))
            ls[i] = self.bits
            lt[i] = self.terminate()
        return ls, lt
