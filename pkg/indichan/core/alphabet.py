from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, Sequence, Union

import numpy as np

from indichan.errors import InvalidInputError, InvalidParameterError


class AlphabetKind(str, Enum):
    FINITE = "finite"
    REAL = "real"
    COMPLEX = "complex"


@dataclass(frozen=True)
class Alphabet:
    """
    符号字母表：有限集合 {0..size-1}，或 t 维实/复向量。

    Attributes:
        kind: finite / real / complex
        size: 有限字母表大小（≥ 2）
        dim: 向量维数 t（≥ 1）
    """

    kind: AlphabetKind
    size: int = 0
    dim: int = 0

    def __post_init__(self):
        if self.kind == AlphabetKind.FINITE:
            if self.size < 2:
                raise InvalidParameterError(f"finite alphabet needs size >= 2, got {self.size}")
        elif self.dim < 1:
            raise InvalidParameterError(f"vector alphabet needs dim >= 1, got {self.dim}")

    @classmethod
    def finite(cls, size: int) -> "Alphabet":
        return cls(AlphabetKind.FINITE, size=int(size))

    @classmethod
    def real(cls, dim: int) -> "Alphabet":
        return cls(AlphabetKind.REAL, dim=int(dim))

    @classmethod
    def complex(cls, dim: int) -> "Alphabet":
        return cls(AlphabetKind.COMPLEX, dim=int(dim))

    @property
    def is_finite(self) -> bool:
        return self.kind == AlphabetKind.FINITE

    @property
    def d(self) -> int:
        """实数 d=1，复数 d=2。"""
        return 2 if self.kind == AlphabetKind.COMPLEX else 1

    @property
    def log_size(self) -> float:
        if not self.is_finite:
            raise InvalidInputError("log_size is defined for finite alphabets only")
        return float(np.log2(self.size))

    def coerce(self, data: Any) -> np.ndarray:
        """校验并转换为规范数组：有限字母表为 int64 一维，向量字母表为 (n, t)。"""
        if self.is_finite:
            arr = np.asarray(data)
            if arr.ndim != 1:
                raise InvalidInputError(f"finite-alphabet data must be 1-D, got shape {arr.shape}")
            if arr.size and not np.issubdtype(arr.dtype, np.integer):
                if not np.all(np.equal(np.mod(arr, 1), 0)):
                    raise InvalidInputError("finite-alphabet symbols must be integers")
            arr = arr.astype(np.int64)
            if arr.size and (arr.min() < 0 or arr.max() >= self.size):
                raise InvalidInputError(f"symbol outside alphabet of size {self.size}")
            return arr
        dtype = np.complex128 if self.kind == AlphabetKind.COMPLEX else np.float64
        arr = np.asarray(data, dtype=dtype)
        if arr.ndim == 1 and self.dim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise InvalidInputError(f"vector data must have shape (n, {self.dim}), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("vector symbols must be finite")
        return arr

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "size": self.size, "dim": self.dim}


@dataclass(frozen=True)
class SymbolSequence:
    """长度为 n 的符号序列（信道输入 x、输出 y 或状态 z）。数据只读。"""

    alphabet: Alphabet
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = self.alphabet.coerce(self.data)
        if arr.shape[0] < 1:
            raise InvalidInputError("sequence length must be >= 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def of(cls, alphabet: Alphabet, data: Union[Sequence, Iterable, np.ndarray]) -> "SymbolSequence":
        return cls(alphabet, np.asarray(list(data) if not isinstance(data, np.ndarray) else data))

    @classmethod
    def finite(cls, size: int, data: Union[Sequence[int], np.ndarray]) -> "SymbolSequence":
        return cls(Alphabet.finite(size), np.asarray(data))

    @classmethod
    def from_string(cls, text: str, size: int = 2) -> "SymbolSequence":
        """"1011" -> [1,0,1,1]，便于测试与命令行。"""
        return cls(Alphabet.finite(size), np.array([int(c) for c in text.strip()], dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    def __len__(self) -> int:
        return self.n

    def segment(self, i: int, j: int) -> np.ndarray:
        """
        x_i^j（1 起始，闭区间）。越界自动截断，j < i 时为空。
        """
        lo = max(int(i), 1) - 1
        hi = min(int(j), self.n)
        if hi <= lo:
            return self.data[0:0]
        return self.data[lo:hi]

    def prefix(self, k: int) -> "SymbolSequence":
        return SymbolSequence(self.alphabet, self.data[: max(1, min(k, self.n))])

    def to_dict(self) -> Dict[str, Any]:
        return {"alphabet": self.alphabet.to_dict(), "n": self.n, "data": self.data.tolist()}
