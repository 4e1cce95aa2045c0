from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.special import comb, gammaln

from indichan.empirics.distributions import FiniteLike, empirical_distribution, finite_array
from indichan.errors import InvalidInputError, InvalidParameterError, check_guard
from indichan.infrastructure.config.config_manager import config_manager

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class TypeClass:
    """联合类型：(x, y) 在 𝒳×𝒴 上的联合计数矩阵 counts[a, b]。"""

    counts: np.ndarray
    n: int

    @property
    def sx(self) -> int:
        return int(self.counts.shape[0])

    @property
    def sy(self) -> int:
        return int(self.counts.shape[1])

    @property
    def key(self) -> tuple:
        return tuple(int(c) for c in self.counts.ravel())

    def contains(self, x: FiniteLike, y: FiniteLike) -> bool:
        arr, _ = finite_array(x, self.sx)
        if arr.shape[0] != self.n:
            return False
        return type_of(x, y, self.sx, self.sy).key == self.key

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "counts": self.counts.tolist()}


def type_of(x: FiniteLike, y: FiniteLike, sx: Optional[int] = None, sy: Optional[int] = None) -> TypeClass:
    xa, sx = finite_array(x, sx)
    ya, sy = finite_array(y, sy)
    if xa.shape[0] != ya.shape[0]:
        raise InvalidInputError(f"length mismatch: {xa.shape[0]} != {ya.shape[0]}")
    counts = np.bincount(xa * sy + ya, minlength=sx * sy).reshape(sx, sy)
    counts.flags.writeable = False
    return TypeClass(counts, int(xa.shape[0]))


def type_count(sx: int, sy: int, n: int) -> int:
    """联合类型个数 C(n+m−1, m−1)，m = |𝒳|·|𝒴|。"""
    m = sx * sy
    return int(comb(n + m - 1, m - 1, exact=True))


def type_count_bound(sx: int, sy: int, n: int) -> float:
    """N_T ≤ (n+1)^{|𝒳||𝒴|}。"""
    return float((n + 1) ** (sx * sy))


def enumerate_types(sx: int, sy: int, n: int, guard: Optional[int] = None) -> List[TypeClass]:
    if sx < 1 or sy < 1 or n < 0:
        raise InvalidParameterError(f"invalid type enumeration sizes sx={sx} sy={sy} n={n}")
    limit = int(guard if guard is not None else config_manager.get("guards.max_types", 10**7))
    check_guard(type_count(sx, sy, n), limit, "type enumeration")
    m = sx * sy
    out: List[TypeClass] = []
    # 隔板法：在 n+m−1 个位置中选 m−1 个隔板
    for bars in combinations(range(n + m - 1), m - 1):
        prev = -1
        cells = []
        for b in bars:
            cells.append(b - prev - 1)
            prev = b
        cells.append(n + m - 1 - prev - 1)
        counts = np.array(cells, dtype=np.int64).reshape(sx, sy)
        counts.flags.writeable = False
        out.append(TypeClass(counts, n))
    return out


def log2_conditional_type_size(x: FiniteLike, y: FiniteLike) -> float:
    """log₂ |T_{x|y}| = log₂ [ Π_b n_b! / Π_{a,b} n_ab! ]：与 y 构成相同联合类型的 x̃ 个数。"""
    dist = empirical_distribution(x, y)
    return float((np.sum(gammaln(dist.context_counts + 1)) - np.sum(gammaln(dist.counts + 1))) / LN2)


def all_sequences(size: int, n: int, guard: Optional[int] = None) -> np.ndarray:
    """按字典序列出 𝒳ⁿ 的全部序列，形状 (|X|ⁿ, n)。"""
    if size < 1 or n < 0:
        raise InvalidParameterError(f"invalid enumeration sizes size={size} n={n}")
    limit = int(guard if guard is not None else config_manager.get("guards.max_enumeration", 10**7))
    check_guard(float(size) ** n, limit, "sequence enumeration")
    index = np.arange(size ** n, dtype=np.int64)
    powers = size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (index[:, None] // powers[None, :]) % size
