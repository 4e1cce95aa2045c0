from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import xlogy

from indichan.core.alphabet import SymbolSequence
from indichan.errors import InvalidInputError

LN2 = float(np.log(2.0))

FiniteLike = Union[SymbolSequence, np.ndarray, Sequence[int]]


def finite_array(seq: FiniteLike, size: Optional[int] = None) -> Tuple[np.ndarray, int]:
    """返回 (int64 数组, 字母表大小)。裸数组未给 size 时取 max(2, max+1)。"""
    if isinstance(seq, SymbolSequence):
        if not seq.alphabet.is_finite:
            raise InvalidInputError("empirical measures need a finite alphabet")
        return seq.data, seq.alphabet.size
    arr = np.asarray(seq)
    if arr.ndim != 1:
        raise InvalidInputError(f"finite sequence must be 1-D, got shape {arr.shape}")
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise InvalidInputError("symbols must be non-negative")
    inferred = max(2, int(arr.max()) + 1) if arr.size else 2
    if size is None:
        size = inferred
    elif arr.size and int(arr.max()) >= size:
        raise InvalidInputError(f"symbol outside alphabet of size {size}")
    return arr, int(size)


def joint_index(*seqs: FiniteLike) -> Tuple[np.ndarray, int]:
    """把若干序列逐位合并为一个混合进制的上下文索引，返回 (索引, 上下文数)。"""
    if not seqs:
        raise InvalidInputError("joint_index needs at least one sequence")
    index = None
    total = 1
    length = None
    for seq in seqs:
        arr, size = finite_array(seq)
        if length is not None and arr.shape[0] != length:
            raise InvalidInputError(f"length mismatch: {arr.shape[0]} != {length}")
        length = arr.shape[0]
        index = arr.copy() if index is None else index * size + arr
        total *= size
    return index, total


def _log2_count_term(counts: np.ndarray) -> float:
    """Σ c·log₂ c，0·log 0 = 0。"""
    return float(np.sum(xlogy(counts, counts)) / LN2)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """
    经验分布：counts[a, c] 为符号 a 与上下文 c 同时出现的次数。
    无上下文时只有一列。
    """

    counts: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim == 1:
            counts = counts.reshape(-1, 1)
        if np.any(counts < 0):
            raise InvalidInputError("counts must be non-negative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", int(counts.sum()))

    @property
    def marginal_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def context_counts(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def marginal(self) -> np.ndarray:
        return self.marginal_counts / self.n

    def joint(self) -> np.ndarray:
        return self.counts / self.n

    def conditional(self) -> np.ndarray:
        """P̂(a | c)；未出现的上下文列全为 0。"""
        ctx = self.context_counts
        out = np.zeros(self.counts.shape, dtype=np.float64)
        seen = ctx > 0
        out[:, seen] = self.counts[:, seen] / ctx[seen]
        return out

    def probability(self, symbol: int, context: int = 0) -> float:
        return float(self.conditional()[symbol, context])

    def log2_probability(self) -> float:
        """log₂ p̂(x|z) = Σ n_ac log n_ac − Σ n_c log n_c。"""
        return _log2_count_term(self.counts) - _log2_count_term(self.context_counts)

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "counts": self.counts.tolist()}


def empirical_distribution(a: FiniteLike, context: Optional[FiniteLike] = None) -> EmpiricalDistribution:
    arr, size = finite_array(a)
    if context is None:
        return EmpiricalDistribution(np.bincount(arr, minlength=size))
    ctx, ctx_size = finite_array(context)
    if ctx.shape[0] != arr.shape[0]:
        raise InvalidInputError(f"length mismatch: {arr.shape[0]} != {ctx.shape[0]}")
    flat = np.bincount(arr * ctx_size + ctx, minlength=size * ctx_size)
    return EmpiricalDistribution(flat.reshape(size, ctx_size))


def empirical_probability(x: FiniteLike, context: Optional[FiniteLike] = None) -> float:
    return empirical_distribution(x, context).log2_probability()


def empirical_entropy(x: FiniteLike, context: Optional[FiniteLike] = None) -> float:
    dist = empirical_distribution(x, context)
    return -dist.log2_probability() / dist.n


def quazi_empirical_entropy(
    x: FiniteLike,
    model_mass: np.ndarray,
    context: Optional[FiniteLike] = None,
) -> float:
    """
    Ĥ_p(x) = −(1/n) Σ log₂ p(x_i)；条件形式下 model_mass[c, a] = p(a | c)。
    已出现符号质量为 0 时返回 +inf。
    """
    arr, _ = finite_array(x)
    mass = np.asarray(model_mass, dtype=np.float64)
    if context is None:
        if mass.ndim != 1:
            raise InvalidInputError("unconditional model mass must be 1-D")
        probs = mass[arr]
    else:
        ctx, _ = finite_array(context)
        if ctx.shape[0] != arr.shape[0]:
            raise InvalidInputError(f"length mismatch: {arr.shape[0]} != {ctx.shape[0]}")
        if mass.ndim != 2:
            raise InvalidInputError("conditional model mass must be indexed [context, symbol]")
        probs = mass[ctx, arr]
    if np.any(probs <= 0):
        return np.inf
    return float(-np.sum(np.log2(probs)) / arr.shape[0])


def empirical_mutual_information(x: FiniteLike, y: FiniteLike) -> float:
    """Î(x;y) = Ĥ(x) − Ĥ(x|y) = (1/n) log₂(p̂(x|y)/p̂(x))。"""
    cond = empirical_distribution(x, y)
    marg = empirical_distribution(x)
    return (cond.log2_probability() - marg.log2_probability()) / cond.n


def mutual_information_of_joint(joint: np.ndarray) -> float:
    """给定联合分布矩阵直接计算 I(X;Y)（用于与经验公式交叉校验）。"""
    p = np.asarray(joint, dtype=np.float64)
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    outer = px * py
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / outer[mask])))


def conditional_empirical_mutual_information(x: FiniteLike, y: FiniteLike, z: FiniteLike) -> float:
    """Î(x; y | z) = Ĥ(x|z) − Ĥ(x|y,z)。"""
    yz, _ = joint_index(y, z)
    return empirical_entropy(x, z) - empirical_entropy(x, yz)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """D(p‖q)（比特）。supp(p) ⊄ supp(q) 时返回 +inf。"""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidInputError(f"distribution shapes differ: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        return np.inf
    return float(np.sum(p[support] * np.log2(p[support] / q[support])))


def ml_probability_conditional_memoryless(x: FiniteLike, z: FiniteLike) -> float:
    """条件无记忆族的最大似然概率：即条件经验分布 p̂(x|z)。"""
    return empirical_probability(x, z)


def binary_entropy(p: float) -> float:
    p = float(p)
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))
