from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List

import numpy as np
from scipy.special import comb

from indichan.core.priors import Prior
from indichan.errors import InvalidParameterError
from indichan.ratefn.base import SequenceLike, raw
from indichan.ratefn.conversion import Score, candidate_sequence, exhaustive_weights

LOG2E = float(np.log2(np.e))


@dataclass(frozen=True)
class SystemTrace:
    """一次系统运行的记录：输入/输出对、使用的速率与是否出错。"""

    x: tuple
    y: tuple
    rate: float
    error: bool

    @classmethod
    def of(cls, x: SequenceLike, y: SequenceLike, rate: float, error: bool) -> "SystemTrace":
        return cls(tuple(raw(x).ravel().tolist()), tuple(raw(y).ravel().tolist()), float(rate), bool(error))

    def matches(self, x: SequenceLike, y: SequenceLike) -> bool:
        return self.x == tuple(raw(x).ravel().tolist()) and self.y == tuple(raw(y).ravel().tolist())


def goodput_function(traces: Iterable[SystemTrace], x: SequenceLike, y: SequenceLike) -> float:
    """(x, y) 条件下的平均无差错速率 E[(1−err)·R]；没有匹配的记录时为 nan。"""
    values = [(0.0 if t.error else 1.0) * t.rate for t in traces if t.matches(x, y)]
    if not values:
        return float("nan")
    return float(np.mean(values))


def random_coding_correct_probability(below: float, equal: float, M: int) -> float:
    """
    最大度量译码 + 平局均匀随机选择下的正确概率：
    Σ_t C(M−1, t)·b^t·a^{M−1−t} / (1+t)，a = Pr{u < u(x)}，b = Pr{u = u(x)}。
    """
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    t = np.arange(M)
    terms = comb(M - 1, t) * np.power(equal, t) * np.power(below, M - 1 - t) / (1.0 + t)
    return float(np.sum(terms))


def random_coding_goodput(score: Score, prior: Prior, x: SequenceLike, y: SequenceLike, M: int) -> float:
    """随机码本（其余 M−1 个码字 i.i.d. ~ Q）的 R_good(x, y) = (log₂M / n)·P_correct，穷举 Q。"""
    n = raw(x).shape[0]
    seqs, weights = exhaustive_weights(prior, n)
    reference = score(x, y)
    scores = np.array([score(candidate_sequence(prior, row), y) for row in seqs])
    below = float(np.sum(weights[scores < reference]))
    equal = float(np.sum(weights[scores == reference]))
    return float(np.log2(M) / n) * random_coding_correct_probability(below, equal, M)


def goodput_ccdf_check(score: Score, prior: Prior, y: SequenceLike, M: int) -> Dict[str, Any]:
    """
    对固定 y 穷举所有 x，检查 Pr_Q{R_good(X, y) ≥ R} ≤ e·2^{−nR}（R 取所有达到的值）。
    """
    n = raw(y).shape[0]
    seqs, weights = exhaustive_weights(prior, n)
    scores = np.array([score(candidate_sequence(prior, row), y) for row in seqs])
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    sorted_w = weights[order]
    cum = np.concatenate([[0.0], np.cumsum(sorted_w)])
    lo = np.searchsorted(sorted_scores, scores, side="left")
    hi = np.searchsorted(sorted_scores, scores, side="right")
    below = cum[lo]
    equal = cum[hi] - cum[lo]
    rate = float(np.log2(M) / n)
    goodput = np.array([rate * random_coding_correct_probability(b, e, M) for b, e in zip(below, equal)])

    rows: List[Dict[str, float]] = []
    holds = True
    for r in np.unique(goodput):
        prob = float(np.sum(weights[goodput >= r - 1e-15]))
        bound = float(np.e * 2.0 ** (-n * r))
        ok = prob <= bound + 1e-12
        holds = holds and ok
        rows.append({"R": float(r), "probability": prob, "bound": bound})
    return {"n": n, "M": M, "holds": holds, "rows": rows, "goodput": goodput}


def goodput_redundancy(n: int) -> float:
    """good-put 函数的内在冗余上界 log₂(e)/n。"""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    return LOG2E / n

