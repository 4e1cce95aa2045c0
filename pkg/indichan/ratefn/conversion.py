from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from indichan.analysis.stats import wilson_interval
from indichan.core.alphabet import SymbolSequence
from indichan.core.priors import Prior
from indichan.core.randomness import SharedRandomness
from indichan.empirics.types import all_sequences
from indichan.errors import InvalidParameterError
from indichan.infrastructure.config.config_manager import config_manager
from indichan.infrastructure.utils.logging import get_logger
from indichan.ratefn.base import SequenceLike, raw

logger = get_logger(__name__)

Score = Callable[[Any, Any], float]


@dataclass(frozen=True)
class ConversionResult:
    rate: float
    approx_rate: float
    p: float
    method: str
    trials: Optional[int] = None
    ci: Optional[Tuple[float, float]] = None
    capped: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rate": self.rate,
            "approx_rate": self.approx_rate,
            "p": self.p,
            "method": self.method,
            "trials": self.trials,
            "ci": None if self.ci is None else list(self.ci),
            "capped": self.capped,
        }


def candidate_sequence(prior: Prior, row: np.ndarray) -> Any:
    if prior.alphabet.is_finite:
        return SymbolSequence(prior.alphabet, row)
    return row


def exhaustive_weights(prior: Prior, n: int, guard: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """𝒳ⁿ 全部序列及其先验概率 Q(x̃)。"""
    if not prior.alphabet.is_finite:
        raise InvalidParameterError("exhaustive enumeration needs a finite alphabet")
    seqs = all_sequences(prior.alphabet.size, n, guard)
    weights = np.array([2.0 ** prior.log_mass(row) for row in seqs])
    return seqs, weights


def exceedance_probability(
    score: Score,
    prior: Prior,
    x: SequenceLike,
    y: SequenceLike,
    method: str = "auto",
    trials: Optional[int] = None,
    rand: Optional[SharedRandomness] = None,
) -> Tuple[float, str, Optional[Tuple[float, float]], Optional[int]]:
    """
    p(x, y) = Pr_Q{u(X̃, y) > u(x, y)}，严格不等号。
    返回 (p, 方法, 置信区间, 试验次数)。
    """
    xa = raw(x)
    n = xa.shape[0]
    reference = score(x, y)
    if method == "auto":
        finite = prior.alphabet.is_finite
        limit = int(config_manager.get("guards.max_enumeration", 10**7))
        method = "exhaustive" if finite and float(prior.alphabet.size) ** n <= limit else "monte_carlo"
    if method == "exhaustive":
        seqs, weights = exhaustive_weights(prior, n)
        scores = np.array([score(candidate_sequence(prior, row), y) for row in seqs])
        return float(np.sum(weights[scores > reference])), method, None, None
    if method != "monte_carlo":
        raise InvalidParameterError(f"unknown method: {method}")
    trials = int(trials or config_manager.get("monte_carlo.trials", 10_000))
    rand = rand or SharedRandomness(int(config_manager.get("simulation.master_seed", 0)))
    hits = 0
    for i in range(trials):
        candidate = prior.sample(n, rand.derive(f"conversion/{i}"))
        if score(candidate if prior.alphabet.is_finite else candidate.data, y) > reference:
            hits += 1
    return hits / trials, method, wilson_interval(hits, trials), trials


def rate_from_exceedance(p: float, n: int, epsilon: float, max_rate: float) -> Tuple[float, float, bool]:
    """
    (1/n)log₂(log(1−ε)/log(1−p) + 1) 以及近似 (1/n)log₂(ε/p)。
    p = 0 时封顶为 max_rate（(1/n)log₂ M_max）。
    """
    if not 0 < epsilon < 1:
        raise InvalidParameterError(f"epsilon must be in (0,1), got {epsilon}")
    if p <= 0:
        return max_rate, max_rate, True
    if p >= 1:
        return 0.0, float(np.log2(epsilon) / n), False
    m = np.log1p(-epsilon) / np.log1p(-p) + 1.0
    rate = float(np.log2(m) / n)
    approx = float(np.log2(epsilon / p) / n)
    if rate > max_rate:
        return max_rate, approx, True
    return rate, approx, False


def metric_to_rate(
    score: Score,
    prior: Prior,
    x: SequenceLike,
    y: SequenceLike,
    epsilon: float,
    method: str = "auto",
    trials: Optional[int] = None,
    rand: Optional[SharedRandomness] = None,
) -> ConversionResult:
    """把任意译码度量 u 转换为速率函数：码本大小取使随机编码错误概率恰为 ε 的 M。"""
    n = raw(x).shape[0]
    p, used, ci, count = exceedance_probability(score, prior, x, y, method, trials, rand)
    max_rate = prior.alphabet.log_size if prior.alphabet.is_finite else float("inf")
    rate, approx, capped = rate_from_exceedance(p, n, epsilon, max_rate)
    logger.debug("metric converted n=%d p=%.6g rate=%.6g method=%s", n, p, rate, used)
    return ConversionResult(rate, approx, p, used, count, ci, capped)
