from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from indichan.analysis.stats import wilson_interval
from indichan.core.alphabet import SymbolSequence
from indichan.core.priors import Prior
from indichan.core.randomness import SharedRandomness
from indichan.errors import InvalidInputError, InvalidParameterError, check_guard
from indichan.infrastructure.config.config_manager import config_manager
from indichan.ratefn.base import RateFunction, SequenceLike, raw
from indichan.ratefn.conversion import candidate_sequence, exhaustive_weights

DECODERS = ("max_metric", "randomized_tie")


@dataclass(frozen=True)
class FixedRateCode:
    """
    固定速率随机码本：M = ⌈2^{nR}⌉ 个码字，各自从先验 Q 独立抽取，
    第 m 个码字由 (种子, m) 唯一决定。消息编号 1..M。
    """

    n: int
    M: int
    prior: Prior
    rate_fn: RateFunction
    seed: SharedRandomness
    decoder: str = "max_metric"
    _cache: Dict[int, SymbolSequence] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError(f"block length must be >= 1, got {self.n}")
        if self.M < 1:
            raise InvalidParameterError(f"codebook size must be >= 1, got {self.M}")
        if self.decoder not in DECODERS:
            raise InvalidParameterError(f"unknown decoder: {self.decoder}")

    @classmethod
    def from_rate(
        cls,
        n: int,
        rate: float,
        prior: Prior,
        rate_fn: RateFunction,
        seed: SharedRandomness,
        decoder: str = "max_metric",
    ) -> "FixedRateCode":
        if rate < 0:
            raise InvalidParameterError(f"rate must be >= 0, got {rate}")
        bits = n * rate
        limit = int(config_manager.get("guards.max_explicit_codebook_bits", 12))
        check_guard(bits, limit, "fixed-rate codebook (log2 M)")
        return cls(n, int(math.ceil(2.0 ** bits - 1e-9)), prior, rate_fn, seed, decoder)

    @property
    def rate(self) -> float:
        """log₂M / n。"""
        return float(np.log2(self.M) / self.n)

    def codeword(self, message: int) -> SymbolSequence:
        if not 1 <= message <= self.M:
            raise InvalidInputError(f"message index {message} outside 1..{self.M}")
        word = self._cache.get(message)
        if word is None:
            word = self.prior.sample(self.n, self.seed.derive(f"codebook/{message}"))
            self._cache[message] = word
        return word

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "M": self.M,
            "prior": self.prior.to_dict(),
            "rate_fn": self.rate_fn.describe(),
            "seed": self.seed.to_dict(),
            "decoder": self.decoder,
        }


def fixed_encode(code: FixedRateCode, message: int, rand: Optional[SharedRandomness] = None) -> SymbolSequence:
    """码字只依赖码本种子；rand 指定时替换码本种子（与译码端共享）。"""
    if rand is not None and rand != code.seed:
        code = FixedRateCode(code.n, code.M, code.prior, code.rate_fn, rand, code.decoder)
    return code.codeword(message)


def codebook_scores(code: FixedRateCode, y: SequenceLike) -> np.ndarray:
    return np.array([code.rate_fn(code.codeword(m), y) for m in range(1, code.M + 1)], dtype=np.float64)


def fixed_decode(
    code: FixedRateCode,
    y: SequenceLike,
    threshold: Optional[float] = None,
    rand: Optional[SharedRandomness] = None,
) -> int:
    """
    max_metric：argmax_m R_emp(X_m, y)，平局取最小编号。
    randomized_tie：在 {m : R_emp(X_m, y) ≥ R} 中均匀选一个；集合为空时退回 argmax。
    """
    if raw(y).shape[0] != code.n:
        raise InvalidInputError(f"channel output length {raw(y).shape[0]} != n={code.n}")
    scores = codebook_scores(code, y)
    # nan（Q(x)=0 等）永不胜出
    scores = np.where(np.isnan(scores), -np.inf, scores)
    best = int(np.argmax(scores)) + 1
    if code.decoder == "max_metric":
        return best
    level = code.rate if threshold is None else float(threshold)
    crossers = np.flatnonzero(scores >= level)
    if crossers.size == 0:
        return best
    rng = (rand or code.seed.derive("decoder")).generator()
    return int(rng.choice(crossers)) + 1


@dataclass(frozen=True)
class ConditionalError:
    """给定 (x, y) 时随机码本的错误概率：p_ge = Pr_Q{R_emp(X̃, y) ≥ R_emp(x, y)}。"""

    p_ge: float
    exact: float
    estimate: float
    trials: int
    ci: Tuple[float, float]
    envelope: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p_ge": self.p_ge,
            "exact": self.exact,
            "estimate": self.estimate,
            "trials": self.trials,
            "ci": list(self.ci),
            "envelope": self.envelope,
        }


def _trial_error(code: FixedRateCode, x: SequenceLike, y: SequenceLike, rand: SharedRandomness) -> bool:
    """新码本里把发送码字固定为 x，放在编号 M（max_metric 平局取最小编号，故平局计为错误）。"""
    trial = FixedRateCode(code.n, code.M, code.prior, code.rate_fn, rand, code.decoder)
    trial._cache[code.M] = x
    return fixed_decode(trial, y, rand=rand.derive("decoder")) != code.M


def conditional_error(
    code: FixedRateCode,
    x: SequenceLike,
    y: SequenceLike,
    trials: Optional[int] = None,
    rand: Optional[SharedRandomness] = None,
    epsilon: float = 1.0,
) -> ConditionalError:
    """
    穷举 Q 求 p_ge 与 exact = 1 − (1 − p_ge)^{M−1}（平局按错误计）；
    estimate 为 trials 次独立抽取码本、经 fixed_decode 译码的错误比例。

    epsilon 为速率函数满足 Q{R_emp(X̃, y) ≥ t} ≤ ε·2^{−nt} 的常数，
    envelope = min(1, ε·2^{n(R − R_emp(x, y))})。
    """
    if not 0 < epsilon <= 1:
        raise InvalidParameterError(f"epsilon must be in (0,1], got {epsilon}")
    if raw(x).shape[0] != code.n:
        raise InvalidInputError(f"codeword length {raw(x).shape[0]} != n={code.n}")
    seqs, weights = exhaustive_weights(code.prior, code.n)
    reference = code.rate_fn(x, y)
    scores = np.array([code.rate_fn(candidate_sequence(code.prior, row), y) for row in seqs])
    scores = np.where(np.isnan(scores), -np.inf, scores)
    p_ge = float(min(1.0, np.sum(weights[scores >= reference])))
    exact = float(-np.expm1((code.M - 1) * np.log1p(-p_ge))) if p_ge < 1 else float(code.M > 1)
    trials = int(trials or config_manager.get("monte_carlo.trials", 10_000))
    base = rand or code.seed.derive("error-estimate")
    errors = sum(_trial_error(code, x, y, base.derive(f"trial/{t}")) for t in range(trials))
    envelope = float(min(1.0, epsilon * 2.0 ** (code.n * (code.rate - reference))))
    return ConditionalError(p_ge, exact, errors / trials, trials, wilson_interval(errors, trials), envelope)
