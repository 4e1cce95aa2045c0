from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterator, Optional

import numpy as np

from indichan.coding.adaptive import AdaptiveSession, AdaptiveTranscript, BlockEngine, run_blocks
from indichan.core.channels import Channel
from indichan.core.priors import Prior
from indichan.core.randomness import SharedRandomness, random_bits
from indichan.errors import InvalidParameterError
from indichan.infrastructure.utils.logging import bind_logger, get_logger
from indichan.ratefn.base import DecodingMetric, MetricMetadata

_log = get_logger(__name__)


@dataclass(frozen=True)
class EpochSchedule:
    """
    倍增技巧的 epoch 划分：第 i 个 epoch 长 h_i = 2^i，结束于 N_i = 2^{i+1} − 1，
    错误预算 ε_i = ε/(2i²)，每块比特数 K_i = ⌈√(h_i·k_{h_i}·R_max)⌉。

    位置 1 为空闲的第 0 个 epoch（长度 1），使 N_i = 1 + Σ_{l≤i} 2^l 成立。
    """

    epsilon: float
    metadata: MetricMetadata
    d_fb: int = 1
    r_max: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise InvalidParameterError(f"epsilon must be in (0,1), got {self.epsilon}")
        if self.d_fb < 1:
            raise InvalidParameterError(f"d_fb must be >= 1, got {self.d_fb}")
        if self.rate_max is None or self.rate_max <= 0:
            raise InvalidParameterError("doubling needs a positive R_max to choose K_i")

    @property
    def rate_max(self) -> Optional[float]:
        return self.r_max if self.r_max is not None else self.metadata.r_max

    @property
    def b1(self) -> int:
        return self.metadata.b0 + 2 * self.d_fb - 1

    @staticmethod
    def length(i: int) -> int:
        return 2 ** i

    @staticmethod
    def end(i: int) -> int:
        return 2 ** (i + 1) - 1

    def epoch_epsilon(self, i: int) -> float:
        if i < 1:
            raise InvalidParameterError(f"epochs are numbered from 1, got {i}")
        return self.epsilon / (2.0 * i * i)

    def k_h(self, i: int) -> float:
        """k_h = log₂(h·L_h/(d_FB·ε_i)) + b₁·f₀。"""
        h = self.length(i)
        return float(
            np.log2(h) + self.metadata.log2_L(h) - np.log2(self.d_fb * self.epoch_epsilon(i))
            + self.b1 * self.metadata.f0
        )

    def bits(self, i: int) -> int:
        return max(1, int(math.ceil(math.sqrt(self.length(i) * self.k_h(i) * self.rate_max))))

    def epoch_delta(self, i: int) -> float:
        """(1/h_i)(2√(h_i·k_{h_i}·R_max) + 1)。"""
        h = self.length(i)
        return float((2.0 * math.sqrt(h * self.k_h(i) * self.rate_max) + 1.0) / h)

    def to_dict(self, i: int) -> Dict[str, Any]:
        return {
            "epoch": i,
            "h": self.length(i),
            "end": self.end(i),
            "epsilon": self.epoch_epsilon(i),
            "K": self.bits(i),
        }


def doubling_delta(
    n: int,
    epsilon: float,
    metadata: MetricMetadata,
    d_fb: int = 1,
    r_max: Optional[float] = None,
    exact: bool = False,
) -> float:
    """
    观察时刻 n 的速率损失 δ(n)。

    闭式界：nδ(n) ≤ log₂n + 2√((log₂(n·L_n·(log₂n)²/(2εd)) + b₁f₀)·R_max)·√n/(√2 − 1)。
    exact=True 时返回逐 epoch 求和 (1/n)Σ_{i=1}^{j}(2√(h_i·k_{h_i}·R_max) + 1)，j 为 n 所在的 epoch。
    """
    if n < 2:
        raise InvalidParameterError(f"n must be >= 2, got {n}")
    schedule = EpochSchedule(epsilon, metadata, d_fb, r_max)
    if exact:
        last = int(math.ceil(math.log2(n + 1))) - 1
        total = sum(schedule.length(i) * schedule.epoch_delta(i) for i in range(1, last + 1))
        return total / n
    log_n = math.log2(n)
    inner = (
        log_n + metadata.log2_L(n) + 2.0 * math.log2(log_n) - math.log2(2.0 * epsilon * d_fb)
        + schedule.b1 * metadata.f0
    )
    inner = max(inner, 0.0)
    bound = log_n + 2.0 * math.sqrt(inner * schedule.rate_max) * math.sqrt(n) / (math.sqrt(2.0) - 1.0)
    return bound / n


@dataclass
class EpochRecord:
    """一个 epoch 结束时的累计状态。"""

    epoch: int
    h: int
    end: int
    epsilon: float
    K: int
    blocks: int
    decoded_bits: int
    R_act: float
    R_emp: float
    delta: float
    error: bool

    @property
    def bound_holds(self) -> bool:
        return self.error or self.R_act >= self.R_emp - self.delta

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epoch": self.epoch,
            "h": self.h,
            "end": self.end,
            "epsilon": self.epsilon,
            "K": self.K,
            "blocks": self.blocks,
            "decoded_bits": self.decoded_bits,
            "R_act": self.R_act,
            "R_emp": self.R_emp,
            "delta": self.delta,
            "error": self.error,
        }


def run_doubling(
    metric: DecodingMetric,
    prior: Prior,
    channel: Channel,
    rand: SharedRandomness,
    epsilon: float,
    d_fb: int = 1,
    horizon: Optional[int] = None,
    message_bits: Optional[np.ndarray] = None,
    r_max: Optional[float] = None,
    seed: Optional[int] = None,
) -> Iterator[EpochRecord]:
    """
    无限视界的迭代无速率传输：每个 epoch 以 h_i 为设计视界、ε_i 为错误预算重新运行分块方案，
    度量使用全部历史；epoch 结束时未完成的块被放弃。horizon 为 None 时无限产生 epoch 记录。
    """
    if metric.metadata is None:
        raise InvalidParameterError("metric has no (L_m, b0) metadata; no threshold can be derived")
    schedule = EpochSchedule(epsilon, metric.metadata, d_fb, r_max)
    logger = bind_logger(_log, seed=seed, scheme="doubling", op="run_doubling")
    engine = BlockEngine(1, prior, channel, rand)
    transcript = AdaptiveTranscript(seed=seed, n=1, K=0)
    decoded = 0
    i = 1
    while horizon is None or schedule.end(i - 1) < horizon:
        start = schedule.end(i - 1)
        stop = schedule.end(i)
        if horizon is not None:
            stop = min(stop, horizon)
        engine.extend(stop)
        K = schedule.bits(i)
        session = AdaptiveSession(
            n=stop,
            K=K,
            epsilon=schedule.epoch_epsilon(i),
            metric=metric,
            prior=prior,
            d_fb=d_fb,
            design_n=schedule.length(i),
        )
        if message_bits is None:
            bits = random_bits(rand, engine.bit_offset + K * (stop - start + 1))
        else:
            bits = np.asarray(message_bits)
        blocks_before = transcript.B
        decoded += run_blocks(session, engine, bits, start, stop, transcript, logger)
        r_emp = metric.log_metric(engine.x, engine.y, 0, stop) / stop
        record = EpochRecord(
            epoch=i,
            h=schedule.length(i),
            end=stop,
            epsilon=session.epsilon,
            K=K,
            blocks=transcript.B - blocks_before,
            decoded_bits=decoded,
            R_act=decoded / stop,
            R_emp=float(r_emp),
            delta=doubling_delta(stop, epsilon, metric.metadata, d_fb, r_max) if stop >= 2 else float("inf"),
            error=transcript.error,
        )
        logger.info(
            "epoch done epoch=%d end=%d K=%d R_act=%.6f R_emp=%.6f error=%s",
            i, stop, K, record.R_act, record.R_emp, record.error,
        )
        yield record
        i += 1
