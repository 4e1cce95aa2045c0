from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from indichan.coding.metrics import CompressionMetric
from indichan.core.alphabet import SymbolSequence
from indichan.core.channels import Channel
from indichan.core.priors import Prior
from indichan.core.randomness import SharedRandomness, random_bits
from indichan.errors import InvalidParameterError
from indichan.infrastructure.config.config_manager import config_manager
from indichan.infrastructure.utils.logging import bind_logger, get_logger
from indichan.ratefn.base import DecodingMetric, MetricMetadata

_log = get_logger(__name__)

EXPLICIT = "explicit"
SAMPLED = "sampled"


def adaptive_threshold(
    log2_L: float,
    n: int,
    K: int,
    d_fb: int,
    epsilon: float,
    block_length: Optional[int] = None,
    b0: int = 0,
) -> float:
    """log₂ψ* = log₂n + log₂L_{k−j} + K − log₂(d_FB·ε)；k − j ≤ b₀ 时为 +inf。"""
    if n < 1 or K < 0 or d_fb < 1 or not 0 < epsilon < 1:
        raise InvalidParameterError(f"invalid threshold inputs n={n} K={K} d_fb={d_fb} epsilon={epsilon}")
    if block_length is not None and block_length <= b0:
        return float("inf")
    return float(np.log2(n) + log2_L + K - np.log2(d_fb * epsilon))


@dataclass(frozen=True)
class AdaptiveSession:
    """
    迭代无速率方案的参数：每块 K 比特，度量 ψ 及其 (L_m, b₀) 元数据，反馈间隔 d_FB。

    design_n 为阈值中使用的视界（缺省为 n）；倍增技巧下为当前 epoch 的 h_i。
    """

    n: int
    K: int
    epsilon: float
    metric: DecodingMetric
    prior: Prior
    d_fb: int = 1
    design_n: Optional[int] = None
    impostors: Optional[int] = None
    explicit_bits: Optional[int] = None
    window: int = 256

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError(f"n must be >= 1, got {self.n}")
        if self.K < 1:
            raise InvalidParameterError(f"K must be >= 1, got {self.K}")
        if self.d_fb < 1:
            raise InvalidParameterError(f"d_fb must be >= 1, got {self.d_fb}")
        if not 0 < self.epsilon < 1:
            raise InvalidParameterError(f"epsilon must be in (0,1), got {self.epsilon}")
        if self.metric.metadata is None:
            raise InvalidParameterError("metric has no (L_m, b0) metadata; no threshold can be derived")

    @property
    def metadata(self) -> MetricMetadata:
        return self.metric.metadata

    @property
    def horizon(self) -> int:
        return int(self.design_n or self.n)

    @property
    def codebook_mode(self) -> str:
        limit = self.explicit_bits
        if limit is None:
            limit = int(config_manager.get("guards.max_explicit_codebook_bits", 12))
        return EXPLICIT if self.K <= limit else SAMPLED

    @property
    def impostor_count(self) -> int:
        if self.impostors is not None:
            return int(self.impostors)
        return int(config_manager.get("monte_carlo.impostors", 256))

    def thresholds(self, j: int, k_end: int) -> np.ndarray:
        """k = j+1..k_end 的判决阈值；非反馈时刻或 k − j ≤ b₀ 为 +inf。"""
        meta = self.metadata
        lengths = np.arange(1, k_end - j + 1)
        base = np.log2(self.horizon) + self.K - np.log2(self.d_fb * self.epsilon)
        log_l = np.array([meta.log2_L(int(m)) for m in lengths], dtype=np.float64)
        out = base + log_l
        allowed = (lengths > meta.b0) & ((lengths - 1) % self.d_fb == 0)
        return np.where(allowed, out, np.inf)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "K": self.K,
            "epsilon": self.epsilon,
            "d_fb": self.d_fb,
            "design_n": self.horizon,
            "metadata": self.metadata.to_dict(self.horizon),
            "codebook_mode": self.codebook_mode,
        }


@dataclass
class AdaptiveTranscript:
    seed: Optional[int]
    n: int
    K: int
    R_emp: float = float("nan")
    R_act: float = 0.0
    B: int = 0
    decoded_bits: int = 0
    error: bool = False
    block_starts: List[int] = field(default_factory=list)
    block_ends: List[int] = field(default_factory=list)
    incompressibility: List[float] = field(default_factory=list)
    codebook_mode: str = EXPLICIT
    epochs: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "seed": self.seed,
            "n": self.n,
            "K": self.K,
            "R_emp": self.R_emp,
            "R_act": self.R_act,
            "B": self.B,
            "decoded_bits": self.decoded_bits,
            "error": self.error,
            "block_starts": list(self.block_starts),
            "block_ends": list(self.block_ends),
            "codebook_mode": self.codebook_mode,
        }
        if self.incompressibility:
            out["incompressibility"] = list(self.incompressibility)
        if self.epochs:
            out["epochs"] = list(self.epochs)
        return out


def _message_index(bits: np.ndarray) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


class BlockEngine:
    """
    编码端与译码端共享的状态：真实输入 x、信道输出 y、译码端的重建 x̂。
    信道对整段输入重新传输，因果信道保证已发送部分的输出不变。
    """

    def __init__(self, n: int, prior: Prior, channel: Channel, rand: SharedRandomness) -> None:
        self.prior = prior
        self.channel = channel
        self.rand = rand
        self.n = int(n)
        self.x = prior.sample(self.n, rand.derive("filler/0")).data.copy()
        self.x_hat = self.x.copy()
        self.y = self._transmit()
        self.block_count = 0
        self.bit_offset = 0

    def extend(self, n: int) -> None:
        """把时间轴延长到 n，新位置填入先验抽样的空闲符号。"""
        if n <= self.n:
            return
        if not self.channel.prefix_consistent:
            raise InvalidParameterError(f"channel {self.channel.kind} redraws past outputs when the input grows")
        filler = self.prior.sample(n - self.n, self.rand.derive(f"filler/{self.n}")).data
        self.x = np.concatenate([self.x, filler])
        self.x_hat = np.concatenate([self.x_hat, filler])
        self.n = int(n)
        self.y = self._transmit()

    def _transmit(self) -> np.ndarray:
        return self.channel.transmit(SymbolSequence(self.prior.alphabet, self.x), self.rand).data

    def word(self, block: int, message: int, j: int) -> np.ndarray:
        """第 block 块消息 message 的码字在 [j, n) 上的部分。"""
        return self.prior.sample(self.n - j, self.rand.derive(f"block/{block}/word/{message}")).data

    def impostor(self, block: int, index: int, j: int) -> np.ndarray:
        return self.prior.sample(self.n - j, self.rand.derive(f"block/{block}/impostor/{index}")).data

    def start_block(self, j: int, word: np.ndarray) -> None:
        self.x[j:] = word
        self.y = self._transmit()

    def candidate(self, j: int, word: np.ndarray, k_end: int) -> np.ndarray:
        return np.concatenate([self.x_hat[:j], word[: k_end - j]])


def _first_crossing(path: np.ndarray, thresholds: np.ndarray) -> Optional[int]:
    hits = np.flatnonzero(path >= thresholds)
    return int(hits[0]) if hits.size else None


def run_blocks(
    session: AdaptiveSession,
    engine: BlockEngine,
    message_bits: np.ndarray,
    start: int,
    stop: int,
    transcript: AdaptiveTranscript,
    logger: Any = None,
) -> int:
    """
    在 [start, stop) 内按块运行方案；返回本段解码的比特数。
    同一时刻多个码字越过阈值时取编号最小者；抽样码本模式下平局判给竞争码字。
    """
    logger = logger or _log
    metric = session.metric
    K = session.K
    mode = session.codebook_mode
    decoded = 0
    j = start
    while j < stop:
        block = engine.block_count
        engine.block_count += 1
        bits = message_bits[engine.bit_offset: engine.bit_offset + K]
        if bits.shape[0] < K:
            raise InvalidParameterError("message bit source exhausted")
        true_msg = _message_index(bits)
        true_word = engine.word(block, true_msg, j)
        engine.start_block(j, true_word)
        transcript.block_starts.append(j)
        transcript.B += 1

        if mode == EXPLICIT:
            labels = list(range(2 ** K))
            words = [true_word if m == true_msg else engine.word(block, m, j) for m in labels]
        else:
            labels = [true_msg] + [-(i + 1) for i in range(session.impostor_count)]
            words = [true_word] + [engine.impostor(block, i, j) for i in range(session.impostor_count)]

        decision: Optional[Tuple[int, int]] = None
        window = max(int(session.window), session.metadata.b0 + session.d_fb + 1)
        while True:
            k_end = min(stop, j + window)
            thr = session.thresholds(j, k_end)
            if np.all(np.isinf(thr)):
                crossings: List[Tuple[int, int]] = []
            else:
                crossings = []
                for pos, word in enumerate(words):
                    cand = engine.candidate(j, word, k_end)
                    path = metric.log_metric_path(cand, engine.y, j, k_end)
                    hit = _first_crossing(path, thr)
                    if hit is not None:
                        crossings.append((j + 1 + hit, pos))
            if crossings:
                k = min(c[0] for c in crossings)
                tied = [pos for kk, pos in crossings if kk == k]
                if mode == EXPLICIT:
                    pos = min(tied)
                else:
                    others = [p for p in tied if p != 0]
                    pos = others[0] if others else 0
                decision = (k, pos)
                break
            if k_end >= stop:
                break
            window *= 2

        if decision is None:
            logger.debug("block undecoded start=%d stop=%d", j, stop)
            break

        k, pos = decision
        wrong = labels[pos] != true_msg
        if wrong:
            transcript.error = True
            logger.info("decode error block=%d k=%d", block, k)
        engine.x_hat[j:] = words[pos]
        engine.bit_offset += K
        decoded += K
        transcript.block_ends.append(k)
        if isinstance(metric, CompressionMetric):
            transcript.incompressibility.append(metric.incompressibility(engine.x, engine.y, k))
        logger.debug("block decoded k=%d bits=%d", k, K)
        j = k + session.d_fb - 1
    return decoded


def run_adaptive(
    session: AdaptiveSession,
    channel: Channel,
    rand: SharedRandomness,
    message_bits: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> AdaptiveTranscript:
    """
    运行一次长度为 n 的迭代无速率传输。
    出错后继续以译码端的（错误）状态运行，transcript 标记 error。
    """
    logger = bind_logger(_log, seed=seed, scheme="adaptive", op="run_adaptive")
    n = session.n
    if message_bits is None:
        # 每个判决时刻至多一块，块数不超过 n
        message_bits = random_bits(rand, session.K * (n + 1))
    engine = BlockEngine(n, session.prior, channel, rand)
    transcript = AdaptiveTranscript(seed=seed, n=n, K=session.K, codebook_mode=session.codebook_mode)
    decoded = run_blocks(session, engine, np.asarray(message_bits), 0, n, transcript, logger)
    transcript.decoded_bits = decoded
    transcript.R_act = decoded / n
    transcript.R_emp = session.metric.log_metric(engine.x, engine.y, 0, n) / n
    logger.info(
        "adaptive run done n=%d B=%d R_act=%.6f R_emp=%.6f error=%s",
        n, transcript.B, transcript.R_act, transcript.R_emp, transcript.error,
    )
    return transcript
