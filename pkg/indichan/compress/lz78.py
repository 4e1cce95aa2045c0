from __future__ import annotations

from collections import ChainMap
from typing import Dict, List, MutableMapping, Optional, Tuple

import numpy as np

from indichan.compress.base import ParseRecord, Phrase, SequentialCoder
from indichan.compress.bitcost import BitWriter, ceil_log2, split_header, symbol_bits
from indichan.core.randomness import SharedRandomness
from indichan.empirics.distributions import FiniteLike, finite_array
from indichan.errors import InvalidInputError

# Δ(n) = L_T − L_S ≤ 2log₂n + 2log₂log₂n + C；长度头为 Elias-δ，未完成短语只发送索引
LZ78_DELTA_C = 5.0


def overlay(mapping: MutableMapping) -> ChainMap:
    """写时复制视图：分支写入只落在最上层。"""
    if isinstance(mapping, ChainMap):
        return mapping.new_child()
    return ChainMap({}, mapping)


class LZ78Coder(SequentialCoder):
    """
    LZ78 顺序编码器（只记长度）。

    第 l 个短语有 l 个可选前缀（空短语 + 之前 l−1 个短语），
    代价 ⌈log₂ l⌉ + ⌈log₂|X|⌉；末尾未完成短语只发送 ⌈log₂ l⌉ 位索引。
    """

    def __init__(self, size: int, track: bool = False) -> None:
        super().__init__()
        self.size = int(size)
        self.sym_bits = symbol_bits(self.size)
        self.dictionary: MutableMapping[Tuple[int, int], int] = {}
        self.phrase_count = 0
        self._node = 0
        self._start = 0
        self._track = track
        self._phrase_x: List[Tuple[int, ...]] = [()]
        self._phrases: List[Phrase] = []

    def feed(self, a: int, b: int = 0) -> None:
        if not 0 <= a < self.size:
            raise InvalidInputError(f"symbol {a} outside alphabet of size {self.size}")
        child = self.dictionary.get((self._node, a))
        self.k += 1
        if child is not None:
            self._node = child
            return
        self.phrase_count += 1
        self.dictionary[(self._node, a)] = self.phrase_count
        self.bits += ceil_log2(self.phrase_count) + self.sym_bits
        if self._track:
            x = self._phrase_x[self._node] + (a,)
            self._phrase_x.append(x)
            self._phrases.append(Phrase(self._start, self._node, a, x))
        self._node = 0
        self._start = self.k

    def pending_bits(self) -> int:
        if self._node == 0:
            return 0
        return ceil_log2(self.phrase_count + 1)

    def fork(self) -> "LZ78Coder":
        other = LZ78Coder.__new__(LZ78Coder)
        other.__dict__.update(self.__dict__)
        other.dictionary = overlay(self.dictionary)
        other._track = False
        other._phrase_x = []
        other._phrases = []
        return other

    def record(self) -> ParseRecord:
        phrases = list(self._phrases)
        if self._node != 0:
            phrases.append(Phrase(self._start, self._node, None, self._phrase_x[self._node]))
        counts = list(range(1, sum(1 for p in phrases if p.complete) + 1))
        return ParseRecord(self.k, phrases, counts)


def lz78_parse(x: FiniteLike, size: Optional[int] = None) -> ParseRecord:
    arr, size = finite_array(x, size)
    coder = LZ78Coder(size, track=True)
    coder.feed_many(arr)
    return coder.record()


def lz78_length_path(x: FiniteLike, size: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """每个前缀 x^k 的 (L_S, L_T)，k = 0..n（k=0 处为 0）。"""
    arr, size = finite_array(x, size)
    coder = LZ78Coder(size)
    ls, lt = coder.length_path(arr)
    return np.concatenate([[0], ls]), np.concatenate([[0], lt])


def lz78_lengths(x: FiniteLike, size: Optional[int] = None) -> Tuple[int, int]:
    arr, size = finite_array(x, size)
    coder = LZ78Coder(size)
    coder.feed_many(arr)
    return coder.L_S, coder.terminate()


def lz78_encode(x: FiniteLike, size: Optional[int] = None) -> np.ndarray:
    arr, size = finite_array(x, size)
    record = lz78_parse(arr, size)
    writer = BitWriter()
    writer.write_elias_delta(record.n)
    sym = symbol_bits(size)
    for l, phrase in enumerate(record.phrases, start=1):
        writer.write_uint(phrase.prefix, ceil_log2(l))
        if phrase.complete:
            writer.write_uint(phrase.symbol, sym)
    return writer.to_array()


def lz78_decode(bits, size: int) -> np.ndarray:
    n, reader = split_header(bits)
    sym = symbol_bits(size)
    phrase_x: List[Tuple[int, ...]] = [()]
    out: List[int] = []
    while len(out) < n:
        index = reader.read_uint(ceil_log2(len(phrase_x)))
        if index >= len(phrase_x):
            raise InvalidInputError(f"phrase index {index} out of range")
        prefix = phrase_x[index]
        if len(out) + len(prefix) == n:
            out.extend(prefix)
            break
        if len(out) + len(prefix) + 1 > n:
            raise InvalidInputError("phrase overruns declared length")
        a = reader.read_uint(sym)
        phrase = prefix + (a,)
        phrase_x.append(phrase)
        out.extend(phrase)
    return np.asarray(out, dtype=np.int64)


def lz78_delta_bound(n: int) -> float:
    """L_T − L_S 的上界 2log₂n + 2log₂log₂n + C（对所有 k ≤ n 成立）。"""
    log_n = float(np.log2(max(int(n), 1)))
    return 2.0 * log_n + 2.0 * float(np.log2(max(log_n, 1.0))) + LZ78_DELTA_C


def measure_delta_constant(
    n: int,
    trials: int,
    rand: SharedRandomness,
    size: int = 2,
) -> Dict[str, float]:
    """随机输入上实测 max(L_T − L_S) − 2log₂n − 2log₂log₂n。"""
    rng = rand.derive("delta-constant").generator()
    log_n = float(np.log2(max(n, 1)))
    base = 2.0 * log_n + 2.0 * float(np.log2(max(log_n, 1.0)))
    worst = -np.inf
    for _ in range(int(trials)):
        ls, lt = lz78_lengths(rng.integers(0, size, size=n), size)
        worst = max(worst, float(lt - ls))
    return {"n": float(n), "max_delta": worst, "measured_c": worst - base, "declared_c": LZ78_DELTA_C}
