from __future__ import annotations

from bisect import bisect_right
from collections import defaultdict
from typing import Dict, List, MutableMapping, Optional, Tuple

import numpy as np

from indichan.compress.base import ParseRecord, Phrase, SequentialCoder
from indichan.compress.bitcost import BitWriter, ceil_log2, elias_delta_length, split_header, symbol_bits
from indichan.compress.lz78 import lz78_lengths, overlay
from indichan.core.alphabet import SymbolSequence
from indichan.empirics.distributions import FiniteLike, finite_array
from indichan.errors import InvalidInputError


class _OpenPhrase:
    """某个短语起点上的候选计数状态；候选数随可见的 y 增长而单调不减。"""

    __slots__ = ("start", "eligible", "limit", "ynode", "depth", "cand", "cost", "done")

    def __init__(self, start: int, eligible: int, limit: int) -> None:
        self.start = start
        self.eligible = eligible
        self.limit = limit
        self.ynode: Optional[int] = 0
        self.depth = 0
        self.cand = 1
        self.cost = 0
        self.done = False

    def copy(self) -> "_OpenPhrase":
        other = _OpenPhrase(self.start, self.eligible, self.limit)
        other.ynode = self.ynode
        other.depth = self.depth
        other.cand = self.cand
        other.cost = self.cost
        other.done = self.done
        return other


class ConditionalLZCoder(SequentialCoder):
    """
    条件 LZ 顺序编码器：对 (x_i, y_i) 联合增量解析，y 作为双方已知的边信息。

    短语起点 s、当前长度 k 时，候选前缀为之前所有 y 部分等于 y[s:s+m]（m ≤ k−s）的短语与空短语，
    按 (长度, 插入顺序) 排列；索引代价 ⌈log₂|候选|⌉，完整短语另加 ⌈log₂|X|⌉。
    """

    def __init__(self, x_size: int, y_size: int, track: bool = False) -> None:
        super().__init__()
        self.x_size = int(x_size)
        self.y_size = int(y_size)
        self.sym_bits = symbol_bits(self.x_size)
        self.children: MutableMapping[Tuple[int, int, int], int] = {}
        self.ychildren: MutableMapping[Tuple[int, int], int] = {}
        self.yphrases: MutableMapping[int, Tuple[int, ...]] = {}
        self.phrase_ynode: MutableMapping[int, int] = {0: 0}
        self.phrase_count = 0
        self.ynode_count = 0
        self.max_len = 0
        self._node = 0
        self._current: Optional[_OpenPhrase] = None
        self._active: List[_OpenPhrase] = []
        self._track = track
        self._phrase_x: List[Tuple[int, ...]] = [()]
        self._phrase_ctx: List[Tuple[int, ...]] = [()]
        self._phrases: List[Phrase] = []
        self._closed: List[_OpenPhrase] = []

    def _advance(self, rec: _OpenPhrase, b: int) -> None:
        if rec.ynode is None:
            return
        if rec.depth >= rec.limit:
            rec.ynode = None
            return
        nxt = self.ychildren.get((rec.ynode, b))
        rec.depth += 1
        if nxt is None:
            rec.ynode = None
            return
        rec.ynode = nxt
        gained = bisect_right(self.yphrases.get(nxt, ()), rec.eligible)
        if gained:
            rec.cand += gained
            if rec.done:
                cost = ceil_log2(rec.cand) + self.sym_bits
                self.bits += cost - rec.cost
                rec.cost = cost

    def feed(self, a: int, b: int = 0) -> None:
        if not 0 <= a < self.x_size or not 0 <= b < self.y_size:
            raise InvalidInputError(f"symbol pair ({a},{b}) outside alphabets")
        if self._current is None:
            self._current = _OpenPhrase(self.k, self.phrase_count, self.max_len)
            self._active.append(self._current)
        for rec in self._active:
            self._advance(rec, b)
        self._active = [rec for rec in self._active if rec.ynode is not None]

        cur = self._current
        child = self.children.get((self._node, a, b))
        self.k += 1
        if child is not None:
            self._node = child
            return

        self.phrase_count += 1
        pid = self.phrase_count
        self.children[(self._node, a, b)] = pid
        yparent = self.phrase_ynode[self._node]
        ynode = self.ychildren.get((yparent, b))
        if ynode is None:
            self.ynode_count += 1
            ynode = self.ynode_count
            self.ychildren[(yparent, b)] = ynode
        self.yphrases[ynode] = self.yphrases.get(ynode, ()) + (pid,)
        self.phrase_ynode[pid] = ynode
        self.max_len = max(self.max_len, self.k - cur.start)

        cur.done = True
        cur.cost = ceil_log2(cur.cand) + self.sym_bits
        self.bits += cur.cost
        if self._track:
            x = self._phrase_x[self._node] + (a,)
            ctx = self._phrase_ctx[self._node] + (b,)
            self._phrase_x.append(x)
            self._phrase_ctx.append(ctx)
            self._phrases.append(Phrase(cur.start, self._node, a, x, ctx))
            self._closed.append(cur)
        self._node = 0
        self._current = None

    def pending_bits(self) -> int:
        if self._current is None:
            return 0
        return ceil_log2(self._current.cand)

    def fork(self) -> "ConditionalLZCoder":
        other = ConditionalLZCoder.__new__(ConditionalLZCoder)
        other.__dict__.update(self.__dict__)
        other.children = overlay(self.children)
        other.ychildren = overlay(self.ychildren)
        other.yphrases = overlay(self.yphrases)
        other.phrase_ynode = overlay(self.phrase_ynode)
        copies = {id(rec): rec.copy() for rec in self._active}
        other._active = [copies[id(rec)] for rec in self._active]
        if self._current is not None:
            other._current = copies.get(id(self._current)) or self._current.copy()
        other._track = False
        other._phrase_x = []
        other._phrase_ctx = []
        other._phrases = []
        other._closed = []
        return other

    def record(self) -> ParseRecord:
        phrases = list(self._phrases)
        if self._current is not None:
            phrases.append(
                Phrase(self._current.start, self._node, None, self._phrase_x[self._node], self._phrase_ctx[self._node])
            )
        return ParseRecord(self.k, phrases, [rec.cand for rec in self._closed])


class _CandidateDictionary:
    """显式候选表，供比特级编解码使用（与 ConditionalLZCoder 的计数一致）。"""

    def __init__(self) -> None:
        self.ychildren: Dict[Tuple[int, int], int] = {}
        self.yphrases: Dict[int, List[int]] = defaultdict(list)
        self.phrase_x: List[Tuple[int, ...]] = [()]
        self.max_len = 0

    def candidates(self, y: np.ndarray, s: int, k: int) -> List[int]:
        out = [0]
        ynode = 0
        for m in range(1, min(k - s, self.max_len) + 1):
            ynode = self.ychildren.get((ynode, int(y[s + m - 1])))
            if ynode is None:
                break
            out.extend(self.yphrases.get(ynode, ()))
        return out

    def add(self, x: Tuple[int, ...], ctx: Tuple[int, ...]) -> None:
        pid = len(self.phrase_x)
        self.phrase_x.append(x)
        ynode = 0
        for b in ctx:
            nxt = self.ychildren.get((ynode, b))
            if nxt is None:
                nxt = len(self.ychildren) + 1
                self.ychildren[(ynode, b)] = nxt
            ynode = nxt
        self.yphrases[ynode].append(pid)
        self.max_len = max(self.max_len, len(x))


def _pair(x: FiniteLike, y: FiniteLike) -> Tuple[np.ndarray, int, np.ndarray, int]:
    xa, sx = finite_array(x)
    ya, sy = finite_array(y)
    if xa.shape[0] != ya.shape[0]:
        raise InvalidInputError(f"length mismatch: {xa.shape[0]} != {ya.shape[0]}")
    return xa, sx, ya, sy


def conditional_lz_parse(x: FiniteLike, y: FiniteLike) -> ParseRecord:
    xa, sx, ya, sy = _pair(x, y)
    coder = ConditionalLZCoder(sx, sy, track=True)
    coder.feed_many(xa, ya)
    return coder.record()


def conditional_lz_lengths(x: FiniteLike, y: FiniteLike) -> Tuple[int, int]:
    xa, sx, ya, sy = _pair(x, y)
    coder = ConditionalLZCoder(sx, sy)
    coder.feed_many(xa, ya)
    return coder.L_S, coder.terminate()


def conditional_lz_length_path(x: FiniteLike, y: FiniteLike) -> Tuple[np.ndarray, np.ndarray]:
    """每个前缀 (x^k, y^k) 的 (L_S, L_T)，k = 0..n。"""
    xa, sx, ya, sy = _pair(x, y)
    coder = ConditionalLZCoder(sx, sy)
    ls, lt = coder.length_path(xa, ya)
    return np.concatenate([[0], ls]), np.concatenate([[0], lt])


def conditional_lz_complexity(x: FiniteLike, y: FiniteLike) -> float:
    """C_LZ = Σ_l log₂ c_l(x|y)，对完整短语求和。"""
    return conditional_lz_parse(x, y).complexity()


def rounding_overhead(x_size: int, n: int, c: int) -> float:
    """
    r_n：每短语的取整开销 1 + (⌈log₂|X|⌉ − log₂|X|)，加上长度头摊到每个短语上的部分。
    完整短语满足 L_T ≤ C_LZ + c·(log₂|X| + r_n)，末尾未完成短语的索引另计。
    """
    c = max(int(c), 1)
    return 1.0 + (symbol_bits(x_size) - float(np.log2(x_size))) + elias_delta_length(max(int(n), 1)) / c


def conditional_lz_encode(x: FiniteLike, y: FiniteLike) -> np.ndarray:
    xa, sx, ya, _ = _pair(x, y)
    record = conditional_lz_parse(xa, ya)
    n = record.n
    writer = BitWriter()
    writer.write_elias_delta(n)
    sym = symbol_bits(sx)
    table = _CandidateDictionary()
    for phrase in record.phrases:
        cands = table.candidates(ya, phrase.start, n)
        writer.write_uint(cands.index(phrase.prefix), ceil_log2(len(cands)))
        if phrase.complete:
            writer.write_uint(phrase.symbol, sym)
            table.add(phrase.x, phrase.context)
    return writer.to_array()


def conditional_lz_decode(bits, y: FiniteLike, x_size: int) -> np.ndarray:
    n, reader = split_header(bits)
    ya, _ = finite_array(y)
    if ya.shape[0] < n:
        raise InvalidInputError(f"side information has length {ya.shape[0]}, need {n}")
    sym = symbol_bits(x_size)
    table = _CandidateDictionary()
    out: List[int] = []
    while len(out) < n:
        s = len(out)
        cands = table.candidates(ya, s, n)
        rank = reader.read_uint(ceil_log2(len(cands)))
        if rank >= len(cands):
            raise InvalidInputError(f"candidate rank {rank} out of range")
        prefix = table.phrase_x[cands[rank]]
        if s + len(prefix) == n:
            out.extend(prefix)
            break
        a = reader.read_uint(sym)
        phrase = prefix + (a,)
        table.add(phrase, tuple(int(b) for b in ya[s: s + len(phrase)]))
        out.extend(phrase)
    return np.asarray(out, dtype=np.int64)


def modulo_noise(x: FiniteLike, y: FiniteLike, size: Optional[int] = None) -> Tuple[np.ndarray, int]:
    """z = y − x (mod |X|)，要求 𝒳 = 𝒴。"""
    if isinstance(x, SymbolSequence) and isinstance(y, SymbolSequence) and x.alphabet != y.alphabet:
        raise InvalidInputError("modulo noise needs identical input and output alphabets")
    xa, sx = finite_array(x, size)
    ya, sy = finite_array(y, size)
    if size is None:
        if isinstance(x, SymbolSequence):
            size = sx
        elif isinstance(y, SymbolSequence):
            size = sy
        else:
            size = max(sx, sy)
    if xa.shape[0] != ya.shape[0]:
        raise InvalidInputError(f"length mismatch: {xa.shape[0]} != {ya.shape[0]}")
    if (xa.size and xa.max() >= size) or (ya.size and ya.max() >= size):
        raise InvalidInputError(f"symbol outside modulo group of size {size}")
    return np.mod(ya - xa, size), int(size)


def modulo_noise_lengths(x: FiniteLike, y: FiniteLike, size: Optional[int] = None) -> Tuple[int, int]:
    z, size = modulo_noise(x, y, size)
    return lz78_lengths(z, size)
