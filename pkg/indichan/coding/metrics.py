from __future__ import annotations

import threading
from typing import Optional, Tuple

import numpy as np

from indichan.compress.base import SequentialCoder
from indichan.compress.conditional_lz import ConditionalLZCoder
from indichan.compress.lz78 import LZ78Coder, lz78_delta_bound
from indichan.core.priors import Prior
from indichan.errors import InvalidInputError, InvalidParameterError
from indichan.infrastructure.config.config_manager import config_manager
from indichan.ratefn.base import DecodingMetric, MetricMetadata, SequenceLike, constant_log2_L, raw
from indichan.ratefn.models import ConditionalModel, KTMixtureModel, ModuloKTModel, model_from_name


def range_sums(terms: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """
    Σ_{i=lo}^{hi} terms[i-1]（1 起始，闭区间；hi < lo 为 0）。含 -inf 的区间为 -inf。
    """
    finite = np.where(np.isneginf(terms), 0.0, terms)
    c = np.concatenate([[0.0], np.cumsum(finite)])
    bad = np.concatenate([[0], np.cumsum(np.isneginf(terms).astype(np.int64))])
    lo = np.maximum(np.asarray(lo, dtype=np.int64), 1)
    hi = np.asarray(hi, dtype=np.int64)
    empty = hi < lo
    hi_c = np.where(empty, 0, hi)
    lo_c = np.where(empty, 1, lo)
    out = c[hi_c] - c[lo_c - 1]
    out = np.where(bad[hi_c] - bad[lo_c - 1] > 0, -np.inf, out)
    return np.where(empty, 0.0, out)


class CausalMetric(DecodingMetric):
    """
    D-因果条件模型的顺序度量：
    log₂ψ(x^k, y^k, j) = log₂ P(x_{j+1−D}^{k−D} | y^k, x^{j−D}) − log₂ Q(x_{j+1}^k | x^j)。

    元数据 L_m = |X|^D，b₀ = 0，f₀ = log₂(1/q_min)。
    """

    def __init__(self, model: ConditionalModel, prior: Prior) -> None:
        q_min = prior.q_min
        if q_min is None or q_min <= 0:
            raise InvalidParameterError("causal metric needs a prior with positive q_min")
        self.model = model
        self.prior = prior
        size = prior.alphabet.size
        f0 = float(-np.log2(q_min))
        self.metadata = MetricMetadata(
            log2_L=constant_log2_L(model.delay * np.log2(size)),
            b0=0,
            f0=f0,
            r_max=f0,
        )

    def log_metric_path(self, x: np.ndarray, y: np.ndarray, j: int, k_end: int) -> np.ndarray:
        x = raw(x)[:k_end]
        y = raw(y)[:k_end]
        if k_end <= j:
            return np.zeros(0)
        d = self.model.delay
        letters = self.model.letter_log_probs(x, y)
        q = self.prior.letter_log_masses(x)
        ks = np.arange(j + 1, k_end + 1)
        p_part = range_sums(letters, np.full(ks.shape, j + 1 - d), ks - d)
        q_part = range_sums(q, np.full(ks.shape, j + 1), ks)
        return p_part - q_part


def causal_metric(model: ConditionalModel, prior: Prior, x: SequenceLike, y: SequenceLike, j: int, k: int) -> float:
    return CausalMetric(model, prior).log_metric(x, y, j, k)


class MixtureMetric(CausalMetric):
    """
    条件无记忆族的 Dirichlet-½ 混合（KT）代替 P 的因果度量。

    状态 z_i 缺省为 y_i（use_y=False 时为常数）；给定 order = D 时
    z_i = (x_{i−D}^{i−1}, y_{i−D}^{i+D})，度量为 D-因果，L_m = |X|^D。
    """

    def __init__(self, prior: Prior, modulo: bool = False, use_y: bool = True, order: Optional[int] = None) -> None:
        size = prior.alphabet.size
        if order is not None:
            if modulo:
                raise InvalidParameterError("markov state mixture has no modulo form")
            model: ConditionalModel = model_from_name("markov-kt", size, prior=prior, order=order)
        elif modulo:
            model = ModuloKTModel(size)
        else:
            model = KTMixtureModel(size, use_y=use_y)
        super().__init__(model, prior)


def mixture_metric(
    prior: Prior,
    x: SequenceLike,
    y: SequenceLike,
    j: int,
    k: int,
    modulo: bool = False,
    order: Optional[int] = None,
) -> float:
    return MixtureMetric(prior, modulo=modulo, order=order).log_metric(x, y, j, k)


class CompressionMetric(DecodingMetric):
    """
    压缩度量：log₂ψ = (k−j)·log₂|X| − (L_T(x^k|y^k) − L_T(x^j|y^j))。

    kind = "lz"：LZ78 作用于 z = y − x (mod |X|)；kind = "clz"：条件 LZ。
    元数据 L_m = 2^{Δ*(horizon)}，b₀ = 0，f₀ = log₂|X|。
    """

    def __init__(self, kind: str, x_size: int, y_size: Optional[int] = None, horizon: Optional[int] = None) -> None:
        if kind not in ("lz", "clz"):
            raise InvalidParameterError(f"unknown compression metric kind: {kind}")
        self.kind = kind
        self.x_size = int(x_size)
        self.y_size = int(y_size or x_size)
        if kind == "lz" and self.y_size != self.x_size:
            raise InvalidParameterError("modulo compression needs |X| = |Y|")
        self.horizon = int(horizon or config_manager.get("simulation.n", 1024))
        self.log_size = float(np.log2(self.x_size))
        self.metadata = MetricMetadata(
            log2_L=constant_log2_L(lz78_delta_bound(self.horizon)),
            b0=0,
            f0=self.log_size,
            r_max=self.log_size,
        )
        self._local = threading.local()

    def new_coder(self) -> SequentialCoder:
        if self.kind == "lz":
            return LZ78Coder(self.x_size)
        return ConditionalLZCoder(self.x_size, self.y_size)

    def _inputs(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        if self.kind == "lz":
            return np.mod(y - x, self.x_size), None
        return x, y

    def coder_at(self, x: np.ndarray, y: np.ndarray, j: int) -> SequentialCoder:
        """喂入前缀 (x^j, y^j) 后的编码器；同一前缀只计算一次（每线程缓存一项）。"""
        key = (j, x[:j].tobytes(), y[:j].tobytes())
        cached = getattr(self._local, "entry", None)
        if cached is not None and cached[0] == key:
            return cached[1]
        coder = self.new_coder()
        xs, ys = self._inputs(x[:j], y[:j])
        coder.feed_many(xs, ys)
        self._local.entry = (key, coder)
        return coder

    def log_metric_path(self, x: np.ndarray, y: np.ndarray, j: int, k_end: int) -> np.ndarray:
        x = raw(x)
        y = raw(y)
        if k_end <= j:
            return np.zeros(0)
        if y.shape[0] < k_end or x.shape[0] < k_end:
            raise InvalidInputError("sequences shorter than requested metric horizon")
        base = self.coder_at(x, y, j)
        lt_j = base.terminate()
        coder = base.fork()
        xs, ys = self._inputs(x[j:k_end], y[j:k_end])
        _, lt = coder.length_path(xs, ys)
        steps = np.arange(1, k_end - j + 1, dtype=np.float64)
        return steps * self.log_size - (lt - lt_j)

    def incompressibility(self, x: SequenceLike, y: SequenceLike, k: int) -> float:
        """N_k = k·log₂|X| − L_T(x^k|y^k)。"""
        return float(self.log_metric_path(raw(x), raw(y), 0, k)[-1])


def compression_metric(kind: str, x: SequenceLike, y: SequenceLike, j: int, k: int, x_size: int = 2) -> float:
    xa = raw(x)
    return CompressionMetric(kind, x_size, horizon=max(k, 1)).log_metric(xa, raw(y), j, k)
