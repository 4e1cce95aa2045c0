from __future__ import annotations

from typing import Any, Dict, Optional, Sequence

import numpy as np

from indichan.coding.metrics import CausalMetric, CompressionMetric, MixtureMetric
from indichan.compress.conditional_lz import conditional_lz_lengths, modulo_noise
from indichan.compress.lz78 import lz78_lengths
from indichan.core.alphabet import SymbolSequence
from indichan.core.priors import IIDPrior, MarkovPrior, Prior
from indichan.empirics.distributions import (
    FiniteLike,
    empirical_entropy,
    empirical_mutual_information,
    finite_array,
    kl_divergence,
)
from indichan.empirics.types import log2_conditional_type_size, type_count, type_count_bound
from indichan.errors import InvalidInputError, InvalidParameterError
from indichan.mimo.config import MimoConfig
from indichan.mimo.rates import MimoGammaMetric, mimo_rate, rho_rate
from indichan.ratefn.base import (
    DecodingMetric,
    RateFunction,
    SequenceLike,
    rate_registry,
    raw,
    register_rate_function,
)
from indichan.ratefn.models import (
    ConditionalModel,
    conditional_form_rate,
    markov_states,
    model_from_name,
)


def _pair(x: FiniteLike, y: FiniteLike, sx: Optional[int] = None, sy: Optional[int] = None):
    xa, sx = finite_array(x, sx)
    ya, sy = finite_array(y, sy)
    if xa.shape[0] != ya.shape[0]:
        raise InvalidInputError(f"length mismatch: {xa.shape[0]} != {ya.shape[0]}")
    if xa.shape[0] == 0:
        raise InvalidInputError("rate functions need n >= 1")
    return xa, sx, ya, sy


def _iid_mass(prior: Prior, size: int) -> np.ndarray:
    if isinstance(prior, IIDPrior):
        return prior.mass
    if isinstance(prior, MarkovPrior) and prior.order == 0:
        return prior.transition[0]
    raise InvalidParameterError("this rate function needs an i.i.d. prior")


# ---------------------------------------------------------------------------
# 零阶统计量


def eMI_rate(x: FiniteLike, y: FiniteLike) -> float:
    """Î(x;y)，ML* 形式。"""
    xa, sx, ya, sy = _pair(x, y)
    return empirical_mutual_information(SymbolSequence.finite(sx, xa), SymbolSequence.finite(sy, ya))


def eMI_ML_rate(prior: Prior, x: FiniteLike, y: FiniteLike) -> float:
    """Î(x;y) + D(P̂_x‖Q)，ML 形式（Q 为 i.i.d.）。"""
    size = prior.alphabet.size
    xa, sx, ya, sy = _pair(x, y, size)
    mass = _iid_mass(prior, size)
    p_hat = np.bincount(xa, minlength=sx) / xa.shape[0]
    return eMI_rate(SymbolSequence.finite(sx, xa), SymbolSequence.finite(sy, ya)) + kl_divergence(p_hat, mass)


def type_based_rate(prior: Prior, x: FiniteLike, y: FiniteLike) -> float:
    """
    最优类型速率 −(1/n) sup_ỹ log₂ Q{T_{x|y}(ỹ)}（i.i.d. Q，无记忆联合类型）：
    −(1/n)[log₂ Π_b n_b!/Π_{a,b} n_ab! + log₂ Qⁿ(x)]。
    """
    size = prior.alphabet.size
    xa, sx, ya, sy = _pair(x, y, size)
    log_q = prior.log_mass(xa)
    if np.isneginf(log_q):
        return float("nan")
    log_t = log2_conditional_type_size(SymbolSequence.finite(sx, xa), SymbolSequence.finite(sy, ya))
    return float(-(log_t + log_q) / xa.shape[0])


def type_rate_overhead(sx: int, sy: int, n: int, epsilon: float, exact: bool = True) -> float:
    """可达性开销 (1/n)log₂(N_T/ε)；exact=False 时用 N_T ≤ (n+1)^{|X||Y|}。"""
    if not 0 < epsilon < 1:
        raise InvalidParameterError(f"epsilon must be in (0,1), got {epsilon}")
    count = float(type_count(sx, sy, n)) if exact else type_count_bound(sx, sy, n)
    return float((np.log2(count) - np.log2(epsilon)) / n)


# ---------------------------------------------------------------------------
# 马尔可夫状态


def markov_state_rate(
    x: FiniteLike,
    y: FiniteLike,
    order: int,
    prior: Optional[Prior] = None,
    form: str = "ml",
) -> float:
    """
    ML 形式：Ĥ_Q(x) − Ĥ(x|z)；ML* 形式：Î(x; z_y | z_x)。
    z_i = (x_{i−D}^{i−1}, y_{i−D}^{i+D})。
    """
    if order < 0:
        raise InvalidParameterError(f"markov order must be >= 0, got {order}")
    size = prior.alphabet.size if prior is not None else None
    xa, sx, ya, sy = _pair(x, y, size)
    n = xa.shape[0]
    if n <= order:
        raise InvalidInputError(f"markov state rate needs n > D, got n={n} D={order}")
    x_pad = prior.initial_symbol if isinstance(prior, MarkovPrior) else 0
    zx, zy, z = markov_states(xa, ya, order, x_pad=x_pad)
    h_cond = empirical_entropy(xa, z)
    if form == "ml*":
        return float(empirical_entropy(xa, zx) - h_cond)
    if form != "ml":
        raise InvalidParameterError(f"unknown markov rate form: {form}")
    prior = prior or IIDPrior.uniform(sx)
    log_q = prior.log_mass(xa)
    if np.isneginf(log_q):
        return float("nan")
    return float(-log_q / n - h_cond)


# ---------------------------------------------------------------------------
# 模加与压缩


def modulo_additive_rate(x: FiniteLike, y: FiniteLike, size: Optional[int] = None) -> float:
    """log₂|X| − Ĥ(y − x)。"""
    z, size = modulo_noise(x, y, size)
    return float(np.log2(size) - empirical_entropy(SymbolSequence.finite(size, z)))


def compression_rate(kind: str, x: FiniteLike, y: FiniteLike, x_size: Optional[int] = None) -> float:
    """log₂|X| − (1/n)L_T(x|y)。kind = "lz" 压缩 z = y − x，"clz" 为条件 LZ。"""
    if kind == "lz":
        z, size = modulo_noise(x, y, x_size)
        _, lt = lz78_lengths(z, size)
        return float(np.log2(size) - lt / z.shape[0])
    if kind == "clz":
        xa, sx, ya, sy = _pair(x, y, x_size)
        _, lt = conditional_lz_lengths(SymbolSequence.finite(sx, xa), SymbolSequence.finite(sy, ya))
        return float(np.log2(sx) - lt / xa.shape[0])
    raise InvalidParameterError(f"unknown compression kind: {kind}")


# ---------------------------------------------------------------------------
# 速率函数对象


class EMIRate(RateFunction):
    rate_id = "emi"

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return eMI_rate(x, y)


class EMIMLRate(RateFunction):
    rate_id = "emi-ml"

    def __init__(self, prior: Prior) -> None:
        self.prior = prior

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return eMI_ML_rate(self.prior, x, y)


class TypeOptimalRate(RateFunction):
    rate_id = "type-opt"

    def __init__(self, prior: Prior) -> None:
        self.prior = prior

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return type_based_rate(self.prior, x, y)


class MarkovStateRate(RateFunction):
    rate_id = "markov"

    def __init__(self, order: int, prior: Optional[Prior] = None, form: str = "ml") -> None:
        if form not in ("ml", "ml*"):
            raise InvalidParameterError(f"unknown markov rate form: {form}")
        self.order = int(order)
        self.prior = prior
        self.form = form

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return markov_state_rate(x, y, self.order, self.prior, self.form)

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "order": self.order, "form": self.form}


class ConditionalFormRate(RateFunction):
    """(1/n)log₂(P(x|y)/Q(x))；P 为 D-因果模型时带有因果度量。"""

    rate_id = "cond"
    adaptive = True

    def __init__(self, model: ConditionalModel, prior: Prior) -> None:
        self.model = model
        self.prior = prior
        self._metric: Optional[DecodingMetric] = None

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return conditional_form_rate(self.model, self.prior, x, y)

    def metric(self) -> Optional[DecodingMetric]:
        if self._metric is None:
            self._metric = CausalMetric(self.model, self.prior)
        return self._metric

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "model": self.model.to_dict()}


class MixtureRate(ConditionalFormRate):
    """P 取 Dirichlet-½ 混合；状态选择同 MixtureMetric。"""

    rate_id = "kt"

    def __init__(self, prior: Prior, modulo: bool = False, use_y: bool = True, order: Optional[int] = None) -> None:
        metric = MixtureMetric(prior, modulo=modulo, use_y=use_y, order=order)
        super().__init__(metric.model, prior)
        self._metric = metric
        if modulo:
            self.rate_id = "modadd-kt"
        elif order is not None:
            self.rate_id = "markov-kt"


class ModuloAdditiveRate(RateFunction):
    rate_id = "modadd"

    def __init__(self, size: int = 2) -> None:
        self.size = int(size)

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return modulo_additive_rate(x, y, self.size)


class CompressionRate(RateFunction):
    adaptive = True

    def __init__(self, kind: str, x_size: int = 2, y_size: Optional[int] = None, horizon: Optional[int] = None) -> None:
        self.kind = kind
        self.rate_id = kind
        self.x_size = int(x_size)
        self.y_size = int(y_size or x_size)
        self._metric = CompressionMetric(kind, self.x_size, self.y_size, horizon)

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return compression_rate(self.kind, x, y, self.x_size)

    def metric(self) -> Optional[DecodingMetric]:
        return self._metric


class MimoRate(RateFunction):
    """高斯 MIMO 速率 R_ML（或 R_ML*）；给定 γ 时带 γ·R_ML 的顺序度量。"""

    rate_id = "mimo"
    adaptive = True

    def __init__(self, config: MimoConfig, form: str = "ml", gamma: Optional[float] = None) -> None:
        if form not in ("ml", "ml*"):
            raise InvalidParameterError(f"unknown mimo rate form: {form}")
        self.config = config
        self.form = form
        self.gamma = gamma if gamma is not None else config.gamma
        self._metric = MimoGammaMetric(config, self.gamma) if self.gamma is not None else None

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        r_ml, r_ml_star = mimo_rate(raw(x), raw(y), self.config)
        return r_ml if self.form == "ml" else r_ml_star

    def metric(self) -> Optional[DecodingMetric]:
        return self._metric


class RhoRate(RateFunction):
    rate_id = "rho"

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return rho_rate(raw(x), raw(y))


class WireRate(RateFunction):
    """R = 1 当 x = y，否则 0。"""

    rate_id = "wire"

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        xa, ya = raw(x), raw(y)
        if xa.shape != ya.shape:
            raise InvalidInputError(f"length mismatch: {xa.shape} != {ya.shape}")
        return 1.0 if np.array_equal(xa, ya) else 0.0


class OnOffDensityRate(RateFunction):
    """开/关二元信道的信息密度 (1/n)log₂(2ⁿ·1[x=y]/2 + ½)。"""

    rate_id = "onoff"

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        xa, ya = raw(x), raw(y)
        if xa.shape != ya.shape:
            raise InvalidInputError(f"length mismatch: {xa.shape} != {ya.shape}")
        n = xa.shape[0]
        if np.array_equal(xa, ya):
            return float(np.logaddexp2(n - 1.0, -1.0) / n)
        return -1.0 / n


class OffsetRate(RateFunction):
    rate_id = "offset"

    def __init__(self, base: RateFunction, delta: float) -> None:
        self.base = base
        self.delta = float(delta)

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return self.base.rate(x, y) + self.delta


class MaxRate(RateFunction):
    """max_k R_k(x, y)：通用性的代价至多 log₂K/n。"""

    rate_id = "max"

    def __init__(self, rates: Sequence[RateFunction]) -> None:
        if not rates:
            raise InvalidParameterError("max rate needs at least one rate function")
        self.rates = list(rates)

    def rate(self, x: SequenceLike, y: SequenceLike) -> float:
        return float(max(r.rate(x, y) for r in self.rates))


# ---------------------------------------------------------------------------
# 注册表


def _prior_or_uniform(prior: Optional[Prior], size: int) -> Prior:
    return prior if prior is not None else IIDPrior.uniform(size)


@register_rate_function("emi", "empirical mutual information I(x;y)", params=["size"])
def _emi(**_: Any) -> RateFunction:
    return EMIRate()


@register_rate_function("emi-ml", "I(x;y) + D(P_x||Q) for i.i.d. Q", params=["size", "prior"])
def _emi_ml(size: int = 2, prior: Optional[Prior] = None, **_: Any) -> RateFunction:
    return EMIMLRate(_prior_or_uniform(prior, size))


@register_rate_function("markov", "D-order Markov state rate (ml or ml*)", params=["size", "prior", "order", "form"])
def _markov(size: int = 2, prior: Optional[Prior] = None, order: int = 1, form: str = "ml", **_: Any) -> RateFunction:
    return MarkovStateRate(order, _prior_or_uniform(prior, size), form)


@register_rate_function("modadd", "log|X| - H(y-x)", params=["size"])
def _modadd(size: int = 2, **_: Any) -> RateFunction:
    return ModuloAdditiveRate(size)


@register_rate_function("lz", "LZ78 on the modulo noise y-x", adaptive=True, params=["size", "n"])
def _lz(size: int = 2, n: Optional[int] = None, **_: Any) -> RateFunction:
    return CompressionRate("lz", size, horizon=n)


@register_rate_function("clz", "conditional LZ compression of x given y", adaptive=True, params=["size", "y_size", "n"])
def _clz(size: int = 2, y_size: Optional[int] = None, n: Optional[int] = None, **_: Any) -> RateFunction:
    return CompressionRate("clz", size, y_size, horizon=n)


@register_rate_function("mimo", "Gaussian MIMO R_ML / R_ML*", adaptive=True, params=["config", "form", "gamma"])
def _mimo(config: Optional[MimoConfig] = None, form: str = "ml", gamma: Optional[float] = None, **_: Any) -> RateFunction:
    if config is None:
        raise InvalidParameterError("mimo rate function needs a MimoConfig")
    return MimoRate(config, form, gamma)


@register_rate_function("rho", "SISO correlation rate 1/2 log 1/(1-rho^2)")
def _rho(**_: Any) -> RateFunction:
    return RhoRate()


@register_rate_function("wire", "1 if x = y else 0")
def _wire(**_: Any) -> RateFunction:
    return WireRate()


@register_rate_function("onoff", "information density of the binary on/off channel")
def _onoff(**_: Any) -> RateFunction:
    return OnOffDensityRate()


@register_rate_function("type-opt", "optimal memoryless type-based rate", params=["size", "prior"])
def _type_opt(size: int = 2, prior: Optional[Prior] = None, **_: Any) -> RateFunction:
    return TypeOptimalRate(_prior_or_uniform(prior, size))


@register_rate_function(
    "cond", "conditional-form rate with a fixed model", adaptive=True, params=["size", "prior", "model", "p"]
)
def _cond(size: int = 2, prior: Optional[Prior] = None, model: str = "bsc", p: Optional[float] = None, **_: Any) -> RateFunction:
    prior = _prior_or_uniform(prior, size)
    return ConditionalFormRate(model_from_name(model, size, p, prior), prior)


@register_rate_function("kt", "conditional-form rate with the add-1/2 mixture", adaptive=True, params=["size", "prior"])
def _kt(size: int = 2, prior: Optional[Prior] = None, **_: Any) -> RateFunction:
    return MixtureRate(_prior_or_uniform(prior, size))


@register_rate_function(
    "modadd-kt", "add-1/2 mixture over the modulo noise y-x", adaptive=True, params=["size", "prior"]
)
def _modadd_kt(size: int = 2, prior: Optional[Prior] = None, **_: Any) -> RateFunction:
    return MixtureRate(_prior_or_uniform(prior, size), modulo=True)


@register_rate_function(
    "markov-kt",
    "add-1/2 mixture over the D-order state (x past, y window); D-causal",
    adaptive=True,
    params=["size", "prior", "order"],
)
def _markov_kt(size: int = 2, prior: Optional[Prior] = None, order: int = 1, **_: Any) -> RateFunction:
    return MixtureRate(_prior_or_uniform(prior, size), order=int(order))


@register_rate_function("offset", "R + delta", params=["base", "delta"])
def _offset(base: Optional[RateFunction] = None, delta: float = 0.0, **_: Any) -> RateFunction:
    if base is None:
        raise InvalidParameterError("offset rate function needs a base rate function")
    return OffsetRate(base, delta)


@register_rate_function("max", "max over rate functions", params=["rates"])
def _max(rates: Optional[Sequence[RateFunction]] = None, **_: Any) -> RateFunction:
    return MaxRate(list(rates or []))


def create_rate_function(rate_id: str, **params: Any) -> RateFunction:
    return rate_registry.create(rate_id, **params)
