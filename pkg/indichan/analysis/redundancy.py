from __future__ import annotations

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from indichan.analysis.report import OverheadReport
from indichan.analysis.stats import normal_interval, wilson_interval
from indichan.core.alphabet import Alphabet, SymbolSequence
from indichan.core.priors import Prior
from indichan.core.randomness import SharedRandomness
from indichan.empirics.types import all_sequences
from indichan.errors import InvalidParameterError, check_guard
from indichan.infrastructure.config.config_manager import config_manager
from indichan.infrastructure.utils.logging import get_logger
from indichan.ratefn.base import RateFunction
from indichan.ratefn.catalog import MaxRate
from indichan.ratefn.conversion import candidate_sequence, exhaustive_weights

logger = get_logger(__name__)


def _output_alphabet(prior: Prior, y_size: Optional[int]) -> Alphabet:
    if y_size is not None:
        return Alphabet.finite(y_size)
    if not prior.alphabet.is_finite:
        raise InvalidParameterError("an output alphabet size is needed for continuous priors")
    return prior.alphabet


def _rates(rate_fn: RateFunction, prior: Prior, rows: np.ndarray, y: SymbolSequence) -> np.ndarray:
    values = np.array([rate_fn(candidate_sequence(prior, row), y) for row in rows], dtype=np.float64)
    # nan 表示无定义：不参与任何 {R_emp ≥ R} 事件
    return np.where(np.isnan(values), -np.inf, values)


def ccdf_sup(values: np.ndarray, weights: np.ndarray, n: int) -> Tuple[float, float, float]:
    """
    sup_R (1/n)log₂ Q{R_emp ≥ R} + R，R 取遍达到的有限值。
    CCDF 是 R 的阶梯函数，取值集合上的最大值即为上确界。返回 (值, R*, Q{R_emp ≥ R*})。
    """
    infinite = np.isposinf(values) & (weights > 0)
    if np.any(infinite):
        # +inf 的 R 值无法给出有限冗余
        return float("inf"), float("inf"), float(np.sum(weights[infinite]))
    finite = np.isfinite(values)
    if not np.any(finite):
        return float("-inf"), float("nan"), 0.0
    order = np.argsort(values[finite], kind="stable")[::-1]
    v = values[finite][order]
    w = weights[finite][order]
    levels, first = np.unique(-v, return_index=True)
    cum = np.cumsum(w)
    # 降序排列后，R ≥ r 的质量为到该值最后一次出现为止的累加
    last = np.r_[first[1:], v.shape[0]] - 1
    mass = cum[last]
    r = -levels
    with np.errstate(divide="ignore"):
        score = np.log2(mass) / n + r
    i = int(np.argmax(score))
    return float(score[i]), float(r[i]), float(mass[i])


def intrinsic_redundancy(
    rate_fn: RateFunction,
    prior: Prior,
    n: int,
    method: str = "auto",
    y_size: Optional[int] = None,
    y_set: Optional[Sequence[np.ndarray]] = None,
    trials: Optional[int] = None,
    rand: Optional[SharedRandomness] = None,
) -> OverheadReport:
    """
    μ_Q = sup_{y,R} (1/n)log₂ Q{R_emp(X, y) ≥ R} + R。

    exhaustive：穷举 𝒳ⁿ×𝒴ⁿ（受 guards.max_enumeration 约束）。
    monte_carlo：对给定或抽样的 y 集合估计，结果是 μ_Q 的下界并在报告中注明。
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    ya = _output_alphabet(prior, y_size)
    limit = int(config_manager.get("guards.max_enumeration", 10**7))
    if method == "auto":
        finite = prior.alphabet.is_finite and y_set is None
        method = "exhaustive" if finite and (float(prior.alphabet.size) * ya.size) ** n <= limit else "monte_carlo"
    report = OverheadReport(title="intrinsic_redundancy")
    inputs = {"rate_fn": rate_fn.rate_id, "n": n, "prior": prior.to_dict()}

    if method == "exhaustive":
        check_guard((float(prior.alphabet.size) * ya.size) ** n, limit, "intrinsic redundancy enumeration")
        xs, weights = exhaustive_weights(prior, n)
        best = (float("-inf"), float("nan"), 0.0)
        best_y: Optional[np.ndarray] = None
        for y_row in all_sequences(ya.size, n):
            values = _rates(rate_fn, prior, xs, SymbolSequence(ya, y_row))
            found = ccdf_sup(values, weights, n)
            if found[0] > best[0]:
                best, best_y = found, y_row
        report.add("mu_Q", best[0], "sup (1/n)log Q{R>=r} + r", inputs, method="exhaustive")
        report.add("R_star", best[1], "argmax R", inputs, method="exhaustive")
        report.metadata["y_star"] = None if best_y is None else best_y.tolist()
        logger.debug("intrinsic redundancy n=%d mu_Q=%.6g method=exhaustive", n, best[0])
        return report

    if method != "monte_carlo":
        raise InvalidParameterError(f"unknown method: {method}")
    trials = int(trials or config_manager.get("monte_carlo.trials", 10_000))
    rand = rand or SharedRandomness(int(config_manager.get("simulation.master_seed", 0)))
    if y_set is None:
        if not ya.is_finite:
            raise InvalidParameterError("sampled y needs a finite output alphabet; supply y_set")
        y_rng = rand.derive("redundancy/y").generator()
        y_set = [y_rng.integers(0, ya.size, size=n) for _ in range(int(config_manager.get("monte_carlo.y_samples", 16)))]
    best = (float("-inf"), float("nan"), 0.0)
    for idx, y_row in enumerate(y_set):
        y = SymbolSequence(ya, np.asarray(y_row)) if ya.is_finite else np.asarray(y_row)
        rows = np.stack([prior.sample(n, rand.derive(f"redundancy/{idx}/{t}")).data for t in range(trials)])
        values = _rates(rate_fn, prior, rows, y)
        found = ccdf_sup(values, np.full(trials, 1.0 / trials), n)
        if found[0] > best[0]:
            best = found
    hits = int(round(best[2] * trials))
    lo, hi = wilson_interval(hits, trials)
    with np.errstate(divide="ignore"):
        ci = (float(np.log2(lo) / n + best[1]), float(np.log2(hi) / n + best[1]))
    inputs.update({"y_sampled": True, "bound": "lower"})
    report.add("mu_Q", best[0], "sup (1/n)log Q{R>=r} + r", inputs, method="monte_carlo", ci=ci, trials=trials)
    logger.debug("intrinsic redundancy n=%d mu_Q=%.6g method=monte_carlo trials=%d", n, best[0], trials)
    return report


def chernoff_L(
    rate_fn: RateFunction,
    F: Callable[[float], float],
    prior: Prior,
    y: SymbolSequence,
    method: str = "exhaustive",
    trials: Optional[int] = None,
    rand: Optional[SharedRandomness] = None,
) -> OverheadReport:
    """L_{F,n} = E_Q[2^{n·F(R_emp(X, y))}]，并给出 μ_Q 界 (1/n)log₂L。"""
    n = y.n
    report = OverheadReport(title="chernoff_L")
    inputs = {"rate_fn": rate_fn.rate_id, "n": n}

    def exponent(r: float) -> float:
        if np.isnan(r):
            return 0.0
        return float(2.0 ** (n * F(r)))

    if method == "exhaustive":
        xs, weights = exhaustive_weights(prior, n)
        terms = np.array([exponent(rate_fn(candidate_sequence(prior, row), y)) for row in xs])
        value = float(np.sum(weights * terms))
        report.add("L_Fn", value, "E_Q[2^{n F(R)}]", inputs, method="exhaustive")
    elif method == "monte_carlo":
        trials = int(trials or config_manager.get("monte_carlo.trials", 10_000))
        rand = rand or SharedRandomness(int(config_manager.get("simulation.master_seed", 0)))
        terms = np.array(
            [exponent(rate_fn(prior.sample(n, rand.derive(f"chernoff/{t}")), y)) for t in range(trials)]
        )
        value = float(np.mean(terms))
        report.add("L_Fn", value, "E_Q[2^{n F(R)}]", inputs, method="monte_carlo", ci=normal_interval(terms), trials=trials)
    else:
        raise InvalidParameterError(f"unknown method: {method}")
    with np.errstate(divide="ignore"):
        bound = float(np.log2(value) / n)
    entry = report.entries["L_Fn"]
    if entry.method == "monte_carlo":
        with np.errstate(divide="ignore", invalid="ignore"):
            ci = (float(np.log2(max(entry.ci_low, 0.0)) / n), float(np.log2(entry.ci_high) / n))
        report.add("mu_bound", bound, "(1/n)log L", inputs, method="monte_carlo", ci=ci, trials=entry.trials)
    else:
        report.add("mu_bound", bound, "(1/n)log L", inputs, method="exhaustive")
    return report


def max_rate_price(rates: Sequence[RateFunction], prior: Prior, n: int, y_size: Optional[int] = None) -> Dict[str, Any]:
    """检查 μ_Q(max_k R_k) ≤ max_k μ_Q(R_k) + log₂K/n（穷举）。"""
    each: List[float] = [intrinsic_redundancy(r, prior, n, "exhaustive", y_size)["mu_Q"] for r in rates]
    combined = intrinsic_redundancy(MaxRate(rates), prior, n, "exhaustive", y_size)["mu_Q"]
    bound = max(each) + float(np.log2(len(rates))) / n
    return {"mu_max": combined, "mu_each_max": max(each), "bound": bound, "holds": bool(combined <= bound + 1e-12)}


def necessary_condition(
    rate_fn: RateFunction,
    prior: Prior,
    n: int,
    epsilon: float,
    y_rows: Optional[Sequence[np.ndarray]] = None,
    y_size: Optional[int] = None,
) -> Dict[str, Any]:
    """
    可达速率函数的必要条件：对所有 (y, R) 有 Q{R_emp ≥ R} ≤ 2^{−nR}/(1−ε)。
    返回最坏比值 Q{R_emp ≥ R}·2^{nR}·(1−ε)（≤ 1 即成立）。
    """
    if not 0 <= epsilon < 1:
        raise InvalidParameterError(f"epsilon must be in [0,1), got {epsilon}")
    ya = _output_alphabet(prior, y_size)
    xs, weights = exhaustive_weights(prior, n)
    rows = all_sequences(ya.size, n) if y_rows is None else [np.asarray(r) for r in y_rows]
    worst = 0.0
    for y_row in rows:
        values = _rates(rate_fn, prior, xs, SymbolSequence(ya, y_row))
        value, _, _ = ccdf_sup(values, weights, n)
        if np.isfinite(value):
            worst = max(worst, float(2.0 ** (n * value)) * (1.0 - epsilon))
        elif value > 0:
            worst = float("inf")
    return {"worst_ratio": worst, "holds": bool(worst <= 1.0 + 1e-9)}
