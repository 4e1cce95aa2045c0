from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from indichan.compress.bitcost import elias_delta_length
from indichan.compress.conditional_lz import conditional_lz_lengths, conditional_lz_parse, rounding_overhead
from indichan.core.randomness import SharedRandomness
from indichan.empirics.distributions import FiniteLike, finite_array
from indichan.errors import InvalidInputError, InvalidParameterError

_MASS_TOL = 1e-9


@dataclass(frozen=True)
class FSMachine:
    """
    S 状态的顺序概率分配器：在状态 s 收到 y_i 后给出 P(x_i | s, y_i)，再按 (x_i, y_i) 转移。

    Attributes:
        mass: 形状 (S, |Y|, |X|)，每个 (s, b) 行之和为 1
        transition: 形状 (S, |X|, |Y|)，下一状态编号
    """

    mass: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        trans = np.asarray(self.transition, dtype=np.int64)
        if mass.ndim != 3 or trans.ndim != 3:
            raise InvalidParameterError("mass must be (S, |Y|, |X|) and transition (S, |X|, |Y|)")
        S, sy, sx = mass.shape
        if trans.shape != (S, sx, sy):
            raise InvalidParameterError(f"transition shape {trans.shape} does not match mass shape {mass.shape}")
        if np.any(mass < 0) or not np.allclose(mass.sum(axis=2), 1.0, atol=_MASS_TOL):
            raise InvalidParameterError("per-state conditional masses must be non-negative and sum to 1")
        if trans.size and (trans.min() < 0 or trans.max() >= S):
            raise InvalidParameterError("transition targets outside the state set")
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "transition", trans)

    @property
    def states(self) -> int:
        return int(self.mass.shape[0])

    @property
    def x_size(self) -> int:
        return int(self.mass.shape[2])

    @property
    def y_size(self) -> int:
        return int(self.mass.shape[1])

    @classmethod
    def uniform(cls, x_size: int, y_size: int) -> "FSMachine":
        return cls(np.full((1, y_size, x_size), 1.0 / x_size), np.zeros((1, x_size, y_size), dtype=np.int64))

    @classmethod
    def random(cls, states: int, x_size: int, y_size: int, rand: SharedRandomness) -> "FSMachine":
        rng = rand.generator()
        mass = rng.dirichlet(np.ones(x_size), size=(states, y_size))
        transition = rng.integers(0, states, size=(states, x_size, y_size))
        return cls(mass, transition)

    def run(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """各位置开始时的状态，初始状态为 0。"""
        out = np.zeros(x.shape[0], dtype=np.int64)
        s = 0
        for i in range(x.shape[0]):
            out[i] = s
            s = int(self.transition[s, x[i], y[i]])
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {"mass": self.mass.tolist(), "transition": self.transition.tolist()}


def _pair(machine: FSMachine, x: FiniteLike, y: FiniteLike):
    xa, _ = finite_array(x, machine.x_size)
    ya, _ = finite_array(y, machine.y_size)
    if xa.shape[0] != ya.shape[0]:
        raise InvalidInputError(f"length mismatch: {xa.shape[0]} != {ya.shape[0]}")
    return xa, ya


def fsm_probability(machine: FSMachine, x: FiniteLike, y: FiniteLike) -> float:
    """Σ_i log₂ P(x_i | s_i, y_i)。"""
    xa, ya = _pair(machine, x, y)
    states = machine.run(xa, ya)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log2(machine.mass[states, ya, xa])))


def fsm_dominance(machine: FSMachine, x: FiniteLike, y: FiniteLike) -> Dict[str, Any]:
    """
    条件 LZ 对有限状态分配器的支配关系。

    phrase_bound：log₂P(x|y) ≤ c·log₂S − Σ_y N(y)·log₂N(y)，N(y) 为 y 部分相同的完整短语数；
    lz_bound：L_T ≤ −log₂P(x|y) + c·(log₂|X| + r_n + log₂S) + excess，
    excess = C_LZ − Σ_y N(y)·log₂N(y) 为编码器候选集（含更短 y 前缀上的短语）带来的差额，
    另加末尾未完成短语的索引比特。
    """
    xa, ya = _pair(machine, x, y)
    n = xa.shape[0]
    log_p = fsm_probability(machine, xa, ya)
    record = conditional_lz_parse(xa, ya)
    groups = Counter(p.context for p in record.complete_phrases)
    grouped = float(sum(v * np.log2(v) for v in groups.values()))
    c = record.c
    log_s = float(np.log2(machine.states))
    phrase_bound = c * log_s - grouped
    l_s, l_t = conditional_lz_lengths(xa, ya)
    pending = l_t - l_s - elias_delta_length(n)
    r_n = rounding_overhead(machine.x_size, n, c)
    excess = max(record.complexity() - grouped, 0.0) + max(pending, 0)
    slack = c * (np.log2(machine.x_size) + r_n + log_s)
    lz_bound = -log_p + slack + excess
    return {
        "n": n,
        "c": c,
        "states": machine.states,
        "log2_P": log_p,
        "grouped_complexity": grouped,
        "phrase_bound": phrase_bound,
        "phrase_holds": bool(log_p <= phrase_bound + 1e-9),
        "L_T": int(l_t),
        "delta_n": float(slack / n),
        "excess": excess,
        "lz_bound": float(lz_bound),
        "lz_holds": bool(l_t <= lz_bound + 1e-9),
    }
