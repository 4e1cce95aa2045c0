from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy import linalg
from scipy.special import gammaincc

from indichan.core.alphabet import Alphabet, SymbolSequence
from indichan.core.randomness import SharedRandomness
from indichan.errors import InvalidInputError, InvalidParameterError

LOG2E = float(np.log2(np.e))
_MASS_TOL = 1e-12

SequenceLike = Union[SymbolSequence, np.ndarray]


class Prior(ABC):
    """输入分布 Q(x)。所有对数均以 2 为底。"""

    kind: str = "prior"
    alphabet: Alphabet

    @property
    def q_min(self) -> Optional[float]:
        return None

    @property
    def q_max(self) -> Optional[float]:
        return None

    @abstractmethod
    def sample(self, n: int, rand: SharedRandomness) -> SymbolSequence:
        ...

    @abstractmethod
    def letter_log_masses(self, x: SequenceLike) -> np.ndarray:
        """log₂ Q(x_i | x^{i-1})，i = 1..n。零质量位置为 -inf。"""

    def log_mass(self, x: SequenceLike) -> float:
        terms = self.letter_log_masses(x)
        if np.any(np.isneginf(terms)):
            return -np.inf
        return float(np.sum(terms))

    def conditional_log_mass(self, x: SequenceLike, j: int, k: int) -> float:
        """log₂ Q(x_{j+1}^k | x^j)。"""
        terms = self.letter_log_masses(x)[j:k]
        if np.any(np.isneginf(terms)):
            return -np.inf
        return float(np.sum(terms))

    def _array(self, x: SequenceLike) -> np.ndarray:
        if isinstance(x, SymbolSequence):
            if x.alphabet != self.alphabet:
                raise InvalidInputError(
                    f"sequence alphabet {x.alphabet.to_dict()} does not match prior alphabet {self.alphabet.to_dict()}"
                )
            return x.data
        return self.alphabet.coerce(x)

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        ...


def _validate_mass(mass: np.ndarray, what: str) -> np.ndarray:
    mass = np.asarray(mass, dtype=np.float64)
    if np.any(mass < 0) or not np.all(np.isfinite(mass)):
        raise InvalidParameterError(f"{what}: masses must be finite and non-negative")
    totals = mass.sum(axis=-1)
    if np.any(np.abs(totals - 1.0) > _MASS_TOL):
        raise InvalidParameterError(f"{what}: masses must sum to 1, got {totals}")
    return mass


def _min_nonzero(mass: np.ndarray) -> float:
    nz = mass[mass > 0]
    return float(nz.min()) if nz.size else 0.0


@dataclass(frozen=True)
class IIDPrior(Prior):
    """无记忆先验：每个符号独立地按 mass 抽取。"""

    mass: np.ndarray
    kind: str = field(default="iid", init=False)

    def __post_init__(self):
        mass = _validate_mass(self.mass, "iid prior")
        if mass.ndim != 1:
            raise InvalidParameterError("iid prior mass must be a vector")
        mass.flags.writeable = False
        object.__setattr__(self, "mass", mass)

    @classmethod
    def uniform(cls, size: int) -> "IIDPrior":
        return cls(np.full(size, 1.0 / size))

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.finite(self.mass.size)

    @property
    def q_min(self) -> float:
        return _min_nonzero(self.mass)

    @property
    def q_max(self) -> float:
        return float(self.mass.max())

    def sample(self, n: int, rand: SharedRandomness) -> SymbolSequence:
        _check_length(n)
        rng = rand.generator()
        data = rng.choice(self.mass.size, size=n, p=self.mass)
        return SymbolSequence(self.alphabet, data)

    def letter_log_masses(self, x: SequenceLike) -> np.ndarray:
        arr = self._array(x)
        with np.errstate(divide="ignore"):
            return np.log2(self.mass)[arr]

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "mass": self.mass.tolist()}


@dataclass(frozen=True)
class MarkovPrior(Prior):
    """
    D 阶马尔可夫先验。状态为前 D 个符号 (x_{i-D}..x_{i-1})，
    i ≤ D 时用固定初始符号补齐（initial_symbol）。

    transition[s, a] = Q(a | s)，s = Σ_m x_{i-m}·|X|^{m-1}。
    """

    transition: np.ndarray
    order: int
    initial_symbol: int = 0
    kind: str = field(default="markov", init=False)

    def __post_init__(self):
        if self.order < 0:
            raise InvalidParameterError("markov order must be >= 0")
        mass = _validate_mass(self.transition, "markov prior")
        if mass.ndim != 2:
            raise InvalidParameterError("markov transition must be a 2-D table")
        size = mass.shape[1]
        if mass.shape[0] != size ** self.order:
            raise InvalidParameterError(
                f"markov transition needs {size ** self.order} rows for order {self.order}, got {mass.shape[0]}"
            )
        if not 0 <= self.initial_symbol < size:
            raise InvalidParameterError("initial symbol outside alphabet")
        mass.flags.writeable = False
        object.__setattr__(self, "transition", mass)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.finite(self.transition.shape[1])

    @property
    def q_min(self) -> float:
        return _min_nonzero(self.transition)

    @property
    def q_max(self) -> float:
        return float(self.transition.max())

    def states(self, x: np.ndarray) -> np.ndarray:
        size = self.transition.shape[1]
        n = x.shape[0]
        states = np.zeros(n, dtype=np.int64)
        if self.order == 0:
            return states
        padded = np.concatenate([np.full(self.order, self.initial_symbol, dtype=np.int64), x])
        for m in range(1, self.order + 1):
            states += padded[self.order - m: self.order - m + n] * size ** (m - 1)
        return states

    def sample(self, n: int, rand: SharedRandomness) -> SymbolSequence:
        _check_length(n)
        size = self.transition.shape[1]
        rng = rand.generator()
        uniforms = rng.random(n)
        cdf = np.cumsum(self.transition, axis=1)
        history = [self.initial_symbol] * self.order
        out = np.zeros(n, dtype=np.int64)
        for i in range(n):
            state = 0
            for m in range(1, self.order + 1):
                state += history[-m] * size ** (m - 1)
            a = int(np.searchsorted(cdf[state], uniforms[i], side="right"))
            a = min(a, size - 1)
            out[i] = a
            if self.order:
                history.append(a)
                history.pop(0)
        return SymbolSequence(self.alphabet, out)

    def letter_log_masses(self, x: SequenceLike) -> np.ndarray:
        arr = self._array(x)
        with np.errstate(divide="ignore"):
            return np.log2(self.transition[self.states(arr), arr])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "order": self.order,
            "initial_symbol": self.initial_symbol,
            "transition": self.transition.tolist(),
        }


@dataclass(frozen=True)
class TrimmedGaussianPrior(Prior):
    """
    截断高斯先验：每个符号 x（长度 t 的行向量）服从高斯/复高斯分布，
    并限制在椭球 x Λ_X⁻¹ x* ≤ Ω² 内，归一化因子为 1/(1-δ_Ω)。

    密度常数取 |(2π/d)·Λ_X|^{-d/2}：d=1 为实高斯 |2πΛ|^{-1/2}，d=2 为复高斯 |πΛ|^{-1}。
    """

    cov: np.ndarray
    omega: float
    complex_valued: bool = False
    kind: str = field(default="trimmed_gaussian", init=False)

    def __post_init__(self):
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise InvalidParameterError(f"trim radius omega must be > 0, got {self.omega}")
        dtype = np.complex128 if self.complex_valued else np.float64
        cov = np.atleast_2d(np.asarray(self.cov, dtype=dtype))
        if cov.shape[0] != cov.shape[1]:
            raise InvalidParameterError("covariance must be square")
        if not np.allclose(cov, cov.conj().T, atol=1e-12):
            raise InvalidParameterError("covariance must be symmetric/hermitian")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as e:
            raise InvalidParameterError("covariance must be positive definite") from e
        cov.flags.writeable = False
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def t(self) -> int:
        return int(self.cov.shape[0])

    @property
    def d(self) -> int:
        return 2 if self.complex_valued else 1

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.complex(self.t) if self.complex_valued else Alphabet.real(self.t)

    @property
    def delta_omega(self) -> float:
        """δ_Ω = Γ(dt/2, dΩ²/2)/Γ(dt/2)：未截断高斯落在椭球外的概率。"""
        return float(gammaincc(self.d * self.t / 2.0, self.d * self.omega ** 2 / 2.0))

    @property
    def log2_norm(self) -> float:
        """log₂ [ (1/(1-δ_Ω)) · |(2π/d)Λ_X|^{-d/2} ] = log₂ q_max。"""
        _, logdet = np.linalg.slogdet((2.0 * np.pi / self.d) * self.cov)
        return -np.log2(1.0 - self.delta_omega) - (self.d / 2.0) * logdet * LOG2E

    @property
    def log2_q_max(self) -> float:
        return self.log2_norm

    @property
    def log2_q_min(self) -> float:
        return self.log2_norm - (self.d / 2.0) * self.omega ** 2 * LOG2E

    @property
    def q_min(self) -> float:
        return float(2.0 ** self.log2_q_min)

    @property
    def q_max(self) -> float:
        return float(2.0 ** self.log2_q_max)

    def quadratic_forms(self, x: np.ndarray) -> np.ndarray:
        """每行的 x Λ_X⁻¹ x*。"""
        white = linalg.solve_triangular(np.conj(self._chol), x.T, lower=True)
        return np.sum(np.abs(white) ** 2, axis=0)

    def _white_rows(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.complex_valued:
            g = rng.standard_normal((count, self.t)) + 1j * rng.standard_normal((count, self.t))
            return g / np.sqrt(2.0)
        return rng.standard_normal((count, self.t))

    def sample(self, n: int, rand: SharedRandomness) -> SymbolSequence:
        _check_length(n)
        rng = rand.generator()
        rows = []
        accepted = 0
        # 拒绝采样；δ_Ω 很小时几乎一次完成
        while accepted < n:
            g = self._white_rows(rng, n - accepted + 8)
            keep = g[np.sum(np.abs(g) ** 2, axis=1) <= self.omega ** 2]
            rows.append(keep)
            accepted += keep.shape[0]
        white = np.concatenate(rows)[:n]
        x = white @ np.conj(self._chol).T
        return SymbolSequence(self.alphabet, x)

    def letter_log_masses(self, x: SequenceLike) -> np.ndarray:
        arr = self._array(x)
        q = self.quadratic_forms(arr)
        out = self.log2_norm - (self.d / 2.0) * q * LOG2E
        # 容差避免边界点被浮点误差判为越界
        out[q > self.omega ** 2 * (1 + 1e-12)] = -np.inf
        return out

    def to_dict(self) -> Dict[str, Any]:
        cov = self.cov
        return {
            "kind": self.kind,
            "omega": self.omega,
            "complex": self.complex_valued,
            "cov_real": np.real(cov).tolist(),
            "cov_imag": np.imag(cov).tolist(),
        }


def _check_length(n: int) -> None:
    if int(n) < 1:
        raise InvalidParameterError(f"sequence length must be >= 1, got {n}")


def sample_prior(prior: Prior, n: int, rand: SharedRandomness) -> SymbolSequence:
    return prior.sample(n, rand)


def prior_log_mass(prior: Prior, x: SequenceLike) -> float:
    return prior.log_mass(x)
