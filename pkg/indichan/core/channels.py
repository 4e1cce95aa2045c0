from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from indichan.core.alphabet import Alphabet, SymbolSequence
from indichan.core.randomness import SharedRandomness
from indichan.errors import InvalidInputError, InvalidParameterError

SequenceLike = Union[SymbolSequence, np.ndarray]


class Channel(ABC):
    """个体信道：每个输入符号产生恰好一个输出符号；给定自身随机流时确定。"""

    kind: str = "channel"

    @property
    def prefix_consistent(self) -> bool:
        """延长输入时已发送位置的输出保持不变（倍增技巧要求）。"""
        return True

    @property
    @abstractmethod
    def input_alphabet(self) -> Alphabet:
        ...

    @property
    @abstractmethod
    def output_alphabet(self) -> Alphabet:
        ...

    @abstractmethod
    def _transmit(self, x: np.ndarray, rand: SharedRandomness) -> np.ndarray:
        ...

    def transmit(self, x: SequenceLike, rand: SharedRandomness) -> SymbolSequence:
        if isinstance(x, SymbolSequence):
            if x.alphabet != self.input_alphabet:
                raise InvalidInputError(
                    f"input alphabet {x.alphabet.to_dict()} does not match channel {self.kind}"
                )
            arr = x.data
        else:
            arr = self.input_alphabet.coerce(x)
        y = self._transmit(arr, rand)
        return SymbolSequence(self.output_alphabet, y)

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        ...


@dataclass(frozen=True)
class FixedOutputChannel(Channel):
    """输出为预先给定的序列 y，完全忽略 x（个体信道最一般的情形）。"""

    y: SymbolSequence
    input_size: int = 2
    kind: str = field(default="fixed_output", init=False)

    @property
    def input_alphabet(self) -> Alphabet:
        return Alphabet.finite(self.input_size)

    @property
    def output_alphabet(self) -> Alphabet:
        return self.y.alphabet

    def _transmit(self, x: np.ndarray, rand: SharedRandomness) -> np.ndarray:
        n = x.shape[0]
        if n > self.y.n:
            raise InvalidInputError(f"fixed output has length {self.y.n}, input has {n}")
        return self.y.data[:n]

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "input_size": self.input_size, "y": self.y.data.tolist()}


@dataclass(frozen=True)
class ModuloAdditiveChannel(Channel):
    """
    y_i = x_i + z_i (mod |X|)。

    噪声 z 取自固定序列 errors，或按 error_mass 逐符号独立抽取；
    exact_fraction=True 时对 error_mass 取恰好 round(n·p) 个错误位置（仅二元，用于可控的错误比例）。
    """

    size: int
    errors: Optional[np.ndarray] = None
    error_mass: Optional[np.ndarray] = None
    exact_fraction: bool = False
    kind: str = field(default="modulo_additive", init=False)

    def __post_init__(self):
        if self.size < 2:
            raise InvalidParameterError("modulo channel needs |X| >= 2")
        if (self.errors is None) == (self.error_mass is None):
            raise InvalidParameterError("modulo channel needs exactly one of errors / error_mass")
        if self.errors is not None:
            errs = Alphabet.finite(self.size).coerce(self.errors)
            errs.flags.writeable = False
            object.__setattr__(self, "errors", errs)
        else:
            mass = np.asarray(self.error_mass, dtype=np.float64)
            if mass.shape != (self.size,) or np.any(mass < 0) or abs(mass.sum() - 1.0) > 1e-12:
                raise InvalidParameterError("error_mass must be a distribution over the alphabet")
            object.__setattr__(self, "error_mass", mass)
        if self.exact_fraction and (self.error_mass is None or self.size != 2):
            raise InvalidParameterError("exact_fraction applies to binary error_mass only")

    @classmethod
    def bsc(cls, p: float, exact_fraction: bool = False) -> "ModuloAdditiveChannel":
        if not 0.0 <= p <= 1.0:
            raise InvalidParameterError(f"crossover probability must be in [0,1], got {p}")
        return cls(2, error_mass=np.array([1.0 - p, p]), exact_fraction=exact_fraction)

    @classmethod
    def noiseless(cls, size: int) -> "ModuloAdditiveChannel":
        mass = np.zeros(size)
        mass[0] = 1.0
        return cls(size, error_mass=mass)

    @property
    def prefix_consistent(self) -> bool:
        # 精确比例的错误位置随 n 整体重抽
        return not self.exact_fraction

    @property
    def input_alphabet(self) -> Alphabet:
        return Alphabet.finite(self.size)

    @property
    def output_alphabet(self) -> Alphabet:
        return Alphabet.finite(self.size)

    def noise(self, n: int, rand: SharedRandomness) -> np.ndarray:
        if self.errors is not None:
            if n > self.errors.shape[0]:
                raise InvalidInputError(f"error sequence has length {self.errors.shape[0]}, input has {n}")
            return self.errors[:n]
        rng = rand.derive("channel").generator()
        if self.exact_fraction:
            z = np.zeros(n, dtype=np.int64)
            count = int(round(n * self.error_mass[1]))
            z[rng.choice(n, size=count, replace=False)] = 1
            return z
        return rng.choice(self.size, size=n, p=self.error_mass).astype(np.int64)

    def _transmit(self, x: np.ndarray, rand: SharedRandomness) -> np.ndarray:
        return np.mod(x + self.noise(x.shape[0], rand), self.size)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind, "size": self.size, "exact_fraction": self.exact_fraction}
        if self.errors is not None:
            out["errors"] = self.errors.tolist()
        else:
            out["error_mass"] = self.error_mass.tolist()
        return out


@dataclass(frozen=True)
class DMCChannel(Channel):
    """离散无记忆信道，matrix[a, b] = W(b | a)。"""

    matrix: np.ndarray
    kind: str = field(default="dmc", init=False)

    def __post_init__(self):
        w = np.asarray(self.matrix, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 2 or w.shape[1] < 2:
            raise InvalidParameterError("transition matrix must be |X| x |Y| with both >= 2")
        if np.any(w < 0) or np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-12):
            raise InvalidParameterError("transition matrix rows must be distributions")
        w.flags.writeable = False
        object.__setattr__(self, "matrix", w)

    @property
    def input_alphabet(self) -> Alphabet:
        return Alphabet.finite(self.matrix.shape[0])

    @property
    def output_alphabet(self) -> Alphabet:
        return Alphabet.finite(self.matrix.shape[1])

    def _transmit(self, x: np.ndarray, rand: SharedRandomness) -> np.ndarray:
        rng = rand.derive("channel").generator()
        cdf = np.cumsum(self.matrix, axis=1)[x]
        u = rng.random(x.shape[0])[:, None]
        y = np.sum(u >= cdf, axis=1)
        return np.minimum(y, self.matrix.shape[1] - 1)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "matrix": self.matrix.tolist()}


@dataclass(frozen=True)
class DelayChannel(Channel):
    """y_i = x_{i-1}，y_1 = fill。"""

    size: int
    fill: int = 0
    kind: str = field(default="delay", init=False)

    def __post_init__(self):
        if not 0 <= self.fill < self.size:
            raise InvalidParameterError("fill symbol outside alphabet")

    @property
    def input_alphabet(self) -> Alphabet:
        return Alphabet.finite(self.size)

    @property
    def output_alphabet(self) -> Alphabet:
        return Alphabet.finite(self.size)

    def _transmit(self, x: np.ndarray, rand: SharedRandomness) -> np.ndarray:
        return np.concatenate([[self.fill], x[:-1]]).astype(np.int64)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "size": self.size, "fill": self.fill}


@dataclass(frozen=True)
class OnOffBinaryChannel(Channel):
    """
    二元开/关信道：整段传输前以概率 p_on 抽一次状态。
    开：y = x；关：y 为与 x 独立的均匀比特。
    """

    p_on: float = 0.5
    kind: str = field(default="onoff_binary", init=False)

    def __post_init__(self):
        if not 0.0 <= self.p_on <= 1.0:
            raise InvalidParameterError(f"p_on must be in [0,1], got {self.p_on}")

    @property
    def input_alphabet(self) -> Alphabet:
        return Alphabet.finite(2)

    @property
    def output_alphabet(self) -> Alphabet:
        return Alphabet.finite(2)

    def state(self, rand: SharedRandomness) -> bool:
        return bool(rand.derive("channel/state").generator().random() < self.p_on)

    def _transmit(self, x: np.ndarray, rand: SharedRandomness) -> np.ndarray:
        if self.state(rand):
            return x.copy()
        return rand.derive("channel/off").generator().integers(0, 2, size=x.shape[0])

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "p_on": self.p_on}


@dataclass(frozen=True)
class GaussianMIMOChannel(Channel):
    """Y = X·H + N，X 为 n×t，H 为 t×r，N 的行独立服从 N(0, noise_cov)（复数时为圆对称复高斯）。"""

    H: np.ndarray
    noise_cov: np.ndarray
    complex_valued: bool = False
    kind: str = field(default="gaussian_mimo", init=False)

    def __post_init__(self):
        dtype = np.complex128 if self.complex_valued else np.float64
        h = np.atleast_2d(np.asarray(self.H, dtype=dtype))
        cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=dtype))
        if cov.shape != (h.shape[1], h.shape[1]):
            raise InvalidParameterError(f"noise covariance must be {h.shape[1]}x{h.shape[1]}")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as e:
            raise InvalidParameterError("noise covariance must be positive definite") from e
        h.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "noise_cov", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def t(self) -> int:
        return int(self.H.shape[0])

    @property
    def r(self) -> int:
        return int(self.H.shape[1])

    @property
    def input_alphabet(self) -> Alphabet:
        return Alphabet.complex(self.t) if self.complex_valued else Alphabet.real(self.t)

    @property
    def output_alphabet(self) -> Alphabet:
        return Alphabet.complex(self.r) if self.complex_valued else Alphabet.real(self.r)

    def _transmit(self, x: np.ndarray, rand: SharedRandomness) -> np.ndarray:
        rng = rand.derive("channel").generator()
        n = x.shape[0]
        if self.complex_valued:
            g = (rng.standard_normal((n, self.r)) + 1j * rng.standard_normal((n, self.r))) / np.sqrt(2.0)
        else:
            g = rng.standard_normal((n, self.r))
        return x @ self.H + g @ np.conj(self._chol).T

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "complex": self.complex_valued,
            "H_real": np.real(self.H).tolist(),
            "H_imag": np.imag(self.H).tolist(),
            "noise_cov_real": np.real(self.noise_cov).tolist(),
            "noise_cov_imag": np.imag(self.noise_cov).tolist(),
        }


def apply_channel(channel: Channel, x: SequenceLike, rand: SharedRandomness) -> SymbolSequence:
    return channel.transmit(x, rand)
