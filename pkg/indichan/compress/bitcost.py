from __future__ import annotations

from typing import List, Tuple

import numpy as np

from indichan.errors import InvalidInputError


def ceil_log2(m: int) -> int:
    """⌈log₂ m⌉，m ≥ 1；m = 1 时为 0 比特。"""
    m = int(m)
    if m < 1:
        raise ValueError(f"ceil_log2 needs m >= 1, got {m}")
    return (m - 1).bit_length()


def symbol_bits(size: int) -> int:
    return ceil_log2(size)


def elias_delta_length(n: int) -> int:
    """Elias-δ 码长：N + 2⌊log₂(N+1)⌋ + 1，N = ⌊log₂ n⌋。"""
    n = int(n)
    if n < 1:
        raise ValueError(f"elias delta needs n >= 1, got {n}")
    big_n = n.bit_length() - 1
    return big_n + 2 * ((big_n + 1).bit_length() - 1) + 1


class BitWriter:
    def __init__(self) -> None:
        self.bits: List[int] = []

    def write_uint(self, value: int, width: int) -> None:
        if width == 0:
            return
        if value < 0 or value >= (1 << width):
            raise ValueError(f"value {value} does not fit in {width} bits")
        self.bits.extend((value >> (width - 1 - i)) & 1 for i in range(width))

    def write_elias_delta(self, n: int) -> None:
        big_n = n.bit_length() - 1
        length = big_n + 1
        gamma_n = length.bit_length() - 1
        self.bits.extend([0] * gamma_n)
        self.write_uint(length, gamma_n + 1)
        self.write_uint(n - (1 << big_n), big_n)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.int8)

    def __len__(self) -> int:
        return len(self.bits)


class BitReader:
    def __init__(self, bits) -> None:
        self.bits = [int(b) for b in np.asarray(bits).ravel()]
        self.pos = 0

    def read_uint(self, width: int) -> int:
        if self.pos + width > len(self.bits):
            raise InvalidInputError("bit stream truncated")
        value = 0
        for _ in range(width):
            value = (value << 1) | self.bits[self.pos]
            self.pos += 1
        return value

    def read_elias_delta(self) -> int:
        zeros = 0
        while self.pos < len(self.bits) and self.bits[self.pos] == 0:
            zeros += 1
            self.pos += 1
        length = self.read_uint(zeros + 1)
        big_n = length - 1
        return (1 << big_n) + self.read_uint(big_n)

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.bits)


def split_header(bits) -> Tuple[int, BitReader]:
    reader = BitReader(bits)
    return reader.read_elias_delta(), reader
