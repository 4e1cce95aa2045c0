from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Tuple

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class SharedRandomness:
    """
    编码器与译码器共享的随机源。

    (master_seed, path) 唯一决定抽样流；派生是纯函数，抽样只修改本地生成器副本。
    """

    master_seed: int
    path: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & _MASK64)
        object.__setattr__(self, "path", tuple(str(p) for p in self.path))

    def derive(self, label: str) -> "SharedRandomness":
        return SharedRandomness(self.master_seed, self.path + (str(label),))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=tuple(_label_key(label) for label in self.path),
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    @property
    def label(self) -> str:
        return "/".join(self.path)

    def to_dict(self):
        return {"master_seed": self.master_seed, "path": list(self.path)}


def derive_stream(rand: SharedRandomness, label: str) -> SharedRandomness:
    return rand.derive(label)


def random_bits(rand: SharedRandomness, count: int) -> np.ndarray:
    """消息比特源（惰性"无限消息"按需截取前 count 位）。"""
    if count <= 0:
        return np.zeros(0, dtype=np.int8)
    # random_raw 逐字输出，长度不同的请求互为前缀
    words = np.random.PCG64(rand.derive("message").seed_sequence()).random_raw((count + 63) // 64)
    bits = np.unpackbits(np.asarray(words, dtype="<u8").view(np.uint8), bitorder="little")
    return bits[:count].astype(np.int8)
