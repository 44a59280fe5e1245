"""Soft-decision decoding in the first-order Reed-Muller code.

A noisy, erased codeword of length 2^k is scored against every affine-free
codeword (linear functions x -> <K,x>) at once by a fast Walsh-Hadamard
transform; the subkey ranking is the transform output sorted descending.
Erased positions carry weight exactly 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bits import BitVector
from .errors import ShapeError

MAX_K = 26  # 2^26 float64 scores ~ 512 MiB; larger supports must be split


def fwht(values) -> np.ndarray:
    """In-place-style Walsh-Hadamard transform.

    output[K] = sum_x (-1)^<K,x> input[x], computed in k*2^k butterflies.
    """
    a = np.asarray(values, dtype=np.float64).copy()
    n = a.shape[0]
    if n == 0 or n & (n - 1):
        raise ShapeError(f"length {n} is not a power of two")
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        x = a[:, 0, :].copy()
        y = a[:, 1, :].copy()
        a[:, 0, :] = x + y
        a[:, 1, :] = x - y
        a = a.reshape(n)
        h *= 2
    return a


@dataclass(slots=True)
class NoisyCodeword:
    """Real-valued RM(1,k) observation; zeros at undefined positions."""

    values: np.ndarray
    k: int
    defined_positions: int
    position_map: dict = field(default_factory=dict)  # position -> accumulated weight

    @classmethod
    def empty(cls, k: int) -> "NoisyCodeword":
        if k > MAX_K:
            raise ShapeError(f"k={k} exceeds the {MAX_K}-bit codeword guard")
        return cls(np.zeros(1 << k), k, 0)

    def accumulate(self, position: int, weight: float) -> None:
        if position not in self.position_map:
            self.defined_positions += 1
            self.position_map[position] = 0.0
        self.position_map[position] += weight
        self.values[position] += weight


@dataclass(frozen=True, slots=True)
class KeyRanking:
    """All 2^k subkeys ordered by score, ties broken by smallest value."""

    entries: tuple  # of (BitVector, float), scores non-increasing
    uninformative: bool = False

    def rank_of(self, subkey: int) -> int:
        """1-based rank of a subkey value."""
        for r, (sk, _) in enumerate(self.entries, start=1):
            if sk.value == subkey:
                return r
        raise KeyError(f"subkey {subkey:#x} not in ranking")

    @property
    def best(self) -> BitVector:
        return self.entries[0][0]


def decode(codeword: NoisyCodeword) -> KeyRanking:
    """Rank every k-bit subkey by its Walsh coefficient."""
    if codeword.k > MAX_K:
        raise ShapeError(f"k={codeword.k} exceeds the {MAX_K}-bit codeword guard")
    scores = fwht(codeword.values)
    order = np.argsort(-scores, kind="stable")  # equal scores keep ascending subkey order
    width = max(codeword.k, 1)
    entries = tuple((BitVector(int(i), width), float(scores[i])) for i in order)
    return KeyRanking(entries, uninformative=codeword.defined_positions == 0)
