"""Fixed-width bit vectors and GF(2) helpers.

Bit indexing follows the FIPS-46 convention throughout the package:
1-based, big-endian, so bit 1 is the most significant bit of the vector.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import WidthError


@dataclass(frozen=True, slots=True)
class BitVector:
    """An unsigned value together with its bit width (1..64)."""

    value: int
    width: int

    def __post_init__(self):
        if not 1 <= self.width <= 64:
            raise WidthError(f"width must be in [1,64], got {self.width}")
        if not 0 <= self.value < (1 << self.width):
            raise WidthError(f"value 0x{self.value:x} does not fit in {self.width} bits")

    def __xor__(self, other: "BitVector") -> "BitVector":
        _require_same_width(self, other)
        return BitVector(self.value ^ other.value, self.width)

    def __and__(self, other: "BitVector") -> "BitVector":
        _require_same_width(self, other)
        return BitVector(self.value & other.value, self.width)

    def __str__(self) -> str:
        return f"0x{self.value:X}/{self.width}"

    @property
    def hamming_weight(self) -> int:
        return self.value.bit_count()


def _require_same_width(a: BitVector, b: BitVector) -> None:
    if a.width != b.width:
        raise WidthError(f"width mismatch: {a.width} vs {b.width}")


def hamming_weight(v: BitVector) -> int:
    """Number of set bits in v."""
    return v.value.bit_count()


def inner_product(v: BitVector, mask: BitVector) -> int:
    """GF(2) inner product: parity of (v AND mask). Widths must match."""
    _require_same_width(v, mask)
    return (v.value & mask.value).bit_count() & 1


def bit_at(v: BitVector, index: int) -> int:
    """Bit at 1-based big-endian position `index` (1 = most significant)."""
    if not 1 <= index <= v.width:
        raise IndexError(f"bit index {index} out of range for width {v.width}")
    return (v.value >> (v.width - index)) & 1


def from_bit_indices(indices, width: int) -> BitVector:
    """BitVector with the given 1-based big-endian positions set."""
    value = 0
    for i in indices:
        if not 1 <= i <= width:
            raise IndexError(f"bit index {i} out of range for width {width}")
        value |= 1 << (width - i)
    return BitVector(value, width)


def bit_indices(v: BitVector):
    """Sorted 1-based big-endian positions of the set bits."""
    return [i for i in range(1, v.width + 1) if bit_at(v, i)]
