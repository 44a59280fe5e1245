"""Bit-exact DES: key schedule, reduced-round evaluation, register transitions.

Reduced-round states are the raw LR register contents (no final permutation,
no final swap); full encryption applies both. All tables are the FIPS-46
constants and are checksummed at import, since a silently corrupted table is
the classic DES implementation bug.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .bits import BitVector
from .errors import RoundError, TableError

IP = (
    58, 50, 42, 34, 26, 18, 10, 2, 60, 52, 44, 36, 28, 20, 12, 4,
    62, 54, 46, 38, 30, 22, 14, 6, 64, 56, 48, 40, 32, 24, 16, 8,
    57, 49, 41, 33, 25, 17, 9, 1, 59, 51, 43, 35, 27, 19, 11, 3,
    61, 53, 45, 37, 29, 21, 13, 5, 63, 55, 47, 39, 31, 23, 15, 7,
)

E = (
    32, 1, 2, 3, 4, 5, 4, 5, 6, 7, 8, 9, 8, 9, 10, 11, 12, 13,
    12, 13, 14, 15, 16, 17, 16, 17, 18, 19, 20, 21, 20, 21, 22, 23, 24, 25,
    24, 25, 26, 27, 28, 29, 28, 29, 30, 31, 32, 1,
)

P = (
    16, 7, 20, 21, 29, 12, 28, 17, 1, 15, 23, 26, 5, 18, 31, 10,
    2, 8, 24, 14, 32, 27, 3, 9, 19, 13, 30, 6, 22, 11, 4, 25,
)

PC1 = (
    57, 49, 41, 33, 25, 17, 9, 1, 58, 50, 42, 34, 26, 18,
    10, 2, 59, 51, 43, 35, 27, 19, 11, 3, 60, 52, 44, 36,
    63, 55, 47, 39, 31, 23, 15, 7, 62, 54, 46, 38, 30, 22,
    14, 6, 61, 53, 45, 37, 29, 21, 13, 5, 28, 20, 12, 4,
)

PC2 = (
    14, 17, 11, 24, 1, 5, 3, 28, 15, 6, 21, 10,
    23, 19, 12, 4, 26, 8, 16, 7, 27, 20, 13, 2,
    41, 52, 31, 37, 47, 55, 30, 40, 51, 45, 33, 48,
    44, 49, 39, 56, 34, 53, 46, 42, 50, 36, 29, 32,
)

KEY_SHIFTS = (1, 1, 2, 2, 2, 2, 2, 2, 1, 2, 2, 2, 2, 2, 2, 1)

# Row-major 4x16 S-box tables; input b1..b6 selects row b1b6, column b2b3b4b5.
SBOXES = (
    (14, 4, 13, 1, 2, 15, 11, 8, 3, 10, 6, 12, 5, 9, 0, 7,
     0, 15, 7, 4, 14, 2, 13, 1, 10, 6, 12, 11, 9, 5, 3, 8,
     4, 1, 14, 8, 13, 6, 2, 11, 15, 12, 9, 7, 3, 10, 5, 0,
     15, 12, 8, 2, 4, 9, 1, 7, 5, 11, 3, 14, 10, 0, 6, 13),
    (15, 1, 8, 14, 6, 11, 3, 4, 9, 7, 2, 13, 12, 0, 5, 10,
     3, 13, 4, 7, 15, 2, 8, 14, 12, 0, 1, 10, 6, 9, 11, 5,
     0, 14, 7, 11, 10, 4, 13, 1, 5, 8, 12, 6, 9, 3, 2, 15,
     13, 8, 10, 1, 3, 15, 4, 2, 11, 6, 7, 12, 0, 5, 14, 9),
    (10, 0, 9, 14, 6, 3, 15, 5, 1, 13, 12, 7, 11, 4, 2, 8,
     13, 7, 0, 9, 3, 4, 6, 10, 2, 8, 5, 14, 12, 11, 15, 1,
     13, 6, 4, 9, 8, 15, 3, 0, 11, 1, 2, 12, 5, 10, 14, 7,
     1, 10, 13, 0, 6, 9, 8, 7, 4, 15, 14, 3, 11, 5, 2, 12),
    (7, 13, 14, 3, 0, 6, 9, 10, 1, 2, 8, 5, 11, 12, 4, 15,
     13, 8, 11, 5, 6, 15, 0, 3, 4, 7, 2, 12, 1, 10, 14, 9,
     10, 6, 9, 0, 12, 11, 7, 13, 15, 1, 3, 14, 5, 2, 8, 4,
     3, 15, 0, 6, 10, 1, 13, 8, 9, 4, 5, 11, 12, 7, 2, 14),
    (2, 12, 4, 1, 7, 10, 11, 6, 8, 5, 3, 15, 13, 0, 14, 9,
     14, 11, 2, 12, 4, 7, 13, 1, 5, 0, 15, 10, 3, 9, 8, 6,
     4, 2, 1, 11, 10, 13, 7, 8, 15, 9, 12, 5, 6, 3, 0, 14,
     11, 8, 12, 7, 1, 14, 2, 13, 6, 15, 0, 9, 10, 4, 5, 3),
    (12, 1, 10, 15, 9, 2, 6, 8, 0, 13, 3, 4, 14, 7, 5, 11,
     10, 15, 4, 2, 7, 12, 9, 5, 6, 1, 13, 14, 0, 11, 3, 8,
     9, 14, 15, 5, 2, 8, 12, 3, 7, 0, 4, 10, 1, 13, 11, 6,
     4, 3, 2, 12, 9, 5, 15, 10, 11, 14, 1, 7, 6, 0, 8, 13),
    (4, 11, 2, 14, 15, 0, 8, 13, 3, 12, 9, 7, 5, 10, 6, 1,
     13, 0, 11, 7, 4, 9, 1, 10, 14, 3, 5, 12, 2, 15, 8, 6,
     1, 4, 11, 13, 12, 3, 7, 14, 10, 15, 6, 8, 0, 5, 9, 2,
     6, 11, 13, 8, 1, 4, 10, 7, 9, 5, 0, 15, 14, 2, 3, 12),
    (13, 2, 8, 4, 6, 15, 11, 1, 10, 9, 3, 14, 5, 0, 12, 7,
     1, 15, 13, 8, 10, 3, 7, 4, 12, 5, 6, 11, 0, 14, 9, 2,
     7, 11, 4, 1, 9, 12, 14, 2, 0, 6, 10, 13, 15, 3, 5, 8,
     2, 1, 14, 7, 4, 10, 8, 13, 15, 12, 9, 0, 3, 5, 6, 11),
)

_TABLE_SHA256 = "cae12f5ec5516e3184e9318788df5f4d7455fface45fb15a49e3a260afef82c7"


def _verify_tables() -> None:
    blob = repr((IP, E, P, PC1, PC2, KEY_SHIFTS, SBOXES)).encode()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != _TABLE_SHA256:
        raise TableError(f"DES table checksum mismatch: {digest}")


def _permute(value: int, in_width: int, table) -> int:
    out = 0
    for pos in table:
        out = (out << 1) | ((value >> (in_width - pos)) & 1)
    return out


FP = tuple(IP.index(i) + 1 for i in range(1, 65))

# S-box lookup indexed directly by the raw 6-bit input value.
_SBOX_FLAT = tuple(
    tuple(box[(((x >> 5) & 1) * 2 + (x & 1)) * 16 + ((x >> 1) & 0xF)] for x in range(64))
    for box in SBOXES
)


@dataclass(frozen=True, slots=True)
class DesKeySchedule:
    master: BitVector
    round_keys: tuple


@dataclass(frozen=True, slots=True)
class DesState:
    left: BitVector
    right: BitVector
    rounds_applied: int

    def as_word(self) -> BitVector:
        """The 64-bit LR register content."""
        return BitVector((self.left.value << 32) | self.right.value, 64)


def des_key_schedule(master: BitVector) -> DesKeySchedule:
    """FIPS-46 key schedule; the 8 parity bits of `master` are ignored."""
    if master.width != 64:
        raise RoundError(f"master key must be 64 bits, got {master.width}")
    cd = _permute(master.value, 64, PC1)
    c, d = cd >> 28, cd & 0xFFFFFFF
    keys = []
    for shift in KEY_SHIFTS:
        c = ((c << shift) | (c >> (28 - shift))) & 0xFFFFFFF
        d = ((d << shift) | (d >> (28 - shift))) & 0xFFFFFFF
        keys.append(BitVector(_permute((c << 28) | d, 56, PC2), 48))
    return DesKeySchedule(master, tuple(keys))


def feistel_f(r32: int, k48: int) -> int:
    x = _permute(r32, 32, E) ^ k48
    out = 0
    for s in range(8):
        out = (out << 4) | _SBOX_FLAT[s][(x >> (42 - 6 * s)) & 0x3F]
    return _permute(out, 32, P)


def round_state_words(plaintext: BitVector, ks: DesKeySchedule, n: int):
    """LR register words after IP and after each of the first n rounds.

    Returns n+1 64-bit integers; element 0 is IP(plaintext).
    """
    if not 0 <= n <= 16:
        raise RoundError(f"round count must be in [0,16], got {n}")
    word = _permute(plaintext.value, 64, IP)
    left, right = word >> 32, word & 0xFFFFFFFF
    words = [word]
    for r in range(n):
        left, right = right, left ^ feistel_f(right, ks.round_keys[r].value)
        words.append((left << 32) | right)
    return words


def des_rounds(plaintext: BitVector, ks: DesKeySchedule, n: int) -> DesState:
    """IP followed by the first n Feistel rounds (n=0 gives IP alone)."""
    word = round_state_words(plaintext, ks, n)[-1]
    return DesState(BitVector(word >> 32, 32), BitVector(word & 0xFFFFFFFF, 32), n)


def register_transition(plaintext: BitVector, ks: DesKeySchedule, r: int) -> BitVector:
    """XOR of the LR register before and after round r (round 0 = IP)."""
    if not 1 <= r <= 16:
        raise RoundError(f"round index must be in [1,16], got {r}")
    words = round_state_words(plaintext, ks, r)
    return BitVector(words[r - 1] ^ words[r], 64)


def round_key_master_bits(r: int):
    """Master-key bit index (FIPS numbering) feeding each of round r's 48 key bits."""
    if not 1 <= r <= 16:
        raise RoundError(f"round index must be in [1,16], got {r}")
    shift = sum(KEY_SHIFTS[:r])
    bits = []
    for i in range(48):
        p = PC2[i]
        if p <= 28:
            src = ((p - 1 + shift) % 28) + 1
        else:
            src = 28 + ((p - 29 + shift) % 28) + 1
        bits.append(PC1[src - 1])
    return bits


def sbox_key_support(r: int, sbox_index: int):
    """The 6 master-key bits entering S-box `sbox_index` (0-based) in round r."""
    kb = round_key_master_bits(r)
    return sorted(kb[6 * sbox_index: 6 * sbox_index + 6])


def sbox_subkey(ks: DesKeySchedule, r: int, sbox_index: int) -> int:
    """Round-r key chunk (6 bits) consumed by S-box `sbox_index`."""
    return (ks.round_keys[r - 1].value >> (42 - 6 * sbox_index)) & 0x3F


def round1_sbox_supports(sbox_index: int):
    """Plaintext and master-key bits reaching round-2 state bits through one
    round-1 S-box path: the E-window sources plus the L/R sources of the four
    state positions the S-box feeds. Returns (pi_support, kappa_support)."""
    kappa = sbox_key_support(1, sbox_index)
    e_window = [E[6 * sbox_index + t] for t in range(6)]
    e_src = [IP[32 + r0 - 1] for r0 in e_window]
    out_pos = [P.index(4 * sbox_index + t + 1) + 1 for t in range(4)]
    l_src = [IP[j - 1] for j in out_pos]
    r_src = [IP[32 + j - 1] for j in out_pos]
    return sorted(set(e_src) | set(l_src) | set(r_src)), kappa


def encrypt(plaintext: BitVector, ks: DesKeySchedule) -> BitVector:
    """Full 16-round DES encryption, including final swap and FP."""
    word = round_state_words(plaintext, ks, 16)[-1]
    swapped = ((word & 0xFFFFFFFF) << 32) | (word >> 32)
    return BitVector(_permute(swapped, 64, FP), 64)


def decrypt(ciphertext: BitVector, ks: DesKeySchedule) -> BitVector:
    reversed_ks = DesKeySchedule(ks.master, tuple(reversed(ks.round_keys)))
    return encrypt(ciphertext, reversed_ks)


_verify_tables()
