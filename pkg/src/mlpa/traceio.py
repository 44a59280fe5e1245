"""Campaign persistence: the MLPATRC1 binary format, CSV import, and
register-sample location.

MLPATRC1 layout (little-endian):
    magic     8 bytes  "MLPATRC1"
    version   u16      currently 1
    n_traces  u32
    samples   u32      samples per trace
    sample_t  u8       0 = float32
    cipher_id u8       1 = des, 2 = aes-last-round, 0 = unknown
    leakage_id u8      1 = HW, 2 = HD, 0 = unknown
    flags     u16      bit 0: ciphertexts present
    key_present u8
then per trace: plaintext u64, ciphertext u64 (0 if absent), samples f32[];
then, iff key_present, the key as one u64. Samples are stored exactly as
float32, never re-rounded.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .bits import BitVector
from .errors import DataError, FormatError, ParseError
from .leakage import CIPHER_IDS, LEAKAGE_IDS, Campaign

MAGIC = b"MLPATRC1"
VERSION = 1
_HEADER = struct.Struct("<8sHIIBBBHB")

_CIPHER_NAMES = {v: k for k, v in CIPHER_IDS.items()}
_LEAKAGE_NAMES = {v: k for k, v in LEAKAGE_IDS.items()}


def write_campaign(campaign: Campaign, path, include_key: bool = False) -> None:
    n = len(campaign)
    spt = campaign.n_samples if n else (campaign.samples.shape[1]
                                        if campaign.samples.ndim == 2 else 0)
    flags = 1 if campaign.ciphertext_words is not None else 0
    key_present = 1 if (include_key and campaign.key is not None) else 0
    header = _HEADER.pack(MAGIC, VERSION, n, spt, 0,
                          CIPHER_IDS.get(campaign.cipher, 0),
                          LEAKAGE_IDS.get(campaign.leakage, 0),
                          flags, key_present)
    samples = np.ascontiguousarray(campaign.samples, dtype="<f4")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for i in range(n):
                fh.write(struct.pack("<Q", int(campaign.plaintext_words[i])))
                ct = 0 if campaign.ciphertext_words is None \
                    else int(campaign.ciphertext_words[i])
                fh.write(struct.pack("<Q", ct))
                fh.write(samples[i].tobytes())
            if key_present:
                fh.write(struct.pack("<Q", campaign.key.value))
    except OSError as e:
        raise FormatError(f"cannot write campaign to {path}: {e}") from e


def read_campaign(path) -> Campaign:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise FormatError(f"cannot read campaign from {path}: {e}") from e
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the header")
    magic, version, n, spt, sample_t, cipher_id, leakage_id, flags, key_present = \
        _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if sample_t != 0:
        raise FormatError(f"{path}: unsupported sample type {sample_t}")
    record = 16 + 4 * spt
    expected = _HEADER.size + n * record + (8 if key_present else 0)
    if len(blob) != expected:
        raise FormatError(f"{path}: payload length {len(blob)} != expected {expected}")

    pwords = np.empty(n, dtype=np.uint64)
    cwords = np.empty(n, dtype=np.uint64) if flags & 1 else None
    samples = np.empty((n, spt), dtype=np.float32)
    off = _HEADER.size
    for i in range(n):
        p, c = struct.unpack_from("<QQ", blob, off)
        pwords[i] = p
        if cwords is not None:
            cwords[i] = c
        samples[i] = np.frombuffer(blob, dtype="<f4", count=spt, offset=off + 16)
        off += record
    key = None
    if key_present:
        key = BitVector(struct.unpack_from("<Q", blob, off)[0], 64)
    return Campaign(config=None, key=key, samples=samples, plaintext_words=pwords,
                    ciphertext_words=cwords,
                    cipher=_CIPHER_NAMES.get(cipher_id),
                    leakage=_LEAKAGE_NAMES.get(leakage_id))


@dataclass(frozen=True, slots=True)
class CsvColumns:
    plaintext: str
    samples: tuple
    ciphertext: str | None = None


def import_csv(path, columns: CsvColumns) -> Campaign:
    """External traces from CSV; plaintexts are hex, samples are floats.

    The campaign comes back keyless with an empty sample map; register
    sample indices are located afterwards.
    """
    pwords, cwords, rows = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: missing header row")
        missing = [c for c in (columns.plaintext, *columns.samples) if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}")
        for rownum, row in enumerate(reader, start=1):
            if any(row.get(c) in (None, "") for c in (columns.plaintext, *columns.samples)):
                raise ParseError("row width mismatch", line=rownum)
            try:
                pwords.append(int(row[columns.plaintext], 16))
            except ValueError:
                raise ParseError(f"bad plaintext {row[columns.plaintext]!r}", line=rownum)
            if columns.ciphertext is not None:
                try:
                    cwords.append(int(row[columns.ciphertext], 16))
                except ValueError:
                    raise ParseError(f"bad ciphertext {row[columns.ciphertext]!r}", line=rownum)
            try:
                rows.append([float(row[c]) for c in columns.samples])
            except ValueError:
                raise ParseError("non-numeric sample", line=rownum)
    n = len(rows)
    samples = np.array(rows, dtype=np.float32) if n else \
        np.empty((0, len(columns.samples)), dtype=np.float32)
    return Campaign(config=None, key=None, samples=samples,
                    plaintext_words=np.array(pwords, dtype=np.uint64),
                    ciphertext_words=np.array(cwords, dtype=np.uint64)
                    if columns.ciphertext is not None else None)


@dataclass(frozen=True, slots=True)
class Given:
    index: int


@dataclass(frozen=True, slots=True)
class MaxVariance:
    pass


@dataclass(frozen=True, slots=True)
class DpaScan:
    """Locate the register sample by running a DPA with a known-good guess."""
    selection: object
    guess: int


def locate_register_sample(campaign: Campaign, known_key=None, strategy=MaxVariance()) -> int:
    """Sample index of the targeted register load; ties pick the lowest index."""
    if len(campaign) == 0:
        raise DataError("campaign is empty")
    if isinstance(strategy, Given):
        if not 0 <= strategy.index < campaign.n_samples:
            raise IndexError(f"sample index {strategy.index} out of range")
        return strategy.index
    if isinstance(strategy, MaxVariance):
        var = campaign.samples.astype(np.float64).var(axis=0)
        return int(np.argmax(var))
    if isinstance(strategy, DpaScan):
        from .dpa import differential_trace
        d = differential_trace(campaign, strategy.selection, strategy.guess)
        return int(np.argmax(np.abs(d.values)))
    raise ValueError(f"unknown strategy {strategy!r}")
