"""Power-trace simulation under HW/HD leakage with configurable register placement.

A device is a cipher plus a list of rounds after which the state register is
loaded; a glued block of g rounds is expressed by starting register_rounds at
g, so no earlier intermediate ever touches a register. The leakage coefficient
is fixed at 1.0 sample units per bit; attacks must only rely on relative
values, which the acceptance suite enforces with random affine distortions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import aes, des
from .bits import BitVector
from .errors import ConfigError, DataError, MaskError, ModelError
from .seeding import derive_rng, random_word

CIPHER_DES = "des"
CIPHER_AES_LAST = "aes-last-round"
CIPHER_IDS = {CIPHER_DES: 1, CIPHER_AES_LAST: 2}
LEAKAGE_IDS = {"HW": 1, "HD": 2}


@dataclass(frozen=True, slots=True)
class DeviceConfig:
    cipher: str = CIPHER_DES
    register_rounds: tuple = (1,)
    leakage: str = "HW"
    noise_sigma: float = 0.0
    samples_per_load: int = 1
    seed: int = 0
    reset_state: int | None = None  # fixed HD reference before the first load

    def __post_init__(self):
        if self.cipher not in CIPHER_IDS:
            raise ConfigError(f"cipher: unknown value {self.cipher!r}")
        rr = tuple(self.register_rounds)
        object.__setattr__(self, "register_rounds", rr)
        if not rr:
            raise ConfigError("register_rounds: must be non-empty")
        if any(rr[i] >= rr[i + 1] for i in range(len(rr) - 1)):
            raise ConfigError("register_rounds: must be strictly increasing")
        if self.cipher == CIPHER_DES and not (1 <= rr[0] and rr[-1] <= 16):
            raise ConfigError("register_rounds: DES rounds must lie in [1,16]")
        if self.cipher == CIPHER_AES_LAST and rr != (1,):
            raise ConfigError("register_rounds: AES last-round model has a single load")
        if self.leakage not in LEAKAGE_IDS:
            raise ConfigError(f"leakage: unknown model {self.leakage!r}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma: must be >= 0")
        if self.samples_per_load < 1:
            raise ConfigError("samples_per_load: must be >= 1")

    @property
    def plaintext_width(self) -> int:
        return 64 if self.cipher == CIPHER_DES else 8

    @property
    def register_width(self) -> int:
        return 64 if self.cipher == CIPHER_DES else 8

    @property
    def samples_per_trace(self) -> int:
        return self.samples_per_load * len(self.register_rounds)

    @property
    def sample_map(self) -> dict:
        return {r: i * self.samples_per_load for i, r in enumerate(self.register_rounds)}


@dataclass(frozen=True, slots=True)
class Trace:
    samples: np.ndarray
    plaintext: BitVector
    ciphertext: BitVector | None
    sample_map: dict


@dataclass(slots=True)
class Campaign:
    """Traces acquired under one key and one device configuration.

    Sample data lives in a (n_traces, samples_per_trace) float32 matrix;
    Trace views are materialized on demand.
    """

    config: DeviceConfig | None
    key: BitVector | None
    samples: np.ndarray
    plaintext_words: np.ndarray           # uint64
    ciphertext_words: np.ndarray | None   # uint64
    sample_map: dict = field(default_factory=dict)
    cipher: str | None = None
    leakage: str | None = None

    def __post_init__(self):
        if self.config is not None:
            self.cipher = self.config.cipher
            self.leakage = self.config.leakage
            if not self.sample_map:
                self.sample_map = self.config.sample_map

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def plaintext_width(self) -> int:
        return 8 if self.cipher == CIPHER_AES_LAST else 64

    def plaintexts(self):
        w = self.plaintext_width
        return [BitVector(int(p), w) for p in self.plaintext_words]

    @property
    def traces(self):
        ct_w = 8 if self.cipher == CIPHER_AES_LAST else 64
        out = []
        for i in range(len(self)):
            ct = None
            if self.ciphertext_words is not None:
                ct = BitVector(int(self.ciphertext_words[i]), ct_w)
            out.append(Trace(self.samples[i], BitVector(int(self.plaintext_words[i]),
                                                        self.plaintext_width), ct, self.sample_map))
        return out

    def sample_mean(self, sample_index: int) -> float:
        if len(self) == 0:
            raise DataError("campaign is empty")
        if not 0 <= sample_index < self.n_samples:
            raise IndexError(f"sample index {sample_index} out of range")
        return float(self.samples[:, sample_index].mean())

    def prefix(self, n: int) -> "Campaign":
        """First n traces as a campaign; cheap view used by sweeps."""
        ct = None if self.ciphertext_words is None else self.ciphertext_words[:n]
        return Campaign(self.config, self.key, self.samples[:n],
                        self.plaintext_words[:n], ct, dict(self.sample_map),
                        self.cipher, self.leakage)

    def affine_transformed(self, a: float, b: float) -> "Campaign":
        """Per-campaign affine distortion a*samples + b, a > 0."""
        if a <= 0:
            raise ValueError("affine scale must be positive")
        s = (self.samples.astype(np.float64) * a + b).astype(np.float32)
        return Campaign(self.config, self.key, s, self.plaintext_words,
                        self.ciphertext_words, dict(self.sample_map),
                        self.cipher, self.leakage)


def _register_words(config: DeviceConfig, key: BitVector, plaintext: BitVector):
    """State words at each register load, plus the HD reference chain start."""
    if config.cipher == CIPHER_DES:
        ks = des.des_key_schedule(key)
        words = des.round_state_words(plaintext, ks, config.register_rounds[-1])
        loads = [words[r] for r in config.register_rounds]
        first_ref = words[0]  # IP(plaintext)
        ct = None
    else:
        x = plaintext.value
        loads = [x]
        first_ref = None
        ct = BitVector(aes.SBOX[x] ^ (key.value & 0xFF), 8)
    return loads, first_ref, ct


def simulate_trace(config: DeviceConfig, key: BitVector, plaintext: BitVector,
                   previous_register_state: int | None = None,
                   trace_index: int = 0) -> Trace:
    """One simulated trace; deterministic given (config.seed, trace_index)."""
    if plaintext.width != config.plaintext_width:
        raise ModelError(f"plaintext width {plaintext.width} does not match cipher")
    loads, first_ref, ct = _register_words(config, key, plaintext)
    if config.leakage == "HD":
        if previous_register_state is not None:
            ref = previous_register_state
        elif config.reset_state is not None:
            ref = config.reset_state
        elif first_ref is not None:
            ref = first_ref
        else:
            raise ModelError("HD model has no reference state for the first register load")
        values = []
        for w in loads:
            values.append((ref ^ w).bit_count())
            ref = w
    else:
        values = [w.bit_count() for w in loads]

    spl = config.samples_per_load
    samples = np.zeros(spl * len(loads), dtype=np.float64)
    samples[::spl] = values
    if config.noise_sigma > 0:
        rng = derive_rng(config.seed, "trace", trace_index)
        samples += rng.normal(0.0, config.noise_sigma, samples.shape)
    return Trace(samples.astype(np.float32), plaintext, ct, config.sample_map)


def simulate_campaign(config: DeviceConfig, key: BitVector, n: int,
                      plaintext_source="uniform") -> Campaign:
    """n traces under one key; plaintexts uniform or from an explicit list."""
    if n < 1:
        raise DataError("campaign size must be >= 1")
    if isinstance(plaintext_source, str):
        if plaintext_source != "uniform":
            raise ConfigError(f"plaintext_source: unknown source {plaintext_source!r}")
        pts = []
        for i in range(n):
            rng = derive_rng(config.seed, "plaintext", i)
            pts.append(BitVector(random_word(rng, config.plaintext_width),
                                 config.plaintext_width))
    else:
        pts = [p if isinstance(p, BitVector) else BitVector(int(p), config.plaintext_width)
               for p in plaintext_source]
        if len(pts) < n:
            raise DataError(f"fixed list has {len(pts)} plaintexts, need {n}")
        pts = pts[:n]

    samples = np.empty((n, config.samples_per_trace), dtype=np.float32)
    pwords = np.empty(n, dtype=np.uint64)
    cwords = np.empty(n, dtype=np.uint64) if config.cipher == CIPHER_AES_LAST else None
    for i in range(n):
        tr = simulate_trace(config, key, pts[i], trace_index=i)
        samples[i] = tr.samples
        pwords[i] = pts[i].value
        if cwords is not None:
            cwords[i] = tr.ciphertext.value
    return Campaign(config, key, samples, pwords, cwords)


def power_to_hw_bits(sample: float, campaign_mean: float, gamma_h: BitVector) -> int:
    """Threshold decoding of the 0x10/0x20 Hamming-weight mask bits.

    Samples above the campaign mean are taken to have the 0x20 bit set and
    the 0x10 bit clear, and conversely at or below the mean; valid when the
    register weight stays within [16, 48).
    """
    if gamma_h.value == 0x20:
        return 1 if sample > campaign_mean else 0
    if gamma_h.value == 0x10:
        return 0 if sample > campaign_mean else 1
    raise MaskError(f"threshold trick supports gamma_h 0x10/0x20, got {gamma_h}")


def with_seed(config: DeviceConfig, seed: int) -> DeviceConfig:
    return replace(config, seed=seed)


@dataclass(frozen=True, slots=True)
class RegisterTarget:
    """A register-valued intermediate C(P,K), the quantity whose Hamming
    weight the device leaks."""

    plaintext_width: int
    key_width: int
    register_width: int
    fn: object  # callable (BitVector, BitVector) -> BitVector

    @property
    def gamma_width(self) -> int:
        return self.register_width.bit_length()

    def value(self, plaintext: BitVector, key: BitVector) -> BitVector:
        return self.fn(plaintext, key)


def register_target(cipher: str, rounds: int, leakage: str) -> RegisterTarget:
    """Target for the register load after `rounds` under the given model."""
    if cipher == CIPHER_DES:
        if leakage == "HW":
            def fn(p, k, _r=rounds):
                return des.des_rounds(p, des.des_key_schedule(k), _r).as_word()
        else:
            def fn(p, k, _r=rounds):
                return des.register_transition(p, des.des_key_schedule(k), _r)
        return RegisterTarget(64, 64, 64, fn)
    if cipher == CIPHER_AES_LAST:
        if leakage != "HW":
            raise ModelError("AES last-round target is defined for the HW model")
        return RegisterTarget(8, 8, 8, lambda p, k: p)
    raise ConfigError(f"cipher: unknown value {cipher!r}")


def sbox_target(sbox_index: int) -> RegisterTarget:
    """Single DES S-box as a 6-bit-key micro-cipher; register is its 4-bit output."""
    table = des._SBOX_FLAT[sbox_index]
    return RegisterTarget(6, 6, 4,
                          lambda p, k, _t=table: BitVector(_t[p.value ^ k.value], 4))
