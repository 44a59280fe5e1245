"""Linear approximations of register intermediates and their Hamming weights.

A relation predicts the key parity <K,kappa> as
<P,Pi> xor <H(C(P,K)),Gamma_H> xor b, holding with probability 1/2 + bias.
Biases are stored positive; the orientation is folded into b.

Corpus files are UTF-8 text, one relation per line:

    gamma_h=0x10 bias=0.0219 eq=0+P[5]+P[26]+K[6]+K[7]

with `#` comments and blank lines allowed. Indices are 1-based big-endian
(FIPS numbering) over the raw plaintext and the 64-bit master key.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .bits import BitVector, bit_at, bit_indices, from_bit_indices, inner_product
from .errors import BudgetError, DataError, ParseError, SupportError
from .leakage import RegisterTarget, power_to_hw_bits
from .seeding import derive_rng, random_word


@dataclass(frozen=True, slots=True)
class LinearApproximation:
    pi: BitVector
    gamma_h: BitVector
    kappa: BitVector
    b: int
    bias: float
    rounds: int = 2
    register: int = 2

    def __post_init__(self):
        if not 0.0 < self.bias <= 0.5:
            raise ValueError(f"bias must lie in (0, 0.5], got {self.bias}")
        if self.kappa.value == 0:
            raise ValueError("key-independent relation rejected (kappa = 0)")
        if self.b not in (0, 1):
            raise ValueError(f"b must be 0 or 1, got {self.b}")


def evaluate_parity(a: LinearApproximation, plaintext: BitVector, hw_value: int) -> int:
    """Predicted <K,kappa> from a plaintext and the register Hamming weight."""
    hw = BitVector(hw_value, a.gamma_h.width)
    return inner_product(plaintext, a.pi) ^ inner_product(hw, a.gamma_h) ^ a.b


def parity_from_hw_bit(a: LinearApproximation, plaintext: BitVector, hw_bit: int) -> int:
    """Predicted <K,kappa> when <H,Gamma_H> is already known as a single bit."""
    return inner_product(plaintext, a.pi) ^ hw_bit ^ a.b


_FIELD_RE = re.compile(r"(\w+)\s*=\s*")
_TERM_RE = re.compile(r"\+\s*([PK])\[(\d+)\]\s*")


def parse_approximation(line: str, rounds: int = 2, register: int | None = None,
                        register_width: int = 64, line_number: int | None = None
                        ) -> LinearApproximation:
    """Parse one corpus line; raises ParseError with position on bad input."""

    def fail(msg, col=None):
        raise ParseError(msg, line=line_number, column=col)

    fields = {}
    for m in _FIELD_RE.finditer(line):
        name, start = m.group(1), m.end()
        if name == "eq":
            fields["eq"] = (line[start:], start)
            break
        nxt = line.find(" ", start)
        fields[name] = (line[start:nxt if nxt != -1 else len(line)], start)
    for req in ("gamma_h", "bias", "eq"):
        if req not in fields:
            fail(f"missing field {req!r}")

    gtext, gcol = fields["gamma_h"]
    try:
        gamma_value = int(gtext, 16)
    except ValueError:
        fail(f"bad gamma_h {gtext!r}", gcol)
    gamma_width = register_width.bit_length()
    if gamma_value >= 1 << gamma_width:
        fail(f"gamma_h {gtext} does not fit a {gamma_width}-bit weight", gcol)

    btext, bcol = fields["bias"]
    try:
        bias = float(btext)
    except ValueError:
        fail(f"bad bias {btext!r}", bcol)
    if not 0.0 < bias <= 0.5:
        fail(f"bias must lie in (0, 0.5], got {btext}", bcol)

    body, ecol = fields["eq"]
    stripped = body.strip()
    if not stripped or stripped[0] not in "01":
        fail("equation must start with constant 0 or 1", ecol)
    b = int(stripped[0])
    pos = 1
    p_idx, k_idx = [], []
    seen_k = False
    while pos < len(stripped):
        if stripped[pos].isspace():
            pos += 1
            continue
        m = _TERM_RE.match(stripped, pos)
        if not m:
            fail(f"malformed term at {stripped[pos:pos+8]!r}", ecol + pos)
        kind, idx = m.group(1), int(m.group(2))
        if not 1 <= idx <= 64:
            fail(f"index {idx} out of range", ecol + pos)
        if kind == "P":
            if seen_k:
                fail("plaintext term after key terms", ecol + pos)
            if idx in p_idx:
                fail(f"duplicate index P[{idx}]", ecol + pos)
            p_idx.append(idx)
        else:
            seen_k = True
            if idx in k_idx:
                fail(f"duplicate index K[{idx}]", ecol + pos)
            k_idx.append(idx)
        pos = m.end()

    try:
        return LinearApproximation(
            pi=from_bit_indices(p_idx, 64),
            gamma_h=BitVector(gamma_value, gamma_width),
            kappa=from_bit_indices(k_idx, 64),
            b=b,
            bias=bias,
            rounds=rounds,
            register=register if register is not None else rounds,
        )
    except ValueError as e:
        fail(str(e))


def serialize_approximation(a: LinearApproximation) -> str:
    terms = "".join(f"+P[{i}]" for i in bit_indices(a.pi))
    terms += "".join(f"+K[{i}]" for i in bit_indices(a.kappa))
    return f"gamma_h=0x{a.gamma_h.value:02x} bias={a.bias!r} eq={a.b}{terms}"


def load_corpus(path, rounds: int = 2, register: int | None = None,
                register_width: int = 64):
    approxs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            approxs.append(parse_approximation(line, rounds=rounds, register=register,
                                               register_width=register_width,
                                               line_number=lineno))
    return approxs


def save_corpus(approxs, path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for ln in header.splitlines():
                fh.write(f"# {ln}\n")
        for a in approxs:
            fh.write(serialize_approximation(a) + "\n")


def reference_corpus_path() -> str:
    """Bundled 20-relation reference corpus for the DES round-2 HD register."""
    return str(resources.files("mlpa.data").joinpath("des_hd_r2_reference.txt"))


def searched_corpus_path() -> str:
    """Bundled model-derived corpus for the DES round-2 HD register."""
    return str(resources.files("mlpa.data").joinpath("des_hd_r2_searched.txt"))


def _gf2_rank(vectors) -> int:
    basis = []
    for v in vectors:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


@dataclass(frozen=True, slots=True)
class ApproximationSet:
    items: tuple
    key_support: tuple
    k: int
    rank: int
    budget_exhausted: bool = False

    @classmethod
    def from_items(cls, items, budget_exhausted: bool = False) -> "ApproximationSet":
        items = tuple(items)
        if not items:
            raise DataError("approximation set is empty")
        support = sorted({i for a in items for i in bit_indices(a.kappa)})
        restricted = [cls._restrict(a.kappa, support) for a in items]
        return cls(items, tuple(support), len(support),
                   _gf2_rank(restricted), budget_exhausted)

    @staticmethod
    def _restrict(kappa: BitVector, support) -> int:
        x = 0
        for t, bitpos in enumerate(support):
            x |= bit_at(kappa, bitpos) << t
        return x

    def kappa_index(self, a: LinearApproximation) -> int:
        """kappa restricted to the key support, as a codeword position."""
        idx = self._restrict(a.kappa, self.key_support)
        full = from_bit_indices(self.key_support, a.kappa.width)
        if (a.kappa.value & ~full.value) != 0:
            raise SupportError("kappa has bits outside the set's key support")
        return idx

    def restricted_key(self, key: BitVector) -> int:
        """The true key bits on the support, in codeword-position order."""
        return self._restrict(key, self.key_support)


def data_complexity(a: LinearApproximation) -> float:
    """Single-relation trace estimate 1/bias^2."""
    return 1.0 / (a.bias * a.bias)


def multi_data_complexity(s: ApproximationSet) -> float:
    """Joint estimate 1/sum(bias^2); never above the best single relation."""
    return 1.0 / sum(a.bias * a.bias for a in s.items)


def _sample_inputs(target: RegisterTarget, n: int, rng):
    pts = np.empty(n, dtype=np.uint64)
    kys = np.empty(n, dtype=np.uint64)
    hws = np.empty(n, dtype=np.uint8)
    for i in range(n):
        p = BitVector(random_word(rng, target.plaintext_width), target.plaintext_width)
        k = BitVector(random_word(rng, target.key_width), target.key_width)
        pts[i] = p.value
        kys[i] = k.value
        hws[i] = target.value(p, k).hamming_weight
    return pts, kys, hws


def _parity_of(words: np.ndarray, mask: int) -> np.ndarray:
    return (np.bitwise_count(words & np.uint64(mask)) & np.uint64(1)).astype(np.int8)


def estimate_bias_exhaustive(a: LinearApproximation, target: RegisterTarget,
                             key_space, plaintext_space) -> float:
    """Exact signed bias over explicit (P,K) spaces; guarded at 2^26 pairs."""
    total = len(key_space) * len(plaintext_space)
    if total > 1 << 26:
        raise BudgetError(f"{total} pairs exceed the exhaustive budget of 2^26")
    agree = 0
    for k in key_space:
        actual = inner_product(k, a.kappa)
        for p in plaintext_space:
            hw = target.value(p, k).hamming_weight
            agree += evaluate_parity(a, p, hw) == actual
    return agree / total - 0.5


def estimate_bias_monte_carlo(a: LinearApproximation, target: RegisterTarget,
                              n_samples: int, seed: int):
    """Sampled signed bias and its binomial standard error."""
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    rng = derive_rng(seed, "bias-mc")
    pts, kys, hws = _sample_inputs(target, n_samples, rng)
    h_bits = _parity_of(hws.astype(np.uint64), a.gamma_h.value)
    pred = _parity_of(pts, a.pi.value) ^ h_bits ^ np.int8(a.b)
    actual = _parity_of(kys, a.kappa.value)
    p_hat = float(np.mean(pred == actual))
    std_err = float(np.sqrt(max(p_hat * (1 - p_hat), 1e-12) / n_samples))
    return p_hat - 0.5, std_err


def estimate_bias_from_traces(a: LinearApproximation, campaign, sample_index: int,
                              assumed_key: BitVector | None = None) -> float:
    """Signed bias of the relation as realized through the measured channel.

    Twin-device calibration: the campaign key (or an assumed one) must be
    known; the Hamming-weight bit comes from the threshold trick.
    """
    key = assumed_key if assumed_key is not None else campaign.key
    if key is None:
        raise DataError("trace calibration needs a known campaign key")
    if not 0 <= sample_index < campaign.n_samples:
        raise IndexError(f"sample index {sample_index} out of range")
    mean = campaign.sample_mean(sample_index)
    col = campaign.samples[:, sample_index]
    above = col > mean
    if a.gamma_h.value == 0x20:
        hw_bits = above.astype(np.int8)
    elif a.gamma_h.value == 0x10:
        hw_bits = (~above).astype(np.int8)
    else:
        # fall back to the scalar rule so unsupported masks raise MaskError
        power_to_hw_bits(float(col[0]), mean, a.gamma_h)
        raise AssertionError("unreachable")
    pred = _parity_of(campaign.plaintext_words, a.pi.value) ^ hw_bits ^ np.int8(a.b)
    actual = inner_product(key, a.kappa)
    return float(np.mean(pred == actual)) - 0.5


def _masks_by_weight(support, max_weight: int):
    """All masks over `support` (bit t = support[t]) of weight <= max_weight."""
    return [m for m in range(1 << len(support)) if m.bit_count() <= max_weight]


def _mask_to_indices(mask: int, support) -> list:
    return [support[t] for t in range(len(support)) if (mask >> t) & 1]


_FAST_PATH_BITS = 22


def search_approximations(target: RegisterTarget, rounds: int, register: int,
                          gamma_h_list, max_pi_weight: int, max_kappa_weight: int,
                          min_bias: float, budget: int, *,
                          pi_support=None, kappa_support=None,
                          n_samples: int = 1 << 16, seed: int = 0) -> ApproximationSet:
    """Bounded-weight mask enumeration with Monte-Carlo bias estimation.

    Enumerates Pi over pi_support (weight <= max_pi_weight, empty allowed) and
    kappa over kappa_support (weight 1..max_kappa_weight), keeping candidates
    whose estimated |bias| >= min_bias with the sign folded into b. `budget`
    caps the number of candidates examined; exceeding it yields a partial
    result with budget_exhausted set. When the joint support is small the
    whole spectrum is evaluated on one shared sample set; otherwise each
    candidate is estimated sequentially with early rejection. Deterministic
    given `seed`.
    """
    pi_support = sorted(pi_support) if pi_support is not None \
        else list(range(1, target.plaintext_width + 1))
    kappa_support = sorted(kappa_support) if kappa_support is not None \
        else list(range(1, target.key_width + 1))
    nv = len(pi_support) + len(kappa_support)

    rng = derive_rng(seed, "search")
    pts, kys, hws = _sample_inputs(target, n_samples, rng)

    pi_planes = np.zeros(n_samples, dtype=np.int64)
    for t, j in enumerate(pi_support):
        bit = ((pts >> np.uint64(target.plaintext_width - j)) & np.uint64(1)).astype(np.int64)
        pi_planes |= bit << t
    k_planes = np.zeros(n_samples, dtype=np.int64)
    for t, j in enumerate(kappa_support):
        bit = ((kys >> np.uint64(target.key_width - j)) & np.uint64(1)).astype(np.int64)
        k_planes |= bit << t
    pattern = pi_planes | (k_planes << len(pi_support))

    gamma_width = target.gamma_width
    pi_masks = _masks_by_weight(pi_support, max_pi_weight)
    kappa_masks = [m for m in _masks_by_weight(kappa_support, max_kappa_weight) if m]

    use_fast = nv <= _FAST_PATH_BITS
    found = []
    examined = 0
    exhausted = False
    for gamma_value in gamma_h_list:
        g_bits = (np.bitwise_count((hws & np.uint8(gamma_value)).astype(np.uint64))
                  & np.uint64(1)).astype(np.int64)
        spec = None
        if use_fast:
            v = np.zeros(1 << nv, dtype=np.float64)
            np.add.at(v, pattern, 1.0 - 2.0 * g_bits)
            spec = _fwht_f64(v) / n_samples
        signs = 1.0 - 2.0 * g_bits
        for km in kappa_masks:
            for pm in pi_masks:
                if examined >= budget:
                    exhausted = True
                    break
                examined += 1
                cand = pm | (km << len(pi_support))
                if use_fast:
                    est = float(spec[cand]) / 2.0
                else:
                    est = _sequential_estimate(pattern, cand, signs, min_bias)
                if est is None or abs(est) < min_bias:
                    continue
                found.append(LinearApproximation(
                    pi=from_bit_indices(_mask_to_indices(pm, pi_support),
                                        target.plaintext_width),
                    gamma_h=BitVector(gamma_value, gamma_width),
                    kappa=from_bit_indices(_mask_to_indices(km, kappa_support),
                                           target.key_width),
                    b=0 if est > 0 else 1,
                    bias=abs(est),
                    rounds=rounds,
                    register=register,
                ))
            if exhausted:
                break
        if exhausted:
            break

    if not found:
        return ApproximationSet((), (), 0, 0, exhausted)
    return ApproximationSet.from_items(found, budget_exhausted=exhausted)


def _sequential_estimate(pattern, cand, signs, min_bias):
    """Two-stage MC estimate; None when stage 1 rejects the candidate."""
    n = len(pattern)
    n1 = min(4096, n)
    par1 = (np.bitwise_count(np.uint64(cand) & pattern[:n1].astype(np.uint64))
            & np.uint64(1)).astype(np.float64)
    est1 = float(np.mean(signs[:n1] * (1.0 - 2.0 * par1))) / 2.0
    se1 = 0.5 / np.sqrt(n1)
    if abs(est1) + 3.0 * se1 < min_bias:
        return None
    if n == n1:
        return est1
    par = (np.bitwise_count(np.uint64(cand) & pattern.astype(np.uint64))
           & np.uint64(1)).astype(np.float64)
    return float(np.mean(signs * (1.0 - 2.0 * par))) / 2.0


def _fwht_f64(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    h = 1
    n = len(a)
    while h < n:
        a = a.reshape(-1, 2, h)
        x = a[:, 0, :].copy()
        y = a[:, 1, :].copy()
        a[:, 0, :] = x + y
        a[:, 1, :] = x - y
        a = a.reshape(n)
        h *= 2
    return a
