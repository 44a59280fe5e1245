"""Classic single-bit DPA, Pearson CPA, and probabilistic-selection DPA.

Selection functions classify each trace into S_0/S_1 from the plaintext and
a subkey guess; the differential trace is mean(S_1) - mean(S_0) per sample.
The textbook form with a common numerator is not used: the balanced mean
difference matches the method's intent and cancels constant offsets, which
keeps every statistic here invariant under positive affine distortion of
the samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import des
from .approx import LinearApproximation
from .bits import BitVector
from .errors import DataError, DegenerateModelError
from .seeding import splitmix64


@dataclass(frozen=True, slots=True)
class SelectionFunction:
    """Predicts one intermediate bit from (plaintext, subkey guess).

    `prepare` digests a campaign's plaintext words once; `classify` then
    yields the 0/1 selection bits for one guess over all traces.
    """

    kind: str                      # "deterministic" | "probabilistic"
    subkey_space: tuple
    bias: float                    # 1/2 for deterministic selections
    prepare: object                # callable (uint64 array) -> ctx
    classify: object               # callable (ctx, guess) -> uint8 array
    target_bit: tuple | None = None
    relation: LinearApproximation | None = None

    def predict(self, plaintext: BitVector, guess: int) -> int:
        ctx = self.prepare(np.array([plaintext.value], dtype=np.uint64))
        return int(self.classify(ctx, guess)[0])


def des_round1_sbox_bit(sbox_index: int, output_bit: int) -> SelectionFunction:
    """Deterministic selection: one round-1 state bit written by an S-box.

    `output_bit` is the S-box output bit (0..3, MSB first); the predicted
    register bit is that output XORed onto the matching half of IP(X).
    """
    table = np.array(des._SBOX_FLAT[sbox_index], dtype=np.uint8)
    bit = (table >> (3 - output_bit)) & 1
    j = des.P.index(4 * sbox_index + output_bit + 1) + 1  # state position in R1
    shift = 6 * (7 - sbox_index)

    def prepare(plaintext_words):
        n = len(plaintext_words)
        chunk = np.empty(n, dtype=np.uint8)
        l0 = np.empty(n, dtype=np.uint8)
        for i in range(n):
            w0 = des._permute(int(plaintext_words[i]), 64, des.IP)
            left, right = w0 >> 32, w0 & 0xFFFFFFFF
            chunk[i] = (des._permute(right, 32, des.E) >> shift) & 0x3F
            l0[i] = (left >> (32 - j)) & 1
        return chunk, l0

    def classify(ctx, guess):
        chunk, l0 = ctx
        return bit[chunk ^ np.uint8(guess)] ^ l0

    return SelectionFunction("deterministic", tuple(range(64)), 0.5,
                             prepare, classify, target_bit=(sbox_index, output_bit))


def relation_selection(a: LinearApproximation, key_support) -> SelectionFunction:
    """Probabilistic selection from a linear relation (right with prob 1/2+bias).

    Guesses enumerate the key bits on `key_support`; the predicted bit is
    <P,Pi> xor <guess,kappa|support> xor b, an estimate of <H(C),Gamma_H>.
    """
    support = sorted(key_support)
    kappa_restricted = 0
    for t, pos in enumerate(support):
        if (a.kappa.value >> (64 - pos)) & 1:
            kappa_restricted |= 1 << t
    pi = np.uint64(a.pi.value)

    def prepare(plaintext_words):
        return ((np.bitwise_count(plaintext_words & pi) & np.uint64(1))
                .astype(np.uint8) ^ np.uint8(a.b))

    def classify(ctx, guess):
        kb = (guess & kappa_restricted).bit_count() & 1
        return ctx ^ np.uint8(kb)

    return SelectionFunction("probabilistic", tuple(range(1 << len(support))),
                             a.bias, prepare, classify, relation=a)


def noisy_selection(base: SelectionFunction, epsilon: float, seed: int) -> SelectionFunction:
    """Wrap a selection so it is right with probability exactly 1/2 + epsilon.

    The flip decision is a deterministic per-plaintext coin, so the wrapper
    is still a function of the plaintext.
    """
    if not 0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 0.5]")
    flip_p = 0.5 - epsilon

    def prepare(plaintext_words):
        flips = np.fromiter(
            (splitmix64(int(p) ^ (seed * 0x9E3779B9)) / 2.0**64 < flip_p
             for p in plaintext_words),
            dtype=np.uint8, count=len(plaintext_words))
        return base.prepare(plaintext_words), flips

    def classify(ctx, guess):
        base_ctx, flips = ctx
        return base.classify(base_ctx, guess) ^ flips

    return SelectionFunction("probabilistic", base.subkey_space, epsilon,
                             prepare, classify, target_bit=base.target_bit,
                             relation=base.relation)


@dataclass(frozen=True, slots=True)
class DifferentialTrace:
    values: np.ndarray
    n_traces_used: int
    guess: int
    degenerate: bool = False


def differential_trace(campaign, selection: SelectionFunction, guess: int,
                       _ctx=None) -> DifferentialTrace:
    """mean(S_1) - mean(S_0) per sample; zeros plus a flag if a set is empty."""
    n = len(campaign)
    if n == 0:
        raise DataError("campaign is empty")
    ctx = selection.prepare(campaign.plaintext_words) if _ctx is None else _ctx
    bits = selection.classify(ctx, guess)
    n1 = int(bits.sum())
    if n1 == 0 or n1 == n:
        return DifferentialTrace(np.zeros(campaign.n_samples), n, guess, degenerate=True)
    ones = bits.astype(bool)
    delta = (campaign.samples[ones].mean(axis=0, dtype=np.float64)
             - campaign.samples[~ones].mean(axis=0, dtype=np.float64))
    return DifferentialTrace(delta, n, guess)


def probabilistic_differential_trace(campaign, selection: SelectionFunction,
                                     guess: int) -> DifferentialTrace:
    """Differential trace under a biased selection; identical statistic."""
    if selection.kind != "probabilistic":
        raise ValueError("selection is not probabilistic")
    return differential_trace(campaign, selection, guess)


def rank_guesses(campaign, selection: SelectionFunction, sample_index: int,
                 whole_trace: bool = False):
    """Guesses ordered by |delta| at the target sample (ties: lowest guess).

    whole_trace=True scores by the maximum over all samples instead.
    """
    if not 0 <= sample_index < campaign.n_samples:
        raise IndexError(f"sample index {sample_index} out of range")
    ctx = selection.prepare(campaign.plaintext_words)
    scored = []
    for g in selection.subkey_space:
        d = differential_trace(campaign, selection, g, _ctx=ctx)
        score = float(np.abs(d.values).max()) if whole_trace \
            else float(abs(d.values[sample_index]))
        scored.append((g, score))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def pearson_cpa(campaign, model_predictions) -> np.ndarray:
    """Pearson r between each guess's predictions and every sample column.

    model_predictions: (n_guesses, n_traces) array. Returns
    (n_guesses, n_samples); raises DegenerateModelError on constant rows.
    """
    if len(campaign) == 0:
        raise DataError("campaign is empty")
    pred = np.asarray(model_predictions, dtype=np.float64)
    if pred.ndim != 2 or pred.shape[1] != len(campaign):
        raise ValueError("predictions must be (n_guesses, n_traces)")
    pc = pred - pred.mean(axis=1, keepdims=True)
    pv = np.sqrt((pc * pc).sum(axis=1))
    if np.any(pv == 0):
        raise DegenerateModelError("a guess's predictions have zero variance")
    samples = campaign.samples.astype(np.float64)
    sc = samples - samples.mean(axis=0, keepdims=True)
    sv = np.sqrt((sc * sc).sum(axis=0))
    sv[sv == 0] = np.inf  # constant sample columns correlate with nothing
    return (pc @ sc) / np.outer(pv, sv)


def rank_guesses_cpa(campaign, model_predictions, sample_index: int):
    """Guesses ordered by |r| at the target sample (ties: lowest guess)."""
    r = pearson_cpa(campaign, model_predictions)
    scored = [(g, float(abs(r[g, sample_index]))) for g in range(r.shape[0])]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def des_round1_sbox_hw_model(campaign, sbox_index: int) -> np.ndarray:
    """CPA model: Hamming weight of the four round-1 state bits written by
    one S-box, for all 64 guesses. Returns (64, n_traces)."""
    sels = [des_round1_sbox_bit(sbox_index, t) for t in range(4)]
    ctxs = [s.prepare(campaign.plaintext_words) for s in sels]
    out = np.empty((64, len(campaign)), dtype=np.float64)
    for g in range(64):
        out[g] = sum(s.classify(c, g) for s, c in zip(sels, ctxs))
    return out


def aes_last_round_hw_model(campaign, byte_index: int = 0) -> np.ndarray:
    """CPA model: H(pre-last-round byte) from the ciphertext, all 256 guesses."""
    from . import aes
    if campaign.ciphertext_words is None:
        raise DataError("campaign has no ciphertexts")
    ct = campaign.ciphertext_words.astype(np.uint64)
    if byte_index:
        ct = (ct >> np.uint64(8 * byte_index)) & np.uint64(0xFF)
    inv = np.array(aes.INV_SBOX, dtype=np.uint8)
    out = np.empty((256, len(campaign)), dtype=np.float64)
    cb = ct.astype(np.uint8)
    for g in range(256):
        out[g] = np.bitwise_count(inv[cb ^ np.uint8(g)])
    return out


def flatness_threshold(campaign, selection: SelectionFunction, guess: int,
                       sample_index: int, n_permutations: int = 200,
                       seed: int = 0, factor: float = 4.5) -> float:
    """Permutation-calibrated flatness bound at one sample.

    Shuffles the selection bits, takes the standard deviation of the permuted
    differential at the sample, and scales by `factor` (default 4.5).
    """
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 0x71A7])
    ctx = selection.prepare(campaign.plaintext_words)
    bits = selection.classify(ctx, guess).copy()
    col = campaign.samples[:, sample_index].astype(np.float64)
    deltas = np.empty(n_permutations)
    for i in range(n_permutations):
        rng.shuffle(bits)
        ones = bits.astype(bool)
        n1 = int(ones.sum())
        if n1 == 0 or n1 == len(bits):
            deltas[i] = 0.0
            continue
        deltas[i] = col[ones].mean() - col[~ones].mean()
    return factor * float(deltas.std())


def write_guess_csv(path, ranked) -> None:
    """Per-guess score table: guess_hex,score,rank."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("guess_hex,score,rank\n")
        for rank, (guess, score) in enumerate(ranked, start=1):
            fh.write(f"0x{guess:02x},{score!r},{rank}\n")
