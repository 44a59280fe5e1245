"""The multi-linear attack: partition traces per relation, accumulate a noisy
RM(1,k) codeword, decode by Walsh transform, rank subkeys.

Positions index the key bits on the set's support, least significant bit
first (smallest master-key bit index). Relations sharing a kappa accumulate
additively, treating repeated relations as independent tests; weights are
positive log-likelihood ratios so the true key maximizes the statistic.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .approx import ApproximationSet
from .bits import BitVector
from .errors import DataError, MaskError
from .leakage import DeviceConfig, simulate_campaign, with_seed
from .rmcode import KeyRanking, NoisyCodeword, decode
from .seeding import derive_rng, random_word

MODE_MEASURED = "measured"
MODE_EXACT = "simulation-exact"


def _hw_bits(campaign, gamma_value: int, sample_index: int, mean: float,
             mode: str) -> np.ndarray:
    col = campaign.samples[:, sample_index].astype(np.float64)
    if mode == MODE_MEASURED:
        if gamma_value == 0x20:
            return (col > mean).astype(np.int8)
        if gamma_value == 0x10:
            return (col <= mean).astype(np.int8)
        raise MaskError(f"measured mode supports gamma_h 0x10/0x20, got {gamma_value:#x}")
    if mode == MODE_EXACT:
        width = 64 if campaign.plaintext_width == 64 else 8
        hv = np.clip(np.rint(col), 0, width).astype(np.uint64)
        return (np.bitwise_count(hv & np.uint64(gamma_value)) & np.uint64(1)).astype(np.int8)
    raise ValueError(f"unknown mode {mode!r}")


def partition_counts(campaign, approximation, sample_index: int,
                     mean: float | None = None, mode: str = MODE_MEASURED):
    """Sizes (n0, n1) of the trace sets predicting <K,kappa> = 0 and 1."""
    if len(campaign) == 0:
        raise DataError("campaign is empty")
    if not 0 <= sample_index < campaign.n_samples:
        raise IndexError(f"sample index {sample_index} out of range")
    if mean is None:
        mean = campaign.sample_mean(sample_index)
    hw = _hw_bits(campaign, approximation.gamma_h.value, sample_index, mean, mode)
    pi = np.uint64(approximation.pi.value)
    p_par = (np.bitwise_count(campaign.plaintext_words & pi) & np.uint64(1)).astype(np.int8)
    pred = p_par ^ hw ^ np.int8(approximation.b)
    n1 = int(pred.sum())
    return len(campaign) - n1, n1


def build_codeword(counts, approximations: ApproximationSet) -> NoisyCodeword:
    """Accumulate (n0-n1) * ln((1/2+eps)/(1/2-eps)) at each restricted kappa."""
    cw = NoisyCodeword.empty(approximations.k)
    for a, (n0, n1) in zip(approximations.items, counts):
        eps = min(a.bias, 0.5 - 1e-12)
        weight = (n0 - n1) * math.log((0.5 + eps) / (0.5 - eps))
        cw.accumulate(approximations.kappa_index(a), weight)
    return cw


@dataclass(frozen=True, slots=True)
class MlpaResult:
    ranking: KeyRanking
    parities: tuple          # recovered <K,kappa_l> per relation
    counts: tuple            # (n0, n1) per relation
    codeword: NoisyCodeword
    key_support: tuple


def mlpa_attack(campaign, approximations: ApproximationSet, sample_index: int,
                mode: str = MODE_MEASURED) -> MlpaResult:
    """Full chain: partition -> codeword -> RM(1) decode -> subkey ranking."""
    if len(campaign) == 0:
        raise DataError("campaign is empty")
    mean = campaign.sample_mean(sample_index)
    counts = tuple(partition_counts(campaign, a, sample_index, mean, mode)
                   for a in approximations.items)
    cw = build_codeword(counts, approximations)
    parities = tuple(0 if n0 >= n1 else 1 for n0, n1 in counts)
    return MlpaResult(decode(cw), parities, counts, cw, approximations.key_support)


def _target_sample(campaign, approximations: ApproximationSet,
                   sample_index: int | None) -> int:
    if sample_index is not None:
        return sample_index
    registers = {a.register for a in approximations.items}
    if len(registers) != 1:
        raise DataError("relations target several registers; pass sample_index")
    reg = registers.pop()
    if reg not in campaign.sample_map:
        raise DataError(f"campaign has no sample for register round {reg}")
    return campaign.sample_map[reg]


def _success_trial(args):
    (config, approximations, n_traces, mode, sample_index, seed, trial) = args
    rng = derive_rng(seed, "trial-key", trial)
    key = BitVector(random_word(rng, 64), 64)
    campaign = simulate_campaign(with_seed(config, int(rng.integers(1 << 62))),
                                 key, n_traces)
    idx = _target_sample(campaign, approximations, sample_index)
    result = mlpa_attack(campaign, approximations, idx, mode)
    return result.ranking.best.value == approximations.restricted_key(key)


def success_rate(config: DeviceConfig, approximations: ApproximationSet,
                 n_traces: int, n_trials: int, seed: int,
                 mode: str = MODE_MEASURED, sample_index: int | None = None) -> float:
    """Fraction of fresh-key trials whose rank-1 subkey is correct.

    Deterministic given `seed`; trials parallelize across MLPA_THREADS
    workers without changing the result.
    """
    if n_trials < 1:
        raise DataError("n_trials must be >= 1")
    jobs = [(config, approximations, n_traces, mode, sample_index, seed, t)
            for t in range(n_trials)]
    workers = int(os.environ.get("MLPA_THREADS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            wins = sum(pool.map(_success_trial, jobs))
    else:
        wins = sum(_success_trial(j) for j in jobs)
    return wins / n_trials


def dpa_rank1_successes(config: DeviceConfig, selection, true_subkey_fn,
                        grid, n_trials: int, seed: int, sample_round: int):
    """Rank-1 success counts of a DPA selection over a trace-count grid.

    One campaign of max(grid) traces per trial; prefixes give the smaller
    points, which per-trace seeding makes identical to fresh campaigns.
    Returns {n_traces: successes}.
    """
    from .dpa import differential_trace

    grid = sorted(grid)
    n_max = grid[-1]
    wins = {n: 0 for n in grid}
    for trial in range(n_trials):
        rng = derive_rng(seed, "dpa-trial-key", trial)
        key = BitVector(random_word(rng, 64), 64)
        campaign = simulate_campaign(with_seed(config, int(rng.integers(1 << 62))),
                                     key, n_max)
        sample_index = campaign.sample_map[sample_round]
        correct = true_subkey_fn(key)
        ctx_full = selection.prepare(campaign.plaintext_words)
        col_full = campaign.samples[:, sample_index].astype(np.float64)
        for n in grid:
            col = col_full[:n]
            ctx = _ctx_prefix(ctx_full, n)
            scores = np.empty(len(selection.subkey_space))
            for gi, g in enumerate(selection.subkey_space):
                bits = selection.classify(ctx, g)
                n1 = int(bits.sum())
                if n1 == 0 or n1 == n:
                    scores[gi] = 0.0
                    continue
                ones = bits.astype(bool)
                scores[gi] = abs(col[ones].mean() - col[~ones].mean())
            wins[n] += int(selection.subkey_space[int(np.argmax(scores))] == correct)
    return wins


def _ctx_prefix(ctx, n):
    if isinstance(ctx, tuple):
        return tuple(_ctx_prefix(c, n) for c in ctx)
    return ctx[:n]


def traces_to_rank1(config: DeviceConfig, selection, true_subkey_fn, grid,
                    n_trials: int, seed: int, sample_round: int,
                    success_level: float = 0.5):
    """Smallest grid size whose rank-1 success rate reaches `success_level`.

    Returns (n_traces or None, {n: rate}).
    """
    wins = dpa_rank1_successes(config, selection, true_subkey_fn, grid,
                               n_trials, seed, sample_round)
    rates = {n: wins[n] / n_trials for n in sorted(wins)}
    for n in sorted(rates):
        if rates[n] >= success_level:
            return n, rates
    return None, rates
