"""Batch front-end: simulate campaigns, search relations, run attacks.

Exit codes: 0 success, 2 configuration error, 3 data error,
4 --assert-success failure. MLPA_THREADS caps attack-trial workers.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import attack as attack_mod
from . import des, dpa, traceio
from .approx import ApproximationSet, load_corpus, save_corpus, search_approximations
from .bits import BitVector
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, FormatError, MlpaError, ParseError
from .leakage import register_target, sbox_target, simulate_campaign, with_seed
from .rmcode import KeyRanking
from .seeding import derive_rng, random_word

TABLE_HEADERS = ("Cipher", "Model", "rounds", "# linear equ.", "# key bits",
                 "# Plaintexts", "Pr(Success)")


def _experiment_key(cfg: ExperimentConfig) -> BitVector:
    if cfg.simulate.key is not None:
        return BitVector(cfg.simulate.key, 64)
    return BitVector(random_word(derive_rng(cfg.seed, "key"), 64), 64)


def cmd_simulate(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    key = _experiment_key(cfg)
    for n in cfg.simulate.n_traces:
        dev = with_seed(cfg.device, int(derive_rng(cfg.seed, "simulate", n)
                                        .integers(1 << 62)))
        campaign = simulate_campaign(dev, key, n)
        path = os.path.join(cfg.out_dir, f"campaign_n{n}.mlpatrc")
        traceio.write_campaign(campaign, path, include_key=cfg.simulate.include_key)
        print(f"{path}: {n} traces, {campaign.n_samples} samples/trace")
    return 0


def cmd_search(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    sc = cfg.search
    pi_support = kappa_support = None
    if sc.target.startswith("sbox:"):
        target = sbox_target(int(sc.target.split(":", 1)[1]))
    else:
        target = register_target(cfg.device.cipher, sc.rounds, cfg.device.leakage)
        if sc.sbox is not None:
            pi_support, kappa_support = des.round1_sbox_supports(sc.sbox)
    result = search_approximations(
        target, sc.rounds, sc.register, sc.gamma_h, sc.max_pi_weight,
        sc.max_kappa_weight, sc.min_bias, sc.budget,
        pi_support=pi_support, kappa_support=kappa_support,
        n_samples=sc.n_samples, seed=cfg.seed)
    out = os.path.join(cfg.out_dir, sc.corpus_out)
    save_corpus(result.items, out,
                header=f"searched relations, rounds={sc.rounds} "
                       f"model={cfg.device.leakage} min_bias={sc.min_bias}")
    note = " (budget exhausted, partial)" if result.budget_exhausted else ""
    print(f"{out}: {len(result.items)} relations, key support "
          f"{list(result.key_support)}, rank {result.rank}{note}")
    return 0


def _write_ranking_csv(path, ranking: KeyRanking, correct: int | None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rank,subkey_hex,score,is_correct_if_known\n")
        for rank, (sk, score) in enumerate(ranking.entries, start=1):
            known = "" if correct is None else str(int(sk.value == correct))
            fh.write(f"{rank},0x{sk.value:02x},{score!r},{known}\n")


def _attack_mlpa(cfg: ExperimentConfig, assert_success: bool) -> int:
    ac = cfg.attack
    corpus_path = ac.corpus
    if corpus_path is None:
        raise ConfigError("attack.corpus: required for mlpa attacks")
    relations = load_corpus(corpus_path)
    if not relations:
        raise DataError(f"{corpus_path}: no relations")
    aset = ApproximationSet.from_items(relations)

    if ac.campaign is not None:
        campaign = traceio.read_campaign(ac.campaign)
        if ac.sample_strategy.startswith("given:"):
            strategy = traceio.Given(int(ac.sample_strategy.split(":", 1)[1]))
        else:
            strategy = traceio.MaxVariance()
        idx = traceio.locate_register_sample(campaign, strategy=strategy)
        result = attack_mod.mlpa_attack(campaign, aset, idx, ac.mode)
        correct = aset.restricted_key(campaign.key) if campaign.key else None
        path = os.path.join(cfg.out_dir, "ranking.csv")
        _write_ranking_csv(path, result.ranking, correct)
        print(f"{path}: rank-1 subkey 0x{result.ranking.best.value:02x}"
              + ("" if correct is None else f", correct 0x{correct:02x}"))
        if assert_success and correct is not None \
                and result.ranking.best.value != correct:
            return 4
        return 0

    rows = []
    rep_ranking, rep_correct = None, None
    for sigma in ac.noise_sigma:
        dev = replace(cfg.device, noise_sigma=sigma)
        for n in ac.n_traces:
            rate = attack_mod.success_rate(dev, aset, n, cfg.n_trials,
                                           cfg.seed, mode=ac.mode)
            rows.append((cfg.device.cipher.upper(), cfg.device.leakage,
                         relations[0].rounds, len(relations), aset.k, n, rate))
            print(f"sigma={sigma} n={n}: Pr(Success)={rate:.3f}")
    # representative single run for the ranking report
    rng = derive_rng(cfg.seed, "trial-key", 0)
    key = BitVector(random_word(rng, 64), 64)
    dev = with_seed(replace(cfg.device, noise_sigma=ac.noise_sigma[0]),
                    int(rng.integers(1 << 62)))
    campaign = simulate_campaign(dev, key, ac.n_traces[-1])
    idx = attack_mod._target_sample(campaign, aset, None)
    result = attack_mod.mlpa_attack(campaign, aset, idx, ac.mode)
    rep_ranking, rep_correct = result.ranking, aset.restricted_key(key)

    os.makedirs(cfg.out_dir, exist_ok=True)
    table = os.path.join(cfg.out_dir, "success_table.csv")
    with open(table, "w", encoding="utf-8") as fh:
        fh.write(",".join(TABLE_HEADERS) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    print(f"{table}: {len(rows)} sweep points")
    _write_ranking_csv(os.path.join(cfg.out_dir, "ranking.csv"),
                       rep_ranking, rep_correct)
    if assert_success and rep_ranking.best.value != rep_correct:
        return 4
    return 0


def _attack_dpa(cfg: ExperimentConfig, assert_success: bool) -> int:
    ac = cfg.attack
    selection = dpa.des_round1_sbox_bit(ac.sbox, ac.target_bit)
    if ac.kind == "prob-dpa":
        selection = dpa.noisy_selection(selection, ac.epsilon, cfg.seed)
    sample_round = cfg.device.register_rounds[0]

    def true_subkey(key):
        return des.sbox_subkey(des.des_key_schedule(key), 1, ac.sbox)

    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = []
    for sigma in ac.noise_sigma:
        dev = replace(cfg.device, noise_sigma=sigma)
        wins = attack_mod.dpa_rank1_successes(dev, selection, true_subkey,
                                              ac.n_traces, cfg.n_trials,
                                              cfg.seed, sample_round)
        for n in ac.n_traces:
            rate = wins[n] / cfg.n_trials
            rows.append((cfg.device.cipher.upper(), cfg.device.leakage, 1,
                         1, 6, n, rate))
            print(f"sigma={sigma} n={n}: Pr(Success)={rate:.3f}")

    table = os.path.join(cfg.out_dir, "success_table.csv")
    with open(table, "w", encoding="utf-8") as fh:
        fh.write(",".join(TABLE_HEADERS) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")

    # representative guess table at the largest sweep point
    rng = derive_rng(cfg.seed, "dpa-trial-key", 0)
    key = BitVector(random_word(rng, 64), 64)
    dev = with_seed(replace(cfg.device, noise_sigma=ac.noise_sigma[0]),
                    int(rng.integers(1 << 62)))
    campaign = simulate_campaign(dev, key, ac.n_traces[-1])
    if ac.kind == "cpa":
        ranked = dpa.rank_guesses_cpa(
            campaign, dpa.des_round1_sbox_hw_model(campaign, ac.sbox),
            campaign.sample_map[sample_round])
    else:
        ranked = dpa.rank_guesses(campaign, selection,
                                  campaign.sample_map[sample_round])
    path = os.path.join(cfg.out_dir, "guesses.csv")
    dpa.write_guess_csv(path, ranked)
    correct = true_subkey(key)
    print(f"{path}: best guess 0x{ranked[0][0]:02x}, correct 0x{correct:02x}")
    if assert_success and ranked[0][0] != correct:
        return 4
    return 0


def cmd_attack(cfg: ExperimentConfig, assert_success: bool) -> int:
    if cfg.attack.kind == "mlpa":
        return _attack_mlpa(cfg, assert_success)
    return _attack_dpa(cfg, assert_success)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mlpa",
        description="Power-analysis workbench: trace simulation, relation "
                    "search, DPA/CPA and multi-linear attacks.",
        epilog="MLPA_THREADS caps attack-trial worker processes.")
    parser.add_argument("--config", required=True, help="experiment INI file")
    parser.add_argument("--seed", type=int, default=None, help="override experiment seed")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument("--assert-success", action="store_true",
                        help="exit 4 when the known-correct subkey is not rank 1")
    parser.add_argument("command", choices=("simulate", "search", "attack"))
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "search":
            return cmd_search(cfg)
        return cmd_attack(cfg, args.assert_success)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, FormatError, ParseError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except MlpaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
