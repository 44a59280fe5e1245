"""INI experiment configuration shared by all CLI commands.

One file drives simulate/search/attack so sweeps are reproducible; every
random choice derives from the single [experiment] seed.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .leakage import DeviceConfig

ATTACK_KINDS = ("dpa", "cpa", "mlpa", "prob-dpa")


def _parse_list(text: str, convert):
    items = [t.strip() for t in text.split(",") if t.strip()]
    return tuple(convert(t) for t in items)


def _get(cfg, section, option, convert=str, default=None, required=False):
    if not cfg.has_option(section, option):
        if required:
            raise ConfigError(f"{section}.{option}: missing")
        return default
    raw = cfg.get(section, option)
    try:
        return convert(raw)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{section}.{option}: {e}") from e


def _parse_int(text: str) -> int:
    return int(text, 0)


@dataclass(frozen=True, slots=True)
class SimulateConfig:
    n_traces: tuple = (16,)
    key: int | None = None
    include_key: bool = True


@dataclass(frozen=True, slots=True)
class SearchConfig:
    target: str = "register"   # "register" or "sbox:N" (single S-box micro-cipher)
    rounds: int = 2
    register: int = 2
    gamma_h: tuple = (0x10, 0x20)
    max_pi_weight: int = 8
    max_kappa_weight: int = 6
    min_bias: float = 0.012
    budget: int = 1 << 21
    n_samples: int = 1 << 16
    sbox: int | None = None
    corpus_out: str = "relations.txt"


@dataclass(frozen=True, slots=True)
class AttackConfig:
    kind: str = "mlpa"
    corpus: str | None = None
    mode: str = "simulation-exact"
    n_traces: tuple = (1024,)
    noise_sigma: tuple = (0.0,)
    campaign: str | None = None
    sample_strategy: str = "register"
    sbox: int = 0
    target_bit: int = 1
    epsilon: float = 0.25


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    device: DeviceConfig
    seed: int = 0
    out_dir: str = "."
    n_trials: int = 25
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)


def load_config(path, seed_override=None, out_override=None) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config: file not found: {path}")
    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cfg.read(path)
    except configparser.Error as e:
        raise ConfigError(f"config: {e}") from e

    device = DeviceConfig(
        cipher=_get(cfg, "device", "cipher", str, "des"),
        register_rounds=_get(cfg, "device", "register_rounds",
                             lambda t: _parse_list(t, int), (1,)),
        leakage=_get(cfg, "device", "leakage", str, "HW"),
        noise_sigma=_get(cfg, "device", "noise_sigma", float, 0.0),
        samples_per_load=_get(cfg, "device", "samples_per_load", int, 1),
    )

    seed = seed_override if seed_override is not None \
        else _get(cfg, "experiment", "seed", _parse_int, 0)
    out_dir = out_override if out_override is not None \
        else _get(cfg, "experiment", "out", str, ".")
    n_trials = _get(cfg, "experiment", "n_trials", int, 25)
    if n_trials < 1:
        raise ConfigError("experiment.n_trials: must be >= 1")

    simulate = SimulateConfig(
        n_traces=_get(cfg, "simulate", "n_traces", lambda t: _parse_list(t, int), (16,)),
        key=_get(cfg, "simulate", "key", _parse_int, None),
        include_key=_get(cfg, "simulate", "include_key",
                         lambda t: t.lower() in ("1", "true", "yes"), True),
    )
    if not simulate.n_traces:
        raise ConfigError("simulate.n_traces: sweep must be non-empty")

    search = SearchConfig(
        target=_get(cfg, "search", "target", str, "register"),
        rounds=_get(cfg, "search", "rounds", int, 2),
        register=_get(cfg, "search", "register", int, None) or
        _get(cfg, "search", "rounds", int, 2),
        gamma_h=_get(cfg, "search", "gamma_h",
                     lambda t: _parse_list(t, _parse_int), (0x10, 0x20)),
        max_pi_weight=_get(cfg, "search", "max_pi_weight", int, 8),
        max_kappa_weight=_get(cfg, "search", "max_kappa_weight", int, 6),
        min_bias=_get(cfg, "search", "min_bias", float, 0.012),
        budget=_get(cfg, "search", "budget", int, 1 << 21),
        n_samples=_get(cfg, "search", "n_samples", int, 1 << 16),
        sbox=_get(cfg, "search", "sbox", int, None),
        corpus_out=_get(cfg, "search", "corpus_out", str, "relations.txt"),
    )

    attack = AttackConfig(
        kind=_get(cfg, "attack", "kind", str, "mlpa"),
        corpus=_get(cfg, "attack", "corpus", str, None),
        mode=_get(cfg, "attack", "mode", str, "simulation-exact"),
        n_traces=_get(cfg, "attack", "n_traces", lambda t: _parse_list(t, int), (1024,)),
        noise_sigma=_get(cfg, "attack", "noise_sigma",
                         lambda t: _parse_list(t, float), (device.noise_sigma,)),
        campaign=_get(cfg, "attack", "campaign", str, None),
        sample_strategy=_get(cfg, "attack", "sample_strategy", str, "register"),
        sbox=_get(cfg, "attack", "sbox", int, 0),
        target_bit=_get(cfg, "attack", "target_bit", int, 1),
        epsilon=_get(cfg, "attack", "epsilon", float, 0.25),
    )
    if attack.kind not in ATTACK_KINDS:
        raise ConfigError(f"attack.kind: must be one of {ATTACK_KINDS}")
    if not attack.n_traces or not attack.noise_sigma:
        raise ConfigError("attack.n_traces / attack.noise_sigma: sweeps must be non-empty")
    if attack.kind in ("mlpa",) and attack.corpus is not None \
            and not os.path.exists(attack.corpus):
        raise ConfigError(f"attack.corpus: file not found: {attack.corpus}")
    if attack.campaign is not None and not os.path.exists(attack.campaign):
        raise ConfigError(f"attack.campaign: file not found: {attack.campaign}")

    return ExperimentConfig(device=device, seed=seed, out_dir=out_dir,
                            n_trials=n_trials, simulate=simulate,
                            search=search, attack=attack)
