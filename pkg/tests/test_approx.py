import math

import pytest

from mlpa.approx import (
    ApproximationSet,
    LinearApproximation,
    data_complexity,
    estimate_bias_exhaustive,
    estimate_bias_from_traces,
    estimate_bias_monte_carlo,
    evaluate_parity,
    load_corpus,
    multi_data_complexity,
    parse_approximation,
    reference_corpus_path,
    search_approximations,
    serialize_approximation,
)
from mlpa.bits import BitVector, bit_indices, from_bit_indices, inner_product
from mlpa.des import _SBOX_FLAT
from mlpa.errors import BudgetError, DataError, ParseError
from mlpa.leakage import DeviceConfig, RegisterTarget, sbox_target, simulate_campaign

ROW1 = ("gamma_h=0x10 bias=0.0219 eq=0+P[5]+P[26]+P[27]+P[31]+P[45]+P[53]+P[61]"
        "+K[6]+K[7]+K[29]+K[38]+K[52]")
ROW3 = "gamma_h=0x20 bias=0.0134 eq=0+P[28]+P[29]+P[31]+P[37]+P[45]+P[53]+K[6]+K[7]+K[29]+K[61]"


def test_parse_published_row_1():
    a = parse_approximation(ROW1)
    assert bit_indices(a.pi) == [5, 26, 27, 31, 45, 53, 61]
    assert bit_indices(a.kappa) == [6, 7, 29, 38, 52]
    assert a.b == 0
    assert a.bias == 0.0219
    assert a.gamma_h.value == 0x10 and a.gamma_h.width == 7


def test_parse_published_row_3():
    a = parse_approximation(ROW3)
    assert bit_indices(a.kappa) == [6, 7, 29, 61]


def test_parse_rejects_key_independent():
    with pytest.raises(ParseError):
        parse_approximation("gamma_h=0x10 bias=0.5 eq=1")


def test_parse_rejects_duplicates_and_garbage():
    with pytest.raises(ParseError):
        parse_approximation("gamma_h=0x10 bias=0.1 eq=0+P[5]+P[5]+K[6]")
    with pytest.raises(ParseError):
        parse_approximation("gamma_h=0x10 bias=0.1 eq=0+P[5]+Q[6]")
    with pytest.raises(ParseError):
        parse_approximation("gamma_h=0x10 bias=0.1 eq=2+P[5]+K[6]")
    with pytest.raises(ParseError):
        parse_approximation("gamma_h=0x10 bias=0.1 eq=0+K[6]+P[5]")
    with pytest.raises(ParseError):
        parse_approximation("gamma_h=zz bias=0.1 eq=0+P[5]+K[6]")
    with pytest.raises(ParseError):
        parse_approximation("gamma_h=0x10 bias=0.7 eq=0+P[5]+K[6]")


def test_parse_is_whitespace_tolerant():
    a = parse_approximation("gamma_h=0x10  bias=0.0219  eq=0 + P[5]+ P[26]+ K[6]")
    assert bit_indices(a.pi) == [5, 26]


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as e:
        parse_approximation("gamma_h=0x10 bias=0.1 eq=0+P[5]+X", line_number=3)
    assert e.value.line == 3
    assert e.value.column is not None


def test_roundtrip_on_full_reference_corpus():
    path = reference_corpus_path()
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    assert len(lines) == 20
    for ln in lines:
        assert serialize_approximation(parse_approximation(ln)) == ln


def test_reference_corpus_key_support():
    rels = load_corpus(reference_corpus_path())
    s = ApproximationSet.from_items(rels)
    assert s.key_support == (6, 7, 29, 38, 52, 61)
    assert s.k == 6


def test_constructor_invariants():
    pi = from_bit_indices([1], 64)
    g = BitVector(0x10, 7)
    with pytest.raises(ValueError):
        LinearApproximation(pi, g, BitVector(0, 64), 0, 0.1)
    with pytest.raises(ValueError):
        LinearApproximation(pi, g, pi, 0, 0.0)
    with pytest.raises(ValueError):
        LinearApproximation(pi, g, pi, 2, 0.1)


def test_evaluate_parity_examples():
    g1 = BitVector(0x01, 7)
    a = LinearApproximation(BitVector(0, 64), g1, from_bit_indices([1], 64), 0, 0.1)
    assert evaluate_parity(a, BitVector(0, 64), 1) == 1
    g20 = BitVector(0x20, 7)
    b = LinearApproximation(BitVector(0, 64), g20, from_bit_indices([1], 64), 1, 0.1)
    assert evaluate_parity(b, BitVector(0, 64), 32) == 0
    # published row 1: XOR of the listed P bits, the 0x10 weight bit, and b=0
    r1 = parse_approximation(ROW1)
    pt = BitVector(0x0123456789ABCDEF, 64)
    expected = inner_product(pt, r1.pi) ^ ((20 >> 4) & 1) ^ 0
    assert evaluate_parity(r1, pt, 20) == expected


def _xor_target():
    # tiny cipher: C(P,K) = P ^ K on 4 bits
    return RegisterTarget(4, 4, 4, lambda p, k: p ^ k)


def _space(width):
    return [BitVector(v, width) for v in range(1 << width)]


def test_exhaustive_identity_relation():
    # <H(P^K),0x1> = parity(P) ^ parity(K): an exact identity -> bias +1/2
    a = LinearApproximation(BitVector(0xF, 4), BitVector(0x1, 3),
                            BitVector(0xF, 4), 0, 0.5, rounds=1, register=1)
    t = _xor_target()
    assert estimate_bias_exhaustive(a, t, _space(4), _space(4)) == 0.5
    flipped = LinearApproximation(a.pi, a.gamma_h, a.kappa, 1, 0.5, rounds=1, register=1)
    assert estimate_bias_exhaustive(flipped, t, _space(4), _space(4)) == -0.5


def test_exhaustive_budget_guard():
    a = LinearApproximation(BitVector(0xF, 4), BitVector(0x1, 3),
                            BitVector(0xF, 4), 0, 0.5)
    with pytest.raises(BudgetError):
        estimate_bias_exhaustive(a, _xor_target(), [None] * (1 << 13), [None] * (1 << 14))


def _sbox_relation_bias(sbox_index, pi, gamma, kappa, b):
    # oracle: direct count over the S-box truth table, all (p,k) pairs
    table = _SBOX_FLAT[sbox_index]
    agree = 0
    for k in range(64):
        for p in range(64):
            h = bin(table[p ^ k]).count("1")
            lhs = (bin(p & pi).count("1") + bin(h & gamma).count("1") + b) & 1
            agree += lhs == bin(k & kappa).count("1") & 1
    return agree / 4096 - 0.5


def test_single_sbox_bias_matches_truth_table():
    # parity of the S-box output weight = <out,0xF>: the classic S5 relation
    for sbox_index, pi, gamma, kappa in ((4, 0b010000, 0x1, 0b010000),
                                         (0, 0b111011, 0x2, 0b111011)):
        oracle = _sbox_relation_bias(sbox_index, pi, gamma, kappa, 0)
        a = LinearApproximation(BitVector(pi, 6), BitVector(gamma, 3),
                                BitVector(kappa, 6), 0, 0.5, rounds=1, register=1)
        est = estimate_bias_exhaustive(a, sbox_target(sbox_index), _space(6), _space(6))
        assert est == pytest.approx(oracle, abs=1e-12)


def test_famous_s5_relation_value():
    # S5: <S(x),0xF> = x_2 (second input bit) holds 12/64 of the time
    assert _sbox_relation_bias(4, 0b010000, 0x1, 0b010000, 0) == pytest.approx(
        12 / 64 - 0.5)


def test_monte_carlo_against_exhaustive():
    a = LinearApproximation(BitVector(0b010000, 6), BitVector(0x1, 3),
                            BitVector(0b010000, 6), 1, 0.5, rounds=1, register=1)
    t = sbox_target(4)
    exact = estimate_bias_exhaustive(a, t, _space(6), _space(6))
    est, se = estimate_bias_monte_carlo(a, t, 20000, seed=3)
    assert abs(est - exact) < 3 * se
    est2, _ = estimate_bias_monte_carlo(a, t, 20000, seed=3)
    assert est == est2  # same seed, same estimate
    with pytest.raises(ValueError):
        estimate_bias_monte_carlo(a, t, 100, seed=3)


def test_flipping_b_negates_bias():
    t = sbox_target(2)
    for kappa in (0b000001, 0b101000):
        a0 = LinearApproximation(BitVector(0b000111, 6), BitVector(0x2, 3),
                                 BitVector(kappa, 6), 0, 0.5, rounds=1, register=1)
        a1 = LinearApproximation(a0.pi, a0.gamma_h, a0.kappa, 1, 0.5,
                                 rounds=1, register=1)
        e0 = estimate_bias_exhaustive(a0, t, _space(6), _space(6))
        e1 = estimate_bias_exhaustive(a1, t, _space(6), _space(6))
        assert e0 == -e1


def test_bias_from_traces_matches_model():
    # noiseless HD campaign: measured-channel bias of a searched relation
    # agrees with its Monte-Carlo model bias within sampling error
    from mlpa.approx import searched_corpus_path
    rels = load_corpus(searched_corpus_path())
    a = max(rels, key=lambda r: r.bias)
    cfg = DeviceConfig(register_rounds=(1, 2), leakage="HD", seed=77)
    key = BitVector(0xA1B2C3D4E5F60718, 64)
    camp = simulate_campaign(cfg, key, 4000)
    got = estimate_bias_from_traces(a, camp, camp.sample_map[2])
    # the threshold channel degrades the bias; sign must agree and the
    # magnitude must be within 3 binomial standard errors plus model loss
    se = 0.5 / math.sqrt(4000)
    assert got > a.bias * 0.4 - 3 * se


def test_bias_from_traces_pure_noise_sample():
    cfg = DeviceConfig(register_rounds=(1, 2), leakage="HD", seed=78,
                       samples_per_load=2, noise_sigma=1.0)
    key = BitVector(0xA1B2C3D4E5F60718, 64)
    camp = simulate_campaign(cfg, key, 3000)
    rels = load_corpus(reference_corpus_path())
    got = estimate_bias_from_traces(rels[0], camp, 1)  # padding sample
    assert abs(got) < 3 * 0.5 / math.sqrt(3000)


def test_bias_from_traces_degenerate_single_trace():
    cfg = DeviceConfig(register_rounds=(1, 2), leakage="HD", seed=79)
    key = BitVector(0xA1B2C3D4E5F60718, 64)
    camp = simulate_campaign(cfg, key, 1)
    got = estimate_bias_from_traces(load_corpus(reference_corpus_path())[0],
                                    camp, 1)
    assert got in (-0.5, 0.5)


def test_bias_from_traces_needs_key():
    cfg = DeviceConfig(register_rounds=(1, 2), leakage="HD", seed=80)
    camp = simulate_campaign(cfg, BitVector(5, 64), 10)
    camp.key = None
    with pytest.raises(DataError):
        estimate_bias_from_traces(load_corpus(reference_corpus_path())[0], camp, 1)


def test_data_complexity_formulas():
    a = LinearApproximation(BitVector(1, 64), BitVector(0x10, 7),
                            BitVector(1, 64), 0, 0.5)
    assert data_complexity(a) == 4.0
    b = LinearApproximation(BitVector(2, 64), BitVector(0x10, 7),
                            BitVector(2, 64), 0, 0.5)
    s = ApproximationSet.from_items([a, b])
    assert multi_data_complexity(s) == 2.0
    # adding relations never increases the joint complexity
    assert multi_data_complexity(s) <= min(data_complexity(a), data_complexity(b))
    rels = load_corpus(reference_corpus_path())
    joint = multi_data_complexity(ApproximationSet.from_items(rels))
    assert joint == pytest.approx(1.0 / sum(r.bias**2 for r in rels))
    assert joint <= min(data_complexity(r) for r in rels)


def test_search_recovers_sbox_relations():
    # exhaustive-regime search on one S-box; oracle = truth-table count
    t = sbox_target(4)
    res = search_approximations(t, 1, 1, (0x1,), 6, 6, 0.15, budget=1 << 16,
                                n_samples=8192, seed=21)
    assert res.items, "expected at least the classic S5 relation"
    best = max(res.items, key=lambda a: a.bias)
    oracle = abs(_sbox_relation_bias(4, best.pi.value, 0x1, best.kappa.value, best.b))
    assert oracle >= 0.15
    # estimates agree with the truth table within MC error
    assert best.bias == pytest.approx(oracle, abs=3 * 0.5 / math.sqrt(8192))


def test_search_empty_at_impossible_bias():
    res = search_approximations(sbox_target(0), 1, 1, (0x1,), 6, 6, 0.5,
                                budget=1 << 16, n_samples=4096, seed=22)
    assert res.items == ()


def test_search_deterministic():
    t = sbox_target(1)
    a = search_approximations(t, 1, 1, (0x1, 0x2), 4, 4, 0.1, budget=1 << 16,
                              n_samples=4096, seed=23)
    b = search_approximations(t, 1, 1, (0x1, 0x2), 4, 4, 0.1, budget=1 << 16,
                              n_samples=4096, seed=23)
    assert [serialize_approximation(x) for x in a.items] == \
        [serialize_approximation(x) for x in b.items]


def test_search_budget_flag():
    res = search_approximations(sbox_target(0), 1, 1, (0x1,), 6, 6, 0.4,
                                budget=10, n_samples=4096, seed=24)
    assert res.budget_exhausted


def test_set_rank_reported():
    rels = load_corpus(reference_corpus_path())
    s = ApproximationSet.from_items(rels)
    assert s.rank == 6  # full rank on this corpus
