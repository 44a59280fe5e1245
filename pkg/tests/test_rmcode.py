import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlpa.errors import ShapeError
from mlpa.rmcode import NoisyCodeword, decode, fwht


def brute_force_wht(v):
    n = len(v)
    out = np.zeros(n)
    for key in range(n):
        out[key] = sum(((-1) ** bin(key & x).count("1")) * v[x] for x in range(n))
    return out


def test_fwht_delta():
    v = np.zeros(8)
    v[0] = 1.0
    assert np.array_equal(fwht(v), np.ones(8))


def test_fwht_involution_up_to_scale():
    rng = np.random.default_rng(1)
    v = rng.normal(size=64)
    assert np.allclose(fwht(fwht(v)), 64 * v, atol=1e-9)


def test_fwht_matches_brute_force():
    rng = np.random.default_rng(2)
    v = rng.normal(size=256)
    assert np.max(np.abs(fwht(v) - brute_force_wht(v))) < 1e-9


def test_fwht_shape_guard():
    with pytest.raises(ShapeError):
        fwht(np.zeros(6))
    with pytest.raises(ShapeError):
        fwht(np.zeros(0))


def test_decode_exact_codeword():
    k, true_key = 6, 0b101101
    cw = NoisyCodeword.empty(k)
    for x in range(1 << k):
        cw.accumulate(x, (-1.0) ** bin(true_key & x).count("1"))
    ranking = decode(cw)
    assert ranking.best.value == true_key
    assert ranking.entries[0][1] == pytest.approx(1 << k)
    assert not ranking.uninformative


def test_decode_all_zero_ties_to_lowest():
    cw = NoisyCodeword.empty(4)
    ranking = decode(cw)
    assert ranking.uninformative
    assert ranking.best.value == 0
    assert [e[0].value for e in ranking.entries] == list(range(16))


def test_decode_scores_non_increasing():
    rng = np.random.default_rng(3)
    cw = NoisyCodeword.empty(5)
    for x in rng.choice(32, size=12, replace=False):
        cw.accumulate(int(x), float(rng.normal()))
    ranking = decode(cw)
    scores = [s for _, s in ranking.entries]
    assert all(scores[i] >= scores[i + 1] for i in range(len(scores) - 1))


def test_accumulate_tracks_positions():
    cw = NoisyCodeword.empty(3)
    cw.accumulate(5, 1.5)
    cw.accumulate(5, -0.5)
    cw.accumulate(2, 2.0)
    assert cw.defined_positions == 2
    assert cw.position_map[5] == pytest.approx(1.0)
    assert cw.values[5] == pytest.approx(1.0)
    assert cw.values[0] == 0.0


@pytest.mark.parametrize("k", [4, 8, 10])
def test_decode_matches_exhaustive_argmax(k):
    # noisy, erased codewords: rank-1 must equal the brute-force argmax
    rng = np.random.default_rng(100 + k)
    n = 1 << k
    for _ in range(100):
        cw = NoisyCodeword.empty(k)
        n_defined = int(rng.integers(1, n + 1))
        for x in rng.choice(n, size=n_defined, replace=False):
            cw.accumulate(int(x), float(rng.normal()))
        scores = brute_force_wht(cw.values)
        best_brute = int(np.argmax(scores))  # argmax picks lowest index on ties
        assert decode(cw).best.value == best_brute


@settings(max_examples=30)
@given(st.lists(st.floats(-10, 10), min_size=16, max_size=16))
def test_fwht_linearity(vals):
    v = np.array(vals)
    assert np.allclose(fwht(2.0 * v), 2.0 * fwht(v), atol=1e-9)
