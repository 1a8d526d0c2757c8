import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdiqrng.core import (
    IDEAL_Z,
    PLUS,
    WHITE_NOISE,
    ZERO,
    BlochState,
    InvalidInput,
    PovmEffect,
    PovmPair,
    canonicalize,
    decomposition_randomness,
    example_decomposition,
    honest_lossy_pair,
)
from mdiqrng.randomness import (
    OracleConfig,
    average_povm,
    brute_force_decomposition,
    brute_force_randomness,
    certified_randomness,
    pair_randomness,
)

from conftest import povm_pairs, random_pairs

ATTACK = PovmPair(PovmEffect(0.75, (0, 0, 1 / 3)), PovmEffect(0.25, (0, 0, -1)))


def R(pair, state=PLUS):
    return certified_randomness(pair, state).bits_per_run


def test_exact_values():
    assert R(IDEAL_Z) == pytest.approx(1.0, abs=1e-12)
    assert R(WHITE_NOISE) == 0.0
    v = certified_randomness(ATTACK)
    assert v.bits_per_run == pytest.approx(0.5, abs=1e-12) and v.labeling_swapped
    # 1 - eta/2 is not exact in binary and the square root in the closed form
    # amplifies that rounding to ~1e-9 at small eta
    for eta in (0.01, 0.1, 0.5, 1.0):
        assert R(honest_lossy_pair(eta)) == pytest.approx(eta, abs=1e-9)
        assert R(honest_lossy_pair(eta, no_click=1)) == pytest.approx(eta, abs=1e-12)


def test_hand_evaluated_value():
    # a1 = 1/4, n perpendicular part 0.6: 2 * 0.25 * -log2(0.9)
    pair = PovmPair.from_weighted(0.25, 0.25 * np.array([0.3, 0.6, 0.0]))
    assert R(pair) == pytest.approx(-0.5 * math.log2(0.9), abs=1e-12)


def test_other_input_axis_uses_perpendicular_components():
    # rotating the input to |0> makes n_z the irrelevant component
    assert R(IDEAL_Z, ZERO) == pytest.approx(0.0, abs=1e-12)
    x_pvm = PovmPair(PovmEffect(0.5, (1, 0, 0)), PovmEffect(0.5, (-1, 0, 0)))
    assert R(x_pvm, ZERO) == pytest.approx(1.0)


def test_rejects_mixed_input():
    with pytest.raises(InvalidInput):
        certified_randomness(IDEAL_Z, BlochState((0.5, 0, 0)))


def test_oracle_config_validation():
    with pytest.raises(InvalidInput):
        OracleConfig(grid_resolution=4)
    with pytest.raises(InvalidInput):
        OracleConfig(max_branches=1)


def test_oracle_exact_cases():
    cfg = OracleConfig(16)
    assert brute_force_randomness(IDEAL_Z, PLUS, cfg) == pytest.approx(1.0, abs=1e-9)
    assert brute_force_randomness(WHITE_NOISE, PLUS, cfg) == pytest.approx(0.0, abs=1e-9)
    attack = canonicalize(ATTACK)[0]
    assert brute_force_randomness(attack, PLUS, cfg) == pytest.approx(0.5, abs=1e-9)
    assert brute_force_randomness(honest_lossy_pair(0.1), PLUS, cfg) == pytest.approx(0.1, abs=1e-9)


def test_oracle_witness_is_a_decomposition():
    pair = canonicalize(random_pairs(np.random.default_rng(3), 1)[0])[0]
    res = brute_force_decomposition(pair, PLUS, OracleConfig(24))
    assert res.residual <= 1e-6
    assert res.decomposition.c >= -1e-9
    assert decomposition_randomness(res.decomposition, PLUS) == pytest.approx(res.bits, abs=1e-6)


def test_oracle_gap_shrinks_with_resolution():
    pairs = [canonicalize(p)[0] for p in random_pairs(np.random.default_rng(7), 12)]
    gaps = {}
    for res in (16, 32, 64):
        cfg = OracleConfig(res)
        diffs = [brute_force_randomness(p, PLUS, cfg) - R(p) for p in pairs]
        assert min(diffs) >= -1e-6
        gaps[res] = max(diffs)
    assert gaps[64] <= gaps[32] <= gaps[16]
    assert gaps[64] <= 0.02


@given(povm_pairs())
def test_example_decomposition_never_beats_closed_form(pair):
    canon = canonicalize(pair)[0]
    bound = decomposition_randomness(example_decomposition(canon), PLUS)
    assert bound >= R(pair) - 1e-12


@given(povm_pairs(), povm_pairs(), st.floats(0, 1))
def test_convexity(a, b, lam):
    mix = average_povm([a, b], [lam, 1 - lam])
    assert lam * R(a) + (1 - lam) * R(b) >= R(mix) - 1e-9


@given(povm_pairs())
def test_label_invariance(pair):
    assert R(pair) == pytest.approx(R(pair.swapped()), abs=1e-15)


@given(povm_pairs())
def test_range_and_positivity(pair):
    r = R(pair)
    assert 0.0 <= r <= 1.0
    canon = canonicalize(pair)[0]
    perp = np.hypot(canon.f0.n[1], canon.f0.n[2])
    positive = canon.f0.a > 1e-12 and perp * canon.f0.a > 1e-12
    if positive:
        assert r > 0
    elif canon.f0.a == 0 or perp == 0:
        assert r == 0


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(0, 0.5), st.floats(0, 0.5))
def test_pair_randomness_monotone_in_perpendicular_weight(a1, w1, w2):
    s = min(a1, 1 - a1)
    lo, hi = sorted((w1 * 2 * s, w2 * 2 * s))
    lo, hi = min(lo, s), min(hi, s)
    assert pair_randomness(a1, lo) <= pair_randomness(a1, hi) + 1e-15


def test_pair_randomness_shannon_dominates_min():
    a1 = np.linspace(0.05, 0.5, 10)
    w = 0.7 * a1
    assert np.all(pair_randomness(a1, w, "shannon") >= pair_randomness(a1, w) - 1e-15)
    with pytest.raises(InvalidInput):
        pair_randomness(0.2, 0.1, "renyi")


def test_average_povm_examples():
    assert average_povm([ATTACK, ATTACK], [0.5, 0.5]) == ATTACK or np.allclose(
        average_povm([ATTACK, ATTACK], [0.5, 0.5]).f0.weighted, ATTACK.f0.weighted
    )
    m = average_povm([IDEAL_Z, WHITE_NOISE], [0.5, 0.5])
    assert m.f0.a == pytest.approx(0.5) and np.allclose(m.f0.n, (0, 0, 0.5))
    assert np.allclose(m.f1.n, (0, 0, -0.5))
    m = average_povm([ATTACK, IDEAL_Z], [0.5, 0.5])
    assert m.f0.a == pytest.approx(0.625)
    assert m.f0.weighted[2] == pytest.approx(0.5 * 0.25 + 0.5 * 0.5)
    with pytest.raises(InvalidInput):
        average_povm([IDEAL_Z, WHITE_NOISE], [0.5, 0.6])
    with pytest.raises(InvalidInput):
        average_povm([IDEAL_Z], [0.5, 0.5])
