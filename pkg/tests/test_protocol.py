import math

import numpy as np
import pytest

from mdiqrng.coherent import SourceModel
from mdiqrng.core import IDEAL_Z, ONE, PLUS, WHITE_NOISE, ZERO, BlochState, InvalidInput, PovmEffect, PovmPair
from mdiqrng.protocol import (
    FixedPovm,
    HonestLossy,
    PostselectionAttacker,
    ProtocolConfig,
    certify,
    device_response,
    empirical_min_entropy,
    extractable_length,
    run_protocol,
    seed_bits,
    simulate_runs,
)
from mdiqrng.randomness import average_povm, certified_randomness
from mdiqrng.tomography import TomographyCounts

ATTACK = PovmPair(PovmEffect(0.75, (0, 0, 1 / 3)), PovmEffect(0.25, (0, 0, -1)))


def test_config_validation_and_round_trip():
    with pytest.raises(InvalidInput):
        ProtocolConfig(100, test_fraction=0.0)
    with pytest.raises(InvalidInput):
        ProtocolConfig(100, probe_distribution=(0.5, 0.5, 0.5, 0.0))
    cfg = ProtocolConfig(1000, 0.2, epsilon=1e-6, source=SourceModel(0.01, 0.1))
    assert ProtocolConfig.from_dict(cfg.to_dict()) == cfg


def test_device_examples():
    rng = np.random.default_rng(0)
    ideal = HonestLossy(1.0)
    assert all(device_response(ideal, ZERO, rng) == 0 for _ in range(50))
    assert all(device_response(ideal, ONE, rng) == 1 for _ in range(50))
    lossless_miss = HonestLossy(0.0)
    assert all(device_response(lossless_miss, ONE, rng) == 0 for _ in range(20))
    noise = FixedPovm((WHITE_NOISE,))
    bits = noise.respond(np.tile(ZERO.vector, (20000, 1)), np.arange(20000), rng)
    assert abs(bits.mean() - 0.5) < 0.02
    attacker = PostselectionAttacker(np.array([0, 0], dtype=np.uint8))
    assert device_response(attacker, ONE, rng, run_index=0) == 0
    with pytest.raises(InvalidInput):
        device_response(attacker, ONE, rng, run_index=5)
    with pytest.raises(InvalidInput):
        device_response(ideal, BlochState((0.3, 0, 0)), rng)


def test_determinism_and_sharding():
    cfg = ProtocolConfig(50000, 0.3, shard_size=4096)
    dev = HonestLossy(0.4)
    a = simulate_runs(cfg, dev, seed=9)
    b = simulate_runs(cfg, dev, seed=9, workers=4)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    c = simulate_runs(cfg, dev, seed=10)
    assert not np.array_equal(a[1], c[1])
    total = sum(a[0].trials) + a[1].size
    assert total == cfg.n_runs


def test_shard_counts_merge():
    cfg = ProtocolConfig(3 * 4096, 0.3, shard_size=4096)
    counts, _ = simulate_runs(cfg, HonestLossy(0.4), seed=2)
    from mdiqrng.protocol import _simulate_shard

    parts = [_simulate_shard(cfg, HonestLossy(0.4), 2, s) for s in range(3)]
    merged = TomographyCounts(tuple(sum(p.trials for p in parts)), tuple(sum(p.zeros for p in parts)))
    assert merged == counts


def test_honest_ideal_device_is_near_one_bit():
    res = run_protocol(ProtocolConfig(10**6), HonestLossy(1.0), seed=1)
    assert 0.8 < res.certified_bits_per_run <= 1.0
    asym = certify(res.counts, res.n_gen, None)
    assert asym.bits_per_run > 0.99


def test_honest_lossy_device_approaches_eta():
    res = run_protocol(ProtocolConfig(10**6), HonestLossy(0.1), seed=1)
    assert 0.0 < res.certified_bits_per_run < 0.1
    asym = certify(res.counts, res.n_gen, None)
    assert asym.bits_per_run == pytest.approx(0.1, abs=0.02)


def test_attack_statistics():
    n = 4 * 10**5
    cfg = ProtocolConfig(n, 0.5, epsilon=1e-10)
    res = run_protocol(cfg, PostselectionAttacker.balanced(n, 3), seed=3)
    assert res.generation_bits.mean() == pytest.approx(0.25, abs=0.005)
    assert empirical_min_entropy(res.generation_bits) == pytest.approx(math.log2(4 / 3), abs=0.01)
    tomo = res.certification.tomography.pair
    assert tomo.f0.a == pytest.approx(0.75, abs=0.01)
    assert tomo.f0.n[2] == pytest.approx(1 / 3, abs=0.02)
    assert res.certified_bits_per_run <= 0.5 + 1e-9
    assert certify(res.counts, res.n_gen, None).bits_per_run == pytest.approx(0.5, abs=0.02)


def test_attack_certified_rate_grows_towards_half():
    rates = []
    for n in (10**4, 10**5, 10**6):
        cfg = ProtocolConfig(n, 0.5, epsilon=1e-10)
        rates.append(run_protocol(cfg, PostselectionAttacker.balanced(n, 0), seed=0).certified_bits_per_run)
    assert rates[0] < rates[1] < rates[2] <= 0.5


def test_collective_schedule_certifies_average():
    pairs = (IDEAL_Z, ATTACK)
    cfg = ProtocolConfig(4 * 10**5, 0.5)
    res = run_protocol(cfg, FixedPovm(pairs), seed=5)
    mix = average_povm(list(pairs), [0.5, 0.5])
    asym = certify(res.counts, res.n_gen, None).bits_per_run
    assert asym == pytest.approx(certified_randomness(mix).bits_per_run, abs=0.03)


def test_white_noise_fails_certification():
    res = run_protocol(ProtocolConfig(10**5), FixedPovm((WHITE_NOISE,)), seed=0)
    assert res.certified_bits_per_run == 0.0
    assert res.extractable_length == 0
    assert res.diagnostic


def test_coherent_source_run():
    cfg = ProtocolConfig(10**6, 0.2, epsilon=1e-3, source=SourceModel(0.012, 0.1), no_click_maps_to=1)
    res = run_protocol(cfg, HonestLossy(0.1, no_click=1), seed=0)
    assert 0 <= res.certified_bits_per_run <= 0.012 * math.exp(-0.012)


def test_extractable_length_rule():
    assert extractable_length(1000, 0.5, 2.0**-10) == 480
    assert extractable_length(10, 0.5, 2.0**-100) == 0
    res = run_protocol(ProtocolConfig(10**5, epsilon=1e-6), HonestLossy(1.0), seed=0)
    assert res.extractable_length <= res.n_gen
    assert res.raw_length_rn == pytest.approx(res.n_gen * res.certified_bits_per_run)


def test_seed_bits():
    assert seed_bits(1000, 100, (1.0,)) == pytest.approx(1000 * 0.4689955935892812)
    assert seed_bits(1000, 100) == pytest.approx(1000 * 0.4689955935892812 + 200)
    exact = seed_bits(1000, 100, (1.0,), exact=True)
    assert exact == pytest.approx(math.log2(math.comb(1000, 100)))


def test_empirical_min_entropy():
    assert empirical_min_entropy(np.zeros(10, np.uint8)) == 0.0
    coin = np.random.default_rng(0).integers(0, 2, 10**6)
    assert empirical_min_entropy(coin) == pytest.approx(1.0, abs=0.005)
    with pytest.raises(InvalidInput):
        empirical_min_entropy([])
