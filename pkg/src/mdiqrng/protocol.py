"""Monte Carlo simulation of the test/generation protocol.

Runs are split into fixed-size shards. Each shard draws from its own
generator derived from ``(seed, shard_index)``, so shards can be simulated
in any order or concurrently and still give identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coherent
from .boxmin import minimize_randomness, probe_box
from .core import PLUS, PROBES, InvalidInput, PovmPair, check_povm
from .finite_size import DeviationBound, FluctuationInput, deviation_for_epsilon
from .tomography import TomographyCounts, TomographyResult, predicted_frequencies, solve_tomography

__all__ = [
    "ProtocolConfig",
    "HonestLossy",
    "FixedPovm",
    "PostselectionAttacker",
    "ProtocolResult",
    "Certification",
    "run_protocol",
    "device_response",
    "certify",
    "empirical_min_entropy",
    "seed_bits",
    "expansion_report",
]

_PROBE_VECTORS = np.array([p.r for p in PROBES])
_GEN_PROBE = 2  # generation runs send |+>


@dataclass(frozen=True)
class ProtocolConfig:
    n_runs: int
    test_fraction: float = 0.1
    probe_distribution: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    epsilon: float = 2.0**-100
    source: coherent.SourceModel | None = None  # None means a single-photon source
    no_click_maps_to: int = 0
    shard_size: int = 1 << 16

    def __post_init__(self):
        if self.n_runs < 1:
            raise InvalidInput("n_runs must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise InvalidInput("test_fraction must lie in (0, 1)")
        p = np.asarray(self.probe_distribution, dtype=float)
        if p.shape != (4,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise InvalidInput("probe_distribution must be four probabilities summing to 1")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInput("epsilon must lie in (0, 1)")
        if self.no_click_maps_to not in (0, 1):
            raise InvalidInput("no_click_maps_to must be 0 or 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ProtocolConfig":
        doc = dict(doc)
        src = doc.pop("source", None)
        if isinstance(src, dict):
            src = coherent.SourceModel(**src)
        elif src not in (None, "single", "single-photon"):
            raise InvalidInput(f"unknown source {src!r}")
        else:
            src = None
        if "probe_distribution" in doc:
            doc["probe_distribution"] = tuple(doc["probe_distribution"])
        try:
            return cls(source=src, **doc)
        except TypeError as exc:
            raise InvalidInput(str(exc)) from exc

    def to_dict(self) -> dict:
        src = None
        if self.source is not None:
            s = self.source
            src = {"mu": s.mu, "eta": s.eta, "rep_rate": s.rep_rate, "no_click": s.no_click}
        return {
            "n_runs": self.n_runs,
            "test_fraction": self.test_fraction,
            "probe_distribution": list(self.probe_distribution),
            "epsilon": self.epsilon,
            "source": src,
            "no_click_maps_to": self.no_click_maps_to,
            "shard_size": self.shard_size,
        }


# ---------------------------------------------------------------- devices


def _photon_counts(mu, size, rng):
    return rng.poisson(mu, size) if mu is not None else np.ones(size, dtype=np.int64)


@dataclass(frozen=True)
class HonestLossy:
    """Ideal Z measurement behind a channel of transmittance ``eta``.

    With a multi-photon pulse every detected photon is measured; disagreeing
    clicks are resolved by a fair coin.
    """

    eta: float
    no_click: int = 0

    def respond(self, states, run_idx, rng, mu=None):
        n = len(states)
        photons = _photon_counts(mu, n, rng)
        detected = rng.binomial(photons, self.eta)
        p0 = 0.5 * (1.0 + states[:, 2])
        zeros = rng.binomial(detected, p0)
        bits = np.full(n, self.no_click, dtype=np.uint8)
        clicked = detected > 0
        all0 = clicked & (zeros == detected)
        all1 = clicked & (zeros == 0)
        mixed = clicked & ~all0 & ~all1
        bits[all0] = 0
        bits[all1] = 1
        bits[mixed] = rng.integers(0, 2, int(mixed.sum()), dtype=np.uint8)
        return bits


@dataclass(frozen=True)
class FixedPovm:
    """Device applying ``pairs[run % len(pairs)]`` to each run's probe.

    A schedule of several pairs models a collective attack; tomography then
    sees their average.
    """

    pairs: tuple[PovmPair, ...]

    def __post_init__(self):
        pairs = (self.pairs,) if isinstance(self.pairs, PovmPair) else tuple(self.pairs)
        if not pairs:
            raise InvalidInput("need at least one POVM")
        for p in pairs:
            check_povm(p)
        object.__setattr__(self, "pairs", pairs)

    def respond(self, states, run_idx, rng, mu=None):
        a = np.array([p.f0.a for p in self.pairs])
        v = np.array([p.f0.weighted for p in self.pairs])
        k = np.asarray(run_idx) % len(self.pairs)
        p0 = np.clip(a[k] + np.einsum("ij,ij->i", v[k], states), 0.0, 1.0)
        return (rng.random(len(states)) >= p0).astype(np.uint8)


@dataclass(frozen=True)
class PostselectionAttacker:
    """Loss-exploiting attacker: measure Z faithfully, keep the outcome when it
    matches the predetermined bit for that run, otherwise claim a loss."""

    stream: np.ndarray = field(repr=False)
    no_click: int = 0

    def __post_init__(self):
        s = np.asarray(self.stream, dtype=np.uint8)
        if s.ndim != 1 or np.any(s > 1):
            raise InvalidInput("predetermined stream must be a 1-D bit array")
        object.__setattr__(self, "stream", s)

    @classmethod
    def balanced(cls, n: int, seed: int, no_click: int = 0) -> "PostselectionAttacker":
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xE7E,)))
        return cls(rng.integers(0, 2, n, dtype=np.uint8), no_click)

    def respond(self, states, run_idx, rng, mu=None):
        run_idx = np.asarray(run_idx)
        if run_idx.size and run_idx.max() >= self.stream.size:
            raise InvalidInput("predetermined stream exhausted")
        outcome = (rng.random(len(states)) >= 0.5 * (1.0 + states[:, 2])).astype(np.uint8)
        wanted = self.stream[run_idx]
        return np.where(outcome == wanted, outcome, self.no_click).astype(np.uint8)


def device_response(device, probe, rng, run_index: int = 0, mu=None) -> int:
    """Single-run response of ``device`` to a pure probe state."""
    if not getattr(probe, "is_pure", False):
        raise InvalidInput("probe must be a pure BlochState")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    bits = device.respond(np.array([probe.r]), np.array([run_index]), rng, mu)
    return int(bits[0])


# ---------------------------------------------------------------- simulation


@dataclass
class _Shard:
    trials: np.ndarray
    zeros: np.ndarray
    gen_bits: np.ndarray


def _simulate_shard(cfg: ProtocolConfig, device, seed: int, shard: int) -> _Shard:
    start = shard * cfg.shard_size
    stop = min(cfg.n_runs, start + cfg.shard_size)
    n = stop - start
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shard,)))
    is_test = rng.random(n) < cfg.test_fraction
    probe = np.full(n, _GEN_PROBE)
    probe[is_test] = rng.choice(4, size=int(is_test.sum()), p=cfg.probe_distribution)
    mu = cfg.source.mu if cfg.source is not None else None
    bits = device.respond(_PROBE_VECTORS[probe], np.arange(start, stop), rng, mu)
    tp = probe[is_test]
    tb = bits[is_test]
    trials = np.bincount(tp, minlength=4)
    zeros = np.bincount(tp[tb == 0], minlength=4)
    return _Shard(trials, zeros, bits[~is_test])


def simulate_runs(cfg: ProtocolConfig, device, seed: int, workers: int = 1):
    """Return ``(counts, generation_bits)`` for the configured number of runs."""
    n_shards = -(-cfg.n_runs // cfg.shard_size)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            shards = list(pool.map(lambda s: _simulate_shard(cfg, device, seed, s), range(n_shards)))
    else:
        shards = [_simulate_shard(cfg, device, seed, s) for s in range(n_shards)]
    trials = sum((s.trials for s in shards), np.zeros(4, dtype=np.int64))
    zeros = sum((s.zeros for s in shards), np.zeros(4, dtype=np.int64))
    gen = np.concatenate([s.gen_bits for s in shards]) if shards else np.zeros(0, np.uint8)
    return TomographyCounts(tuple(trials), tuple(zeros)), gen


# ---------------------------------------------------------------- certification


@dataclass(frozen=True)
class Certification:
    tomography: TomographyResult
    bound: DeviationBound
    worst_pair: PovmPair | None
    bits_per_run: float
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            "tomography": self.tomography.to_dict(),
            "deviation": self.bound.to_dict(),
            "worst_pair": None if self.worst_pair is None else self.worst_pair.as_dict(),
            "bits_per_run": self.bits_per_run,
            "diagnostic": self.diagnostic,
        }


def certify(
    counts: TomographyCounts,
    n_gen: int,
    epsilon: float | None = 2.0**-100,
    mu: float | None = None,
) -> Certification:
    """Certified bits per generation run from test counts.

    ``epsilon=None`` skips the finite-size widening and certifies the
    (projected) tomography pair as if the frequencies were exact. With ``mu`` given, the
    probe statistics are read as coming from a coherent source and the
    multi-photon slack is added before the worst-case search.
    """
    freqs = counts.frequencies()
    tomo = solve_tomography(freqs)
    if epsilon is None:
        bound = DeviationBound.zero()
    else:
        inp = FluctuationInput(counts.trials, max(int(n_gen), 1), tuple(freqs), epsilon)
        bound = deviation_for_epsilon(inp)
    # Without a deviation allowance, sampling noise alone can put the raw
    # solution outside the physical set; use the projected pair instead.
    center = predicted_frequencies(tomo.pair) if epsilon is None else freqs
    lo = np.clip(center - np.asarray(bound.theta_lower), 0.0, 1.0)
    hi = np.clip(center + np.asarray(bound.theta_upper), 0.0, 1.0)
    weight = 1.0
    if mu is not None:
        fr = coherent.photon_fractions(mu)
        weight = fr.usable
        lo, hi = (lo - fr.multi) / weight, hi / weight
    try:
        best = minimize_randomness(probe_box(lo, hi), axis=PLUS.vector)
    except InvalidInput as exc:
        return Certification(tomo, bound, None, 0.0, str(exc))
    bits = weight * best.bits
    diag = "" if bits > 0 else "no certifiable randomness"
    return Certification(tomo, bound, best.pair, bits, diag)


@dataclass
class ProtocolResult:
    counts: TomographyCounts
    generation_bits: np.ndarray = field(repr=False)
    certified_bits_per_run: float
    extractable_length: int
    raw_length_rn: float
    seed_bits_consumed: float
    certification: Certification
    diagnostic: str = ""

    @property
    def n_gen(self) -> int:
        return int(self.generation_bits.size)

    def to_dict(self) -> dict:
        return {
            "counts": self.counts.to_dict(),
            "n_gen": self.n_gen,
            "generation_ones_fraction": float(self.generation_bits.mean()) if self.n_gen else None,
            "empirical_min_entropy": empirical_min_entropy(self.generation_bits) if self.n_gen else None,
            "certified_bits_per_run": self.certified_bits_per_run,
            "raw_length_rn": self.raw_length_rn,
            "extractable_length": self.extractable_length,
            "seed_bits_consumed": self.seed_bits_consumed,
            "certification": self.certification.to_dict(),
            "diagnostic": self.diagnostic,
        }


def _h2(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def seed_bits(n_runs: int, n_test: int, probe_distribution=(0.25,) * 4, exact: bool = False) -> float:
    """Seed consumed to pick the test subset and the probes of test runs.

    By default the subset choice is charged ``n h(n_test / n)`` bits, the
    amortized cost of per-run Bernoulli selection. ``exact=True`` charges
    ``log2 C(n, n_test)``, the cost of drawing a subset of fixed size.
    """
    if exact:
        subset = (
            math.lgamma(n_runs + 1) - math.lgamma(n_test + 1) - math.lgamma(n_runs - n_test + 1)
        ) / math.log(2)
    else:
        subset = n_runs * _h2(n_test / n_runs)
    p = np.asarray(probe_distribution, dtype=float)
    p = p[p > 0]
    return subset + n_test * float(-(p * np.log2(p)).sum())


def extractable_length(n_gen: int, bits_per_run: float, epsilon: float) -> int:
    """``floor(n_gen R - 2 log2(1/epsilon))``, never negative."""
    return max(0, math.floor(n_gen * bits_per_run - 2.0 * math.log2(1.0 / epsilon)))


def run_protocol(cfg: ProtocolConfig, device, seed: int = 0, workers: int = 1) -> ProtocolResult:
    """Simulate every run, then certify from the test counts."""
    counts, gen = simulate_runs(cfg, device, seed, workers)
    n_test = int(sum(counts.trials))
    seed_cost = seed_bits(cfg.n_runs, n_test, cfg.probe_distribution)
    mu = cfg.source.mu if cfg.source is not None else None
    try:
        cert = certify(counts, gen.size, cfg.epsilon, mu)
    except InvalidInput as exc:
        tomo = TomographyResult(PovmPair.from_weighted(0.5, (0, 0, 0)), (0.5, 0, 0, 0), False)
        cert = Certification(tomo, DeviationBound.zero(), None, 0.0, str(exc))
    rate = cert.bits_per_run
    length = extractable_length(gen.size, rate, cfg.epsilon) if rate > 0 else 0
    diag = cert.diagnostic
    if length == 0 and not diag:
        diag = "certified entropy does not cover the extraction deduction"
    return ProtocolResult(counts, gen, rate, length, gen.size * rate, seed_cost, cert, diag)


def empirical_min_entropy(bits) -> float:
    """Plug-in min-entropy ``-log2 max(p0, p1)`` of a bit stream."""
    bits = np.asarray(bits)
    if bits.size == 0:
        raise InvalidInput("empty bit stream")
    p1 = float(np.count_nonzero(bits)) / bits.size
    return -math.log2(max(p1, 1.0 - p1))


def expansion_report(
    n_test_per_probe: int,
    n_gen_values,
    epsilon: float,
    pair: PovmPair,
) -> list[dict]:
    """Seed consumed versus certified output for growing generation counts.

    Uses the device's exact probe statistics as the observed frequencies, so
    only the finite-size widening depends on the counts.
    """
    freqs = tuple(float(x) for x in predicted_frequencies(pair))
    rows = []
    for n_gen in n_gen_values:
        n_gen = int(n_gen)
        n_test = 4 * n_test_per_probe
        counts = TomographyCounts(
            (n_test_per_probe,) * 4,
            tuple(int(round(f * n_test_per_probe)) for f in freqs),
        )
        cert = certify(counts, n_gen, epsilon)
        out_bits = extractable_length(n_gen, cert.bits_per_run, epsilon)
        subset = seed_bits(n_gen + n_test, n_test, (1.0,), exact=True)
        probes = seed_bits(n_gen + n_test, n_test) - seed_bits(n_gen + n_test, n_test, (1.0,))
        rows.append(
            {
                "n_gen": n_gen,
                "bits_per_run": cert.bits_per_run,
                "output_bits": out_bits,
                "subset_seed_bits": subset,
                "probe_seed_bits": probes,
                "ratio": out_bits / (subset + probes),
            }
        )
    return rows
