import numpy as np
import pytest
from hypothesis import strategies as st

from mdiqrng.core import PovmPair


def pair_from(a1, direction, frac):
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    d = d / norm if norm > 1e-12 else np.array([0.0, 0.0, 1.0])
    return PovmPair.from_weighted(a1, d * frac * min(a1, 1.0 - a1))


unit = st.floats(0.0, 1.0, allow_nan=False)
coord = st.floats(-1.0, 1.0, allow_nan=False)
directions = st.tuples(coord, coord, coord)


@st.composite
def povm_pairs(draw):
    return pair_from(draw(unit), draw(directions), draw(unit))


def random_pairs(rng, n):
    out = []
    for _ in range(n):
        a1 = rng.uniform()
        out.append(pair_from(a1, rng.normal(size=3), rng.uniform() ** 0.5))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def sampling_violation_rate(pair, n_test, n_gen, epsilon, n_exp, seed):
    """Fraction of simulated experiments where some probe's generation
    frequency falls outside ``[e_x - theta_lower, e_x + theta_upper]``.

    Test and generation outcomes are i.i.d. draws from the same device, so
    the test runs are a uniformly random subset of all runs.
    """
    from mdiqrng.finite_size import invert_bound
    from mdiqrng.tomography import predicted_frequencies

    p = predicted_frequencies(pair)
    g = np.random.default_rng(seed)
    share = epsilon / 8
    hit = np.zeros(n_exp, dtype=bool)
    for k in range(4):
        ex = g.binomial(n_test, p[k], n_exp) / n_test
        ez = g.binomial(n_gen, p[k], n_exp) / n_gen
        up, _ = invert_bound("unscaled", n_test, n_gen, ex, share)
        lo, _ = invert_bound("unscaled", n_test, n_gen, 1 - ex, share)
        hit |= (ez > ex + up) | (ez < ex - lo)
    return float(hit.mean())
