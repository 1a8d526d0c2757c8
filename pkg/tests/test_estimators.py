import numpy as np
import pytest
from sklearn.base import clone

from mdiqrng.core import honest_lossy_pair
from mdiqrng.estimators import PovmTomography, RandomnessCertifier, ToeplitzExtractor
from mdiqrng.extraction import ExtractorSpec, toeplitz_extract


def samples(pair, n, seed):
    from mdiqrng.core import PROBES, born_prob

    rng = np.random.default_rng(seed)
    probes = rng.integers(0, 4, n)
    p0 = np.array([born_prob(PROBES[k], pair.f0) for k in range(4)])[probes]
    bits = (rng.random(n) >= p0).astype(int)
    return probes.reshape(-1, 1), bits


def test_tomography_estimator():
    pair = honest_lossy_pair(0.4)
    X, y = samples(pair, 200000, 0)
    est = PovmTomography().fit(X, y)
    assert est.pair_.f0.a == pytest.approx(pair.f0.a, abs=0.01)
    proba = est.predict_proba([[0], [1], [2], [3]])
    assert proba.shape == (4, 2)
    assert np.allclose(proba.sum(axis=1), 1)
    assert est.predict([[0], [1]]).tolist() == [0, 0]
    assert 0.0 <= est.score(X, y) <= 1.0


def test_tomography_estimator_rejects_bad_input():
    with pytest.raises(ValueError):
        PovmTomography().fit([[5], [0]], [0, 1])
    with pytest.raises(ValueError):
        PovmTomography().fit([[0], [1]], [0, 2])


def test_certifier():
    X, y = samples(honest_lossy_pair(1.0), 400000, 1)
    est = RandomnessCertifier(n_gen=10**6, epsilon=1e-6).fit(X, y)
    assert 0.5 < est.score() <= 1.0
    asym = RandomnessCertifier(epsilon=None).fit(X, y)
    assert asym.bits_per_run_ >= est.bits_per_run_


def test_params_and_clone():
    est = RandomnessCertifier(n_gen=5, epsilon=0.1, mu=0.02)
    assert est.get_params() == {"n_gen": 5, "epsilon": 0.1, "mu": 0.02}
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est
    ext = ToeplitzExtractor(output_length=3, seed="abc")
    assert clone(ext).get_params()["seed"] == "abc"


def test_extractor_transform():
    X = np.random.default_rng(0).integers(0, 2, (5, 8))
    ext = ToeplitzExtractor(output_length=4, seed="b3a0").fit(X)
    out = ext.transform(X)
    assert out.shape == (5, 4)
    spec = ExtractorSpec(8, 4)
    assert np.array_equal(out[2], toeplitz_extract(X[2], ext.seed_, spec))
    r1 = ToeplitzExtractor(4, random_state=3).fit_transform(X)
    r2 = ToeplitzExtractor(4, random_state=3).fit_transform(X)
    assert np.array_equal(r1, r2)
    with pytest.raises(ValueError):
        ext.transform(X[:, :7])
