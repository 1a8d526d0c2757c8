"""scikit-learn style wrappers so tomography, certification and extraction
compose with pipelines, ``clone`` and ``get_params``/``set_params``.

Samples are test runs: ``X`` holds the probe index (0: |0>, 1: |1>,
2: |+>, 3: |+i>) and ``y`` the output bit.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import PROBES, born_prob
from .extraction import ExtractorSpec, bits_from_hex, toeplitz_extract
from .protocol import certify
from .tomography import TomographyCounts, solve_tomography


def _probe_column(X):
    X = check_array(X, ensure_2d=False, dtype=None)
    X = np.asarray(X).reshape(-1)
    if not np.all(np.isin(X, [0, 1, 2, 3])):
        raise ValueError("probe indices must be in {0, 1, 2, 3}")
    return X.astype(int)


def _counts(X, y) -> TomographyCounts:
    X, y = check_X_y(np.asarray(X).reshape(len(X), -1), y, dtype=None)
    probes = _probe_column(X[:, 0])
    y = np.asarray(y).astype(int)
    if not np.all(np.isin(y, [0, 1])):
        raise ValueError("output bits must be 0 or 1")
    trials = np.bincount(probes, minlength=4)
    zeros = np.bincount(probes[y == 0], minlength=4)
    return TomographyCounts(tuple(trials), tuple(zeros))


class PovmTomography(ClassifierMixin, BaseEstimator):
    """Fits a two-outcome POVM to (probe, bit) samples.

    After ``fit``: ``counts_``, ``result_`` (a TomographyResult), ``pair_``
    and ``projected_``. ``predict_proba`` gives outcome probabilities for
    probe indices under the fitted POVM.
    """

    def fit(self, X, y):
        self.counts_ = _counts(X, y)
        self.result_ = solve_tomography(self.counts_.frequencies())
        self.pair_ = self.result_.pair
        self.projected_ = self.result_.projected
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "pair_")
        probes = _probe_column(X)
        p0 = np.array([born_prob(PROBES[k], self.pair_.f0) for k in range(4)])[probes]
        return np.column_stack([p0, 1.0 - p0])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)


class RandomnessCertifier(BaseEstimator):
    """Certified bits per generation run from test-run samples.

    Parameters
    ----------
    n_gen : int
        Number of generation runs the certificate must cover.
    epsilon : float or None
        Finite-size failure probability; ``None`` certifies asymptotically.
    mu : float or None
        Mean photon number of a coherent source, ``None`` for single photons.
    """

    def __init__(self, n_gen=10**6, epsilon=2.0**-100, mu=None):
        self.n_gen = n_gen
        self.epsilon = epsilon
        self.mu = mu

    def fit(self, X, y):
        self.counts_ = _counts(X, y)
        self.certification_ = certify(self.counts_, self.n_gen, self.epsilon, self.mu)
        self.bits_per_run_ = self.certification_.bits_per_run
        return self

    def score(self, X=None, y=None):
        check_is_fitted(self, "bits_per_run_")
        return self.bits_per_run_


class ToeplitzExtractor(TransformerMixin, BaseEstimator):
    """Hashes each row of raw bits down to ``output_length`` bits.

    ``seed`` may be a hex string or bit array; when None a seed is drawn from
    ``random_state`` at fit time and kept in ``seed_``.
    """

    def __init__(self, output_length=1, seed=None, random_state=None):
        self.output_length = output_length
        self.seed = seed
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.uint8)
        self.spec_ = ExtractorSpec(X.shape[1], self.output_length)
        self.n_features_in_ = X.shape[1]
        n_seed = self.spec_.seed_length
        if self.seed is None:
            rng = check_random_state(self.random_state)
            self.seed_ = rng.randint(0, 2, n_seed).astype(np.uint8)
        elif isinstance(self.seed, str):
            self.seed_ = bits_from_hex(self.seed, n_seed)
        else:
            self.seed_ = np.asarray(self.seed, dtype=np.uint8)
        return self

    def transform(self, X):
        check_is_fitted(self, "seed_")
        X = check_array(X, dtype=np.uint8)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} bits per row, got {X.shape[1]}")
        return np.vstack([toeplitz_extract(row, self.seed_, self.spec_) for row in X])
