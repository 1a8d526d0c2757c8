"""Finite-size corrections: how far generation-run statistics may drift from
what the test runs observed, and the worst POVM inside that drift.

The deviation bounds come from random sampling without replacement. For a
frequency ``e`` seen in ``n_i`` test runs, the probability that the same
quantity over ``n_0`` generation runs exceeds ``e + theta`` is at most::

    prefactor * 2 ** (-(n_i + n_0) * xi(theta))

with ``xi`` built from the binary Shannon entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .boxmin import minimize_randomness, probe_box
from .core import PLUS, InvalidInput, PovmPair
from .tomography import TomographyResult, predicted_frequencies

__all__ = [
    "FluctuationInput",
    "DeviationBound",
    "shannon_entropy_binary",
    "xi_unscaled",
    "xi_scaled",
    "failure_probability",
    "log2_failure_probability",
    "deviation_for_epsilon",
    "worst_case_pair",
]

KINDS = ("unscaled", "scaled")


def shannon_entropy_binary(p):
    """``H(p) = -p log2 p - (1-p) log2(1-p)`` with ``H(0) = H(1) = 0``; vectorized."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise InvalidInput("probability outside [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p)
    h = np.where((p > 0) & (p < 1), h, 0.0)
    return float(h) if h.ndim == 0 else h


def _xi(y, theta, ni, n0):
    frac = n0 / (n0 + ni)
    gap = shannon_entropy_binary(y + frac * theta) - (
        ni * shannon_entropy_binary(y) + n0 * shannon_entropy_binary(y + theta)
    ) / (n0 + ni)
    # nonnegative by concavity of H; drop rounding noise below zero
    return np.maximum(gap, 0.0)


def _floor_zero(e, ni):
    # e = 0 breaks the prefactor; substitute 1/n_i
    return np.where(np.asarray(e) <= 0.0, 1.0 / np.asarray(ni, dtype=float), e)


def _check_counts(ni, n0):
    if np.any(np.asarray(ni) < 1) or np.any(np.asarray(n0) < 1):
        raise InvalidInput("sample counts must be at least 1")


def xi_unscaled(theta, n1, n0, e_x1):
    """Exponent for a frequency already in ``[0, 1]``."""
    _check_counts(n1, n0)
    e = _floor_zero(e_x1, n1)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(e + theta > 1.0 + 1e-15):
        raise InvalidInput("e_x1 + theta must stay within [0, 1]")
    out = _xi(e, np.minimum(theta, 1.0 - e), n1, n0)
    return float(out) if np.ndim(out) == 0 else out


def xi_scaled(theta, ni, n0, e_xi):
    """Exponent after mapping a ``[-1, 1]`` quantity to ``y = (1 + e) / 2``.

    The shift ``theta`` is applied to ``y`` unchanged.
    """
    _check_counts(ni, n0)
    y = 0.5 * (1.0 + np.asarray(e_xi, dtype=float))
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(y + theta > 1.0 + 1e-15):
        raise InvalidInput("(1 + e_xi)/2 + theta must stay within [0, 1]")
    out = _xi(y, np.minimum(theta, 1.0 - y), ni, n0)
    return float(out) if np.ndim(out) == 0 else out


def log2_failure_probability(kind, theta, ni, n0, e):
    """``log2`` of the sampling bound before capping at 1; vectorized."""
    ni = np.asarray(ni, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    if kind == "unscaled":
        e = _floor_zero(e, ni)
        xi = xi_unscaled(theta, ni, n0, e)
        with np.errstate(divide="ignore"):
            pre = 0.5 * (np.log2(ni + n0) - np.log2(ni * n0 * e * (1.0 - e)))
    elif kind == "scaled":
        e = np.asarray(e, dtype=float)
        xi = xi_scaled(theta, ni, n0, e)
        with np.errstate(divide="ignore"):
            pre = 2.0 + 0.5 * (np.log2(ni + n0) - np.log2(ni * n0 * (1.0 + e) * (1.0 - e)))
    else:
        raise InvalidInput(f"unknown bound kind {kind!r}")
    return pre - (ni + n0) * xi


def failure_probability(kind, theta, ni, n0, e):
    """Sampling bound on ``Prob(e_z > e_x + theta)``, capped at 1."""
    lg = np.minimum(log2_failure_probability(kind, theta, ni, n0, e), 0.0)
    out = np.exp2(lg)
    return float(out) if np.ndim(out) == 0 else out


def _theta_max(kind, e, ni):
    if kind == "unscaled":
        return 1.0 - _floor_zero(e, ni)
    return 0.5 * (1.0 - np.asarray(e, dtype=float))


def invert_bound(kind, ni, n0, e, epsilon, tol: float = 1e-12):
    """Smallest ``theta`` with bound ``<= epsilon`` by vectorized bisection.

    Returns ``(theta, saturated)``; saturated entries hit the edge of the
    domain, where the deviation event is impossible anyway.
    """
    e = np.asarray(e, dtype=float)
    ni = np.broadcast_to(np.asarray(ni, dtype=float), e.shape)
    n0 = np.broadcast_to(np.asarray(n0, dtype=float), e.shape)
    target = math.log2(epsilon)
    hi = np.asarray(_theta_max(kind, e, ni), dtype=float)
    lo = np.zeros_like(hi)
    saturated = log2_failure_probability(kind, hi, ni, n0, e) > target
    ok0 = log2_failure_probability(kind, lo, ni, n0, e) <= target
    for _ in range(200):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        good = log2_failure_probability(kind, mid, ni, n0, e) <= target
        hi = np.where(good, mid, hi)
        lo = np.where(good, lo, mid)
    theta = np.where(ok0, 0.0, hi)
    return theta, saturated


@dataclass(frozen=True)
class FluctuationInput:
    """Counts and test frequencies for the four probes (probe order)."""

    n_test: tuple[int, int, int, int]
    n_gen: int
    observed: tuple[float, float, float, float]
    epsilon: float

    def __post_init__(self):
        if len(self.n_test) != 4 or len(self.observed) != 4:
            raise InvalidInput("need four probes")
        if min(self.n_test) < 1 or self.n_gen < 1:
            raise InvalidInput("all counts must be at least 1")
        if any(not 0.0 <= e <= 1.0 for e in self.observed):
            raise InvalidInput("frequencies must lie in [0, 1]")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInput("epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class DeviationBound:
    """Two-sided per-probe deviation ``theta``; frequencies outside
    ``[e - theta_lower, e + theta_upper]`` occur with probability at most
    ``epsilon_achieved`` summed over both sides."""

    theta_upper: tuple[float, ...]
    theta_lower: tuple[float, ...]
    epsilon_achieved: tuple[float, ...]
    saturated: tuple[bool, ...]

    @property
    def theta(self) -> tuple[float, ...]:
        return tuple(max(u, l) for u, l in zip(self.theta_upper, self.theta_lower))

    @classmethod
    def zero(cls) -> "DeviationBound":
        return cls((0.0,) * 4, (0.0,) * 4, (0.0,) * 4, (False,) * 4)

    def to_dict(self) -> dict:
        return {
            "theta": list(self.theta),
            "theta_upper": list(self.theta_upper),
            "theta_lower": list(self.theta_lower),
            "epsilon_achieved": list(self.epsilon_achieved),
            "saturated": list(self.saturated),
        }


def deviation_for_epsilon(
    inp: FluctuationInput, kinds: tuple[str, ...] = ("unscaled",) * 4
) -> DeviationBound:
    """Per-probe deviations meeting a total failure probability ``epsilon``.

    ``epsilon`` is split evenly over four probes and two sides. The lower
    side reuses the upper-side bound after relabeling 0 and 1.
    """
    share = inp.epsilon / 8.0
    e = np.asarray(inp.observed, dtype=float)
    ni = np.asarray(inp.n_test, dtype=float)
    up, lo, achieved, sat = [], [], [], []
    for k in range(4):
        kind = kinds[k]
        if kind not in KINDS:
            raise InvalidInput(f"unknown bound kind {kind!r}")
        t_up, s_up = invert_bound(kind, ni[k], inp.n_gen, e[k], share)
        t_lo, s_lo = invert_bound(kind, ni[k], inp.n_gen, 1.0 - e[k], share)
        t_up, t_lo = float(t_up), float(t_lo)
        eps = 0.0
        for t, ek, s in ((t_up, e[k], s_up), (t_lo, 1.0 - e[k], s_lo)):
            if not s:
                eps += failure_probability(kind, t, ni[k], inp.n_gen, ek)
        up.append(t_up)
        lo.append(t_lo)
        achieved.append(min(eps, 2 * share))
        sat.append(bool(s_up) or bool(s_lo))
    return DeviationBound(tuple(up), tuple(lo), tuple(achieved), tuple(sat))


def worst_case_pair(
    result: TomographyResult | PovmPair,
    bound: DeviationBound,
    n_grid: int = 4097,
) -> PovmPair:
    """Least random physical POVM whose probe statistics lie in the deviation box.

    The box is ``[e - theta_lower, e + theta_upper]`` per probe, clipped to
    ``[0, 1]``, around the observed frequencies (recovered from the raw
    unprojected solution) or, for a bare pair, its predicted frequencies.
    """
    if isinstance(result, TomographyResult):
        r = result.raw
        f = np.array([r[0] + r[3], r[0] - r[3], r[0] + r[1], r[0] + r[2]])
    else:
        f = predicted_frequencies(result)
    lo = np.clip(f - np.asarray(bound.theta_lower), 0.0, 1.0)
    hi = np.clip(f + np.asarray(bound.theta_upper), 0.0, 1.0)
    best = minimize_randomness(probe_box(lo, hi), axis=PLUS.vector, n_grid=n_grid)
    return best.pair
