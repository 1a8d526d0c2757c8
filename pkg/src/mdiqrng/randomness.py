"""Certified randomness of a two-outcome qubit POVM.

Three routes to the same number:

* :func:`certified_randomness` evaluates the closed form
  ``2 a1 H_min((1 + sqrt(1 - |n_perp|^2)) / 2)`` in the canonical labeling.
* :func:`brute_force_randomness` minimizes over standard-form
  decompositions whose branch directions lie on a discretized Bloch sphere.
  It is a linear program and shares no code with the closed form.
* :func:`average_povm` forms the convex mixture seen by tomography under
  collective attacks; the closed form is convex over it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import (
    PLUS,
    TOL,
    BlochState,
    Decomposition,
    InvalidInput,
    PovmPair,
    canonicalize,
    check_povm,
    min_entropy_binary,
)

__all__ = [
    "RandomnessValue",
    "OracleConfig",
    "OracleResult",
    "min_entropy_binary",
    "perp_randomness",
    "pair_randomness",
    "certified_randomness",
    "brute_force_randomness",
    "brute_force_decomposition",
    "average_povm",
]


@dataclass(frozen=True)
class RandomnessValue:
    bits_per_run: float
    labeling_swapped: bool

    def __float__(self) -> float:
        return self.bits_per_run


@dataclass(frozen=True)
class OracleConfig:
    """Discretization of the brute-force search.

    ``grid_resolution`` is the number of polar and azimuthal subdivisions,
    so the candidate set holds roughly ``grid_resolution**2`` directions.
    """

    grid_resolution: int = 64
    max_branches: int = 4

    def __post_init__(self):
        if self.grid_resolution < 8:
            raise InvalidInput("grid_resolution must be at least 8")
        if self.max_branches < 2:
            raise InvalidInput("max_branches must be at least 2")


_SNAP = 8 * np.finfo(float).eps


def _h_min_vec(p):
    p = np.asarray(p, dtype=float)
    return -np.log2(np.maximum(np.maximum(p, 1.0 - p), 0.5))


def perp_randomness(n_perp):
    """``H_min((1 + sqrt(1 - n_perp^2)) / 2)``, the randomness of a normalized
    effect whose Bloch component orthogonal to the input axis is ``n_perp``."""
    n_perp = np.clip(np.abs(np.asarray(n_perp, dtype=float)), 0.0, 1.0)
    q = 0.5 * n_perp * n_perp / (1.0 + np.sqrt(1.0 - n_perp * n_perp))
    return -np.log1p(-q) / math.log(2.0)


def pair_randomness(a1, w_perp, entropy: str = "min"):
    """Closed form written in labeling-free variables.

    ``a1`` is the raw weight of F0 (either labeling) and ``w_perp`` the norm
    of ``a1 * n1`` orthogonal to the input axis; that norm is the same for F0
    and F1 by completeness. Vectorized over numpy inputs.

    ``entropy="shannon"`` swaps the binary min-entropy for the Shannon
    entropy. It is not a min-entropy certificate; use it only for comparison.
    """
    a1 = np.asarray(a1, dtype=float)
    s = np.minimum(a1, 1.0 - a1)
    w = np.abs(np.asarray(w_perp, dtype=float))
    # 1 - a1 is rarely exact, and the square root below turns a gap of one
    # ulp between s and w into ~1e-8; treat such points as on the boundary
    w = np.where((s - w <= _SNAP) & (w > 0.5 * s), s, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        n_perp = np.where(s > 0, w / np.where(s > 0, s, 1.0), 0.0)
    n_perp = np.clip(n_perp, 0.0, 1.0)
    root = np.sqrt(1.0 - n_perp * n_perp)
    # 1 - p written without cancellation, so tiny n_perp still gives h > 0
    q = 0.5 * n_perp * n_perp / (1.0 + root)
    if entropy == "min":
        h = -np.log1p(-q) / math.log(2.0)
    elif entropy == "shannon":
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(q > 0, -q * np.log(q) - (1.0 - q) * np.log1p(-q), 0.0) / math.log(2.0)
    else:
        raise InvalidInput(f"unknown entropy kind {entropy!r}")
    return 2.0 * np.maximum(s, 0.0) * h


def _input_axis(state: BlochState) -> np.ndarray:
    if not isinstance(state, BlochState):
        state = BlochState(state)
    if not state.is_pure:
        raise InvalidInput("certified randomness needs a pure input state")
    return state.vector / state.norm


def certified_randomness(pair: PovmPair, state: BlochState = PLUS) -> RandomnessValue:
    """Minimum randomness over every implementation of ``pair`` for a pure input.

    The pair is first relabeled so that ``a1 <= a2``; only the components of
    ``n1`` orthogonal to the input's Bloch axis enter.
    """
    axis = _input_axis(state)
    check_povm(pair)
    canon, swapped = canonicalize(pair)
    v = canon.f0.weighted
    w_perp = math.hypot(*(v - np.dot(v, axis) * axis))
    bits = float(pair_randomness(canon.f0.a, w_perp))
    return RandomnessValue(min(1.0, max(0.0, bits)), swapped)


def _sphere_grid(resolution: int) -> np.ndarray:
    """Latitude/longitude grid of unit vectors, poles included once."""
    theta = np.linspace(0.0, np.pi, resolution + 1)[1:-1]
    phi = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    t, p = np.meshgrid(theta, phi, indexing="ij")
    pts = np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)
    pts = pts.reshape(-1, 3)
    poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    return np.vstack([poles, pts])


@dataclass(frozen=True)
class OracleResult:
    bits: float
    decomposition: Decomposition
    residual: float
    n_candidates: int


def brute_force_decomposition(
    pair: PovmPair, state: BlochState = PLUS, cfg: OracleConfig = OracleConfig()
) -> OracleResult:
    """Search standard-form decompositions over a grid of branch directions.

    With F0 normalized to the state ``(I + n1.sigma)/2`` the branch weights
    ``w_j = p_j / (2 a1)`` must satisfy ``sum w_j = 1``, ``sum w_j m_j = n1``
    and ``w >= 0``; the objective ``sum w_j H_min((1 + m_j.r)/2)`` is linear in
    ``w``. The directions ``+-n1/|n1|`` are added to the grid so that every
    physical ``n1`` is reachable. The LP optimum has at most four branches.
    """
    axis = _input_axis(state)
    check_povm(pair)
    canon, _ = canonicalize(pair)
    a1 = canon.f0.a
    if a1 <= 0.0:
        return OracleResult(0.0, Decomposition(1.0, ()), 0.0, 0)
    n1 = canon.f0.vector
    dirs = _sphere_grid(cfg.grid_resolution)
    norm = float(np.linalg.norm(n1))
    if norm > 0:
        u = n1 / norm
        dirs = np.vstack([dirs, u, -u])
    cost = _h_min_vec(0.5 * (1.0 + dirs @ axis))
    a_eq = np.vstack([np.ones(len(dirs)), dirs.T])
    b_eq = np.concatenate([[1.0], n1])
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise InvalidInput(f"oracle LP failed: {res.message}")
    w = np.clip(res.x, 0.0, None)
    residual = float(np.abs(a_eq @ w - b_eq).max())
    keep = np.argsort(w)[::-1][: cfg.max_branches]
    keep = keep[w[keep] > 0]
    branches = tuple(
        (2.0 * a1 * float(w[j]), BlochState(dirs[j] / np.linalg.norm(dirs[j])))
        for j in keep
    )
    bits = 2.0 * a1 * float(cost @ w)
    return OracleResult(bits, Decomposition(1.0 - 2.0 * a1, branches), residual, len(dirs))


def brute_force_randomness(
    pair: PovmPair, state: BlochState = PLUS, cfg: OracleConfig = OracleConfig()
) -> float:
    """Brute-force value of the randomness; see :func:`brute_force_decomposition`."""
    out = brute_force_decomposition(pair, state, cfg)
    if out.residual > 1e-6:
        raise InvalidInput(f"oracle could not reconstruct F0 (residual {out.residual:.3g})")
    return out.bits


def average_povm(pairs, weights) -> PovmPair:
    """Convex combination ``sum_k w_k POVM_k`` taken effect by effect."""
    pairs = list(pairs)
    w = np.asarray(list(weights), dtype=float)
    if len(pairs) != len(w) or not pairs:
        raise InvalidInput("need one weight per pair")
    if np.any(w < -TOL) or abs(w.sum() - 1.0) > TOL:
        raise InvalidInput("weights must be a probability vector")
    for p in pairs:
        check_povm(p)
    a1 = float(sum(wk * p.f0.a for wk, p in zip(w, pairs)))
    v = sum((wk * p.f0.weighted for wk, p in zip(w, pairs)), np.zeros(3))
    return PovmPair.from_weighted(a1, v)

