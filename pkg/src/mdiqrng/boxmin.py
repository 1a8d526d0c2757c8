"""Worst-case randomness over a parameter region that is a box in probe space.

Both the finite-size analysis and the coherent-source analysis end with the
same problem: the output-0 probabilities of the probes are only known to lie
in intervals, and we need the smallest certified randomness of any physical
POVM consistent with them. Fixing ``a1``, every component of ``v = a1 n1``
is confined to an interval whose ends are piecewise-linear in ``a1``. The
randomness increases with ``|v_perp|`` and physicality ``|v| <= min(a1, 1-a1)``
is easiest with small ``|v|``, so each component is pinned to the point of
its interval nearest zero. What is left is a scalar search over ``a1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .core import TOL, InvalidInput, PovmPair
from .randomness import pair_randomness

Line = tuple[float, float]  # value = offset + slope * a1


@dataclass
class LinearBox:
    """``a_lo <= a1 <= a_hi`` and, per component of ``v``, ``max(lower) <= v_k <= min(upper)``."""

    a_lo: float
    a_hi: float
    lower: list[list[Line]] = field(default_factory=lambda: [[], [], []])
    upper: list[list[Line]] = field(default_factory=lambda: [[], [], []])

    def bounds(self, a):
        """Interval ends for each component at the given ``a1`` values, shape (3, len(a))."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        lo = np.full((3, a.size), -np.inf)
        hi = np.full((3, a.size), np.inf)
        for k in range(3):
            for off, slope in self.lower[k]:
                lo[k] = np.maximum(lo[k], off + slope * a)
            for off, slope in self.upper[k]:
                hi[k] = np.minimum(hi[k], off + slope * a)
        return lo, hi

    def closest_to_zero(self, a):
        """Return ``(v, ok)``: the least-norm ``v`` per ``a1`` and whether it is feasible."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        lo, hi = self.bounds(a)
        v = np.clip(0.0, lo, hi)
        s = np.minimum(a, 1.0 - a)
        ok = np.all(lo <= hi + TOL, axis=0) & (s >= -TOL)
        ok &= np.sqrt(np.sum(v * v, axis=0)) <= s + TOL
        return v, ok


@dataclass(frozen=True)
class BoxMinimum:
    bits: float
    a1: float
    v: tuple[float, float, float]

    @property
    def pair(self) -> PovmPair:
        v = np.array(self.v)
        s = min(self.a1, 1.0 - self.a1)
        norm = float(np.linalg.norm(v))
        if norm > s:
            v = v * (s / norm)
        return PovmPair.from_weighted(self.a1, v)


def minimize_randomness(
    box: LinearBox,
    axis=(1.0, 0.0, 0.0),
    n_grid: int = 4097,
    entropy: str = "min",
) -> BoxMinimum:
    """Smallest closed-form randomness over ``box`` for an input along ``axis``.

    A dense grid over ``a1`` is refined once by a bounded scalar search around
    the incumbent. Raises :class:`InvalidInput` when no physical point exists.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    a_lo, a_hi = max(0.0, box.a_lo), min(1.0, box.a_hi)
    if a_lo > a_hi + TOL:
        raise InvalidInput("empty feasible box: no admissible a1")
    a_hi = max(a_lo, a_hi)

    def objective(a):
        v, ok = box.closest_to_zero(a)
        along = axis @ v
        w = np.sqrt(np.maximum(np.sum(v * v, axis=0) - along * along, 0.0))
        r = pair_randomness(np.atleast_1d(a), w, entropy)
        return np.where(ok, r, np.inf), v

    grid = np.linspace(a_lo, a_hi, n_grid)
    extras = [x for x in (0.5,) if a_lo <= x <= a_hi]
    grid = np.unique(np.concatenate([grid, extras]))
    vals, vs = objective(grid)
    if not np.any(np.isfinite(vals)):
        raise InvalidInput("empty feasible box: no physical POVM matches the constraints")
    i = int(np.argmin(vals))
    best_a, best_r, best_v = grid[i], float(vals[i]), vs[:, i]
    if best_r > 0 and grid.size > 1:
        lo_a, hi_a = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(
            lambda x: float(np.minimum(objective(x)[0][0], 1e9)),
            bounds=(lo_a, hi_a),
            method="bounded",
            options={"xatol": 1e-13},
        )
        r_ref, v_ref = objective(res.x)
        if np.isfinite(r_ref[0]) and r_ref[0] < best_r:
            best_a, best_r, best_v = float(res.x), float(r_ref[0]), v_ref[:, 0]
    return BoxMinimum(max(0.0, best_r), float(best_a), tuple(float(x) for x in best_v))


def probe_box(lo, hi) -> LinearBox:
    """Box for the tomography probes ``(|0>, |1>, |+>, |+i>)``.

    ``f0 = a + v_z``, ``f1 = a - v_z``, ``f+ = a + v_x``, ``f+i = a + v_y``.
    """
    lo = np.clip(np.asarray(lo, dtype=float), 0.0, 1.0)
    hi = np.clip(np.asarray(hi, dtype=float), 0.0, 1.0)
    box = LinearBox(0.5 * (lo[0] + lo[1]), 0.5 * (hi[0] + hi[1]))
    # v_x from |+>, v_y from |+i>
    box.lower[0].append((lo[2], -1.0))
    box.upper[0].append((hi[2], -1.0))
    box.lower[1].append((lo[3], -1.0))
    box.upper[1].append((hi[3], -1.0))
    # v_z from both Z eigenstates
    box.lower[2] += [(lo[0], -1.0), (-hi[1], 1.0)]
    box.upper[2] += [(hi[0], -1.0), (-lo[1], 1.0)]
    return box
