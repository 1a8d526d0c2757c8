"""Measurement tomography of a two-outcome POVM from probe statistics.

Probes are always ordered ``(|0>, |1>, |+>, |+i>)``. Their output-0
probabilities are ``a1 + a1 n_z``, ``a1 - a1 n_z``, ``a1 + a1 n_x`` and
``a1 + a1 n_y``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import PROBE_NAMES, TOL, InvalidInput, PovmPair, check_povm

__all__ = [
    "TomographyCounts",
    "TomographyResult",
    "predicted_frequencies",
    "solve_tomography",
    "project_to_physical",
    "raw_from_frequencies",
]


@dataclass(frozen=True)
class TomographyCounts:
    """Per-probe trial and output-0 counts in probe order."""

    trials: tuple[int, int, int, int]
    zeros: tuple[int, int, int, int]

    def __post_init__(self):
        trials = tuple(int(t) for t in self.trials)
        zeros = tuple(int(z) for z in self.zeros)
        if len(trials) != 4 or len(zeros) != 4:
            raise InvalidInput("counts need exactly four probes")
        for name, t, z in zip(PROBE_NAMES, trials, zeros):
            if t < 0 or z < 0:
                raise InvalidInput(f"probe {name}: negative count")
            if z > t:
                raise InvalidInput(f"probe {name}: zeros ({z}) > trials ({t})")
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "zeros", zeros)

    def frequencies(self) -> np.ndarray:
        t = np.array(self.trials, dtype=float)
        if np.any(t == 0):
            missing = [n for n, k in zip(PROBE_NAMES, self.trials) if k == 0]
            raise InvalidInput(f"no trials for probe(s) {missing}")
        return np.array(self.zeros, dtype=float) / t

    def __add__(self, other: "TomographyCounts") -> "TomographyCounts":
        return TomographyCounts(
            tuple(a + b for a, b in zip(self.trials, other.trials)),
            tuple(a + b for a, b in zip(self.zeros, other.zeros)),
        )

    def to_dict(self) -> dict:
        return {
            name: {"trials": t, "zeros": z}
            for name, t, z in zip(PROBE_NAMES, self.trials, self.zeros)
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TomographyCounts":
        """Parse ``{"0": {"trials": .., "zeros": ..}, "1": .., "+": .., "+i": ..}``."""
        if not isinstance(doc, dict):
            raise InvalidInput("counts document must be a JSON object")
        doc = doc.get("probes", doc)
        trials, zeros = [], []
        for name in PROBE_NAMES:
            if name not in doc:
                raise InvalidInput(f"missing probe {name!r}")
            entry = doc[name]
            for key in ("trials", "zeros"):
                val = entry.get(key) if isinstance(entry, dict) else None
                if not isinstance(val, int) or isinstance(val, bool):
                    raise InvalidInput(f"probe {name!r}: field {key!r} must be an integer")
            trials.append(entry["trials"])
            zeros.append(entry["zeros"])
        return cls(tuple(trials), tuple(zeros))

    @classmethod
    def from_json(cls, text: str) -> "TomographyCounts":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class TomographyResult:
    pair: PovmPair
    raw: tuple[float, float, float, float]  # (a1, a1 n_x, a1 n_y, a1 n_z)
    projected: bool

    def to_dict(self) -> dict:
        f0 = self.pair.f0
        return {
            "a1": f0.a,
            "n": list(f0.n),
            "raw": dict(zip(("a1", "a1_nx", "a1_ny", "a1_nz"), self.raw)),
            "projected": self.projected,
            "pair": self.pair.as_dict(),
        }


def predicted_frequencies(pair: PovmPair) -> np.ndarray:
    """Output-0 probabilities for the four probes."""
    check_povm(pair)
    a = pair.f0.a
    vx, vy, vz = pair.f0.weighted
    return np.clip(np.array([a + vz, a - vz, a + vx, a + vy]), 0.0, 1.0)


def raw_from_frequencies(freqs) -> np.ndarray:
    """Invert the linear probe map; works row-wise on ``(..., 4)`` arrays."""
    f = np.asarray(freqs, dtype=float)
    a = 0.5 * (f[..., 0] + f[..., 1])
    vz = 0.5 * (f[..., 0] - f[..., 1])
    return np.stack([a, f[..., 2] - a, f[..., 3] - a, vz], axis=-1)


def _project_segment(p, q0, q1):
    d = q1 - q0
    t = np.clip(np.dot(p - q0, d) / np.dot(d, d), 0.0, 1.0)
    return q0 + t * d


def project_to_physical(raw) -> PovmPair:
    """Nearest physical pair in ``(a1, a1 n)`` space under the Euclidean metric.

    The feasible set ``|a1 n| <= min(a1, 1 - a1)`` is a double cone about the
    ``a1`` axis, so the projection keeps the direction of ``a1 n`` and solves a
    two-dimensional problem: project ``(a1, |a1 n|)`` onto the triangle with
    corners (0, 0), (1, 0) and (1/2, 1/2).
    """
    raw = np.asarray(raw, dtype=float)
    a, v = float(raw[0]), raw[1:4].copy()
    t = math.hypot(*v)
    bound = min(a, 1.0 - a)
    if 0.0 <= a <= 1.0 and t <= bound + TOL:
        if t > bound:  # rounding-level excess: pin to the boundary
            v = v * (bound / t)
        return PovmPair.from_weighted(a, v)
    p = np.array([a, t])
    corners = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.5, 0.5])]
    best = None
    for i in range(3):
        cand = _project_segment(p, corners[i], corners[(i + 1) % 3])
        dist = float(np.sum((cand - p) ** 2))
        if best is None or dist < best[0]:
            best = (dist, cand)
    a_new, t_new = best[1]
    v_new = v * (t_new / t) if t > 0 else np.zeros(3)
    return PovmPair.from_weighted(float(a_new), v_new)


def solve_tomography(freqs) -> TomographyResult:
    """Solve the probe system for ``(a1, a1 n)``, projecting if unphysical."""
    f = np.asarray(freqs, dtype=float)
    if f.shape != (4,):
        raise InvalidInput("need four frequencies")
    if np.any(~np.isfinite(f)) or np.any(f < -TOL) or np.any(f > 1 + TOL):
        raise InvalidInput(f"frequencies must lie in [0, 1], got {f.tolist()}")
    raw = raw_from_frequencies(np.clip(f, 0.0, 1.0))
    a, v = raw[0], raw[1:]
    norm, bound = float(np.linalg.norm(v)), min(a, 1.0 - a)
    physical = norm <= bound + TOL
    pair = project_to_physical(raw)
    return TomographyResult(pair, tuple(float(x) for x in raw), not physical)
