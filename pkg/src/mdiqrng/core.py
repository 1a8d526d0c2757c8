"""Qubit states and two-outcome POVMs in Bloch parametrization.

A density matrix is ``(I + r.sigma) / 2`` and a POVM effect is
``a (I + n.sigma)``, so every quantity below is plain real 3-vector
arithmetic. Nothing here builds complex matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TOL = 1e-9


class InvalidInput(ValueError):
    """Raised when a state, effect or POVM violates its physical constraints."""


def _vec3(v) -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise InvalidInput(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("vector has non-finite components")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class BlochState:
    """Qubit density matrix given by its Bloch vector ``r`` (x, y, z order)."""

    r: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "r", _vec3(self.r))
        if self.norm > 1 + TOL:
            raise InvalidInput(f"|r| = {self.norm:.12g} exceeds 1")

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.r)

    @property
    def norm(self) -> float:
        return math.hypot(*self.r)

    @property
    def is_pure(self) -> bool:
        return abs(self.norm - 1.0) <= TOL


ZERO = BlochState((0.0, 0.0, 1.0))
ONE = BlochState((0.0, 0.0, -1.0))
PLUS = BlochState((1.0, 0.0, 0.0))
PLUS_I = BlochState((0.0, 1.0, 0.0))

#: Tomography probe order used everywhere: |0>, |1>, |+>, |+i>.
PROBES = (ZERO, ONE, PLUS, PLUS_I)
PROBE_NAMES = ("0", "1", "+", "+i")


@dataclass(frozen=True)
class PovmEffect:
    """Effect ``a (I + n.sigma)``; positive and below identity when valid."""

    a: float
    n: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "n", _vec3(self.n))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.n)

    @property
    def norm(self) -> float:
        return math.hypot(*self.n)

    @property
    def weighted(self) -> np.ndarray:
        """The product ``a * n``, i.e. the sigma coefficients of the effect."""
        return self.a * self.vector

    def violations(self, tol: float = TOL) -> list[tuple[str, float]]:
        out = []
        if self.a < -tol:
            out.append(("a >= 0", -self.a))
        if self.norm > 1 + tol:
            out.append(("|n| <= 1", self.norm - 1))
        if self.a * (1 + self.norm) > 1 + tol:
            out.append(("a(1+|n|) <= 1", self.a * (1 + self.norm) - 1))
        return out


@dataclass(frozen=True)
class PovmPair:
    """Two-outcome POVM ``{F0, F1}``; ``f0`` produces bit 0."""

    f0: PovmEffect
    f1: PovmEffect

    @classmethod
    def from_weighted(cls, a1: float, v) -> "PovmPair":
        """Build the pair from ``a1`` and ``a1 * n1``; ``f1`` follows by completeness."""
        v = np.asarray(v, dtype=float)
        a2 = 1.0 - a1
        n1 = v / a1 if a1 > 0 else np.zeros(3)
        n2 = -v / a2 if a2 > 0 else np.zeros(3)
        return cls(PovmEffect(a1, n1), PovmEffect(a2, n2))

    @property
    def a1(self) -> float:
        return self.f0.a

    def swapped(self) -> "PovmPair":
        return PovmPair(self.f1, self.f0)

    def as_dict(self) -> dict:
        return {
            "f0": {"a": self.f0.a, "n": list(self.f0.n)},
            "f1": {"a": self.f1.a, "n": list(self.f1.n)},
        }


# Ideal sigma_z measurement and the white-noise POVM F0 = F1 = I/2.
IDEAL_Z = PovmPair(PovmEffect(0.5, (0, 0, 1)), PovmEffect(0.5, (0, 0, -1)))
WHITE_NOISE = PovmPair(PovmEffect(0.5), PovmEffect(0.5))


def honest_lossy_pair(eta: float, no_click: int = 0) -> PovmPair:
    """Ideal Z measurement with detection efficiency ``eta``; misses emit ``no_click``."""
    if not 0 <= eta <= 1:
        raise InvalidInput("eta must lie in [0, 1]")
    # The bit that is *not* the no-click bit only comes from a real click.
    if no_click == 0:
        return PovmPair.from_weighted(1 - eta / 2, (0, 0, eta / 2))
    return PovmPair.from_weighted(eta / 2, (0, 0, eta / 2))


def validate_povm(pair: PovmPair, tol: float = TOL) -> list[tuple[str, float]]:
    """Return every violated POVM constraint with its residual; empty means valid."""
    out = [(f"f0: {name}", r) for name, r in pair.f0.violations(tol)]
    out += [(f"f1: {name}", r) for name, r in pair.f1.violations(tol)]
    total = pair.f0.a + pair.f1.a - 1.0
    if abs(total) > tol:
        out.append(("a1 + a2 = 1", abs(total)))
    balance = np.abs(pair.f0.weighted + pair.f1.weighted).max()
    if balance > tol:
        out.append(("a1 n1 + a2 n2 = 0", float(balance)))
    return out


def check_povm(pair: PovmPair) -> None:
    bad = validate_povm(pair)
    if bad:
        detail = "; ".join(f"{name} (residual {r:.3g})" for name, r in bad)
        raise InvalidInput(f"invalid POVM: {detail}")


def born_prob(state: BlochState, effect: PovmEffect) -> float:
    """Probability ``tr(rho F) = a (1 + n.r)`` of the outcome attached to ``effect``."""
    if not isinstance(state, BlochState):
        state = BlochState(state)
    bad = effect.violations()
    if bad:
        raise InvalidInput(f"invalid effect: {bad}")
    p = effect.a * (1.0 + float(np.dot(effect.n, state.r)))
    return min(1.0, max(0.0, p))


def canonicalize(pair: PovmPair) -> tuple[PovmPair, bool]:
    """Relabel outcomes so that ``f0.a <= f1.a``.

    The returned flag is True when the labels were exchanged; bits produced
    under the original labeling must then be complemented.
    """
    if pair.f0.a > pair.f1.a:
        return pair.swapped(), True
    return pair, False


@dataclass(frozen=True)
class Decomposition:
    """Standard-form decomposition: ``F0 = sum p_i |psi_i><psi_i|``, the rest of
    the weight ``c`` goes to a deterministic ``c I`` term inside ``F1``."""

    c: float
    branches: tuple[tuple[float, BlochState], ...] = field(default_factory=tuple)

    def reconstruct_f0(self) -> tuple[float, np.ndarray]:
        """Return ``(a1, a1 * n1)`` of the F0 this decomposition produces."""
        a1 = 0.5 * sum(p for p, _ in self.branches)
        v = 0.5 * sum((p * s.vector for p, s in self.branches), np.zeros(3))
        return a1, v

    def violations(self, tol: float = TOL) -> list[tuple[str, float]]:
        out = []
        total = self.c + sum(p for p, _ in self.branches) - 1.0
        if abs(total) > tol:
            out.append(("c + sum p = 1", abs(total)))
        if self.c < -tol:
            out.append(("c >= 0", -self.c))
        for i, (p, s) in enumerate(self.branches):
            if p < -tol:
                out.append((f"p[{i}] >= 0", -p))
            if not s.is_pure:
                out.append((f"psi[{i}] pure", abs(s.norm - 1)))
        return out


def example_decomposition(pair: PovmPair) -> Decomposition:
    """The simple decomposition that splits F0 into isotropic and pure parts.

    ``F0 = a1(1-|n1|) I + a1(|n1| I + n1.sigma)``: the isotropic mass goes to
    the {|0>, |1>} PVM, the pure part to the PVM along ``n1``, and the surplus
    ``a2 - a1`` of F1 becomes the deterministic branch.
    """
    check_povm(pair)
    if pair.f0.a > pair.f1.a + TOL:
        raise InvalidInput("example_decomposition needs a canonical pair (a1 <= a2)")
    a1, norm = pair.f0.a, pair.f0.norm
    c1 = a1 * (1.0 - norm)
    c = max(0.0, 1.0 - 2.0 * a1)
    branches = []
    if c1 > 0:
        branches += [(c1, ZERO), (c1, ONE)]
    if a1 * norm > 0:
        direction = pair.f0.vector / norm
        branches.append((2.0 * a1 * norm, BlochState(direction)))
    return Decomposition(c, tuple(branches))


def min_entropy_binary(p: float) -> float:
    """Binary min-entropy ``-log2 max(p, 1-p)`` in bits."""
    if not -TOL <= p <= 1 + TOL:
        raise InvalidInput(f"probability {p} outside [0, 1]")
    return -math.log2(max(p, 1.0 - p, 0.5))


def decomposition_randomness(d: Decomposition, state: BlochState) -> float:
    """Randomness ``sum p_i H_min(|<in|psi_i>|^2)`` of ``d`` for a pure input."""
    if not state.is_pure:
        raise InvalidInput("randomness is defined for a pure input state only")
    total = 0.0
    for p, psi in d.branches:
        overlap = 0.5 * (1.0 + float(np.dot(state.r, psi.r)))
        total += p * min_entropy_binary(min(1.0, max(0.0, overlap)))
    return total
