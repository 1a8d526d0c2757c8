"""Phase-randomized coherent-state source.

The source emits vacuum, one photon or several photons with Poisson
weights. Vacuum and single-photon pulses are merged into one effective qubit
channel of weight ``(1 + mu) e^-mu``; multi-photon pulses are assumed to
yield no randomness and to push the observed statistics in whichever
direction hurts most. Probes here follow the unpolarized / x / y / z
convention: ``I/2, (I + sx)/2, (I + sy)/2, (I + sz)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .boxmin import LinearBox, minimize_randomness
from .core import PLUS, InvalidInput, PovmPair

__all__ = [
    "SourceModel",
    "PhotonFractions",
    "FeasibleBox",
    "RateReport",
    "photon_fractions",
    "honest_model_probabilities",
    "feasible_box",
    "feasible_box_from_intervals",
    "worst_case_rate",
    "rate_at_intensity",
    "optimize_intensity",
    "rate_sweep",
    "db_to_eta",
    "eta_to_db",
]

COHERENT_PROBES = ("I", "x", "y", "z")


def db_to_eta(db):
    return 10.0 ** (-np.asarray(db, dtype=float) / 10.0)


def eta_to_db(eta):
    with np.errstate(divide="ignore"):
        return -10.0 * np.log10(np.asarray(eta, dtype=float))


@dataclass(frozen=True)
class SourceModel:
    mu: float
    eta: float
    rep_rate: float = 1e8
    no_click: int = 1

    def __post_init__(self):
        if self.mu < 0:
            raise InvalidInput("mu must be non-negative")
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidInput("eta must lie in [0, 1]")
        if self.rep_rate <= 0:
            raise InvalidInput("rep_rate must be positive")
        if self.no_click not in (0, 1):
            raise InvalidInput("no_click must be 0 or 1")


@dataclass(frozen=True)
class PhotonFractions:
    vacuum: float
    single: float
    multi: float

    @property
    def usable(self) -> float:
        """Weight of the merged vacuum + single-photon channel."""
        return self.vacuum + self.single


def _multi_fraction(mu: float) -> float:
    # 1 - e^-mu (1 + mu) cancels badly for small mu; sum the Poisson tail instead
    if mu < 0.1:
        term, total = mu * mu / 2.0, 0.0
        k = 2
        while term > 1e-300 and k < 60:
            total += term
            k += 1
            term *= mu / k
        return math.exp(-mu) * total
    return 1.0 - math.exp(-mu) * (1.0 + mu)


def photon_fractions(mu: float) -> PhotonFractions:
    if mu < 0:
        raise InvalidInput("mu must be non-negative")
    if math.isinf(mu):
        return PhotonFractions(0.0, 0.0, 1.0)
    return PhotonFractions(math.exp(-mu), mu * math.exp(-mu), _multi_fraction(mu))


def honest_model_probabilities(model: SourceModel) -> np.ndarray:
    """Intervals for ``Prob(0)`` per probe of an honest lossy Z detector.

    Returns a ``(4, 2)`` array of ``[low, high]``; the ends correspond to
    multi-photon pulses always giving 1 or always giving 0.
    """
    fr = photon_fractions(model.mu)
    eta = model.eta
    # output-0 probability of one photon for each probe
    if model.no_click == 1:
        single = np.array([eta / 2, eta / 2, eta / 2, eta])
        vacuum = 0.0
    else:
        single = np.array([1 - eta / 2, 1 - eta / 2, 1 - eta / 2, 1.0])
        vacuum = 1.0
    low = vacuum * fr.vacuum + single * fr.single
    return np.clip(np.stack([low, low + fr.multi], axis=1), 0.0, 1.0)


@dataclass
class FeasibleBox:
    """Admissible region for the merged vacuum + single-photon POVM.

    ``a1`` lies in ``a1_interval``; for the x, y and z probes the sums
    ``a1 + a1 n_k`` lie in ``probe_intervals``. Because these sums share
    ``a1``, the implied intervals on ``a1 n_k`` alone are reported in
    ``weighted_intervals`` but the search uses the exact coupled form.
    """

    mu: float
    a1_interval: tuple[float, float]
    probe_intervals: tuple[tuple[float, float], ...]
    linear: LinearBox = field(repr=False)

    @property
    def weighted_intervals(self) -> tuple[tuple[float, float], ...]:
        lo_a, hi_a = self.a1_interval
        return tuple((lo - hi_a, hi - lo_a) for lo, hi in self.probe_intervals)

    def to_dict(self) -> dict:
        names = ("a1_nx", "a1_ny", "a1_nz")
        out = {"mu": self.mu, "a1": list(self.a1_interval)}
        out.update({k: list(iv) for k, iv in zip(names, self.weighted_intervals)})
        return out


def _is_feasible(box: LinearBox, n_grid: int = 4097) -> bool:
    lo, hi = max(0.0, box.a_lo), min(1.0, box.a_hi)
    if lo > hi:
        return False
    grid = np.unique(np.concatenate([np.linspace(lo, hi, n_grid), [0.5] if lo <= 0.5 <= hi else []]))
    return bool(np.any(box.closest_to_zero(grid)[1]))


def feasible_box_from_intervals(p_low, p_high, mu: float) -> FeasibleBox:
    """Parameter region consistent with any observed vector in ``[p_low, p_high]``.

    For each probe the merged channel must satisfy
    ``P - multi <= (a1 + a1 n.r) (1 + mu) e^-mu <= P``.
    """
    p_low = np.asarray(p_low, dtype=float)
    p_high = np.asarray(p_high, dtype=float)
    if p_low.shape != (4,) or p_high.shape != (4,):
        raise InvalidInput("need four probe probabilities")
    if np.any(p_low < 0) or np.any(p_high > 1) or np.any(p_low > p_high):
        raise InvalidInput("probabilities must satisfy 0 <= low <= high <= 1")
    fr = photon_fractions(mu)
    k, m = fr.usable, fr.multi
    lo = np.clip((p_low - m) / k, 0.0, 1.0)
    hi = np.clip(p_high / k, 0.0, 1.0)
    box = LinearBox(float(lo[0]), float(hi[0]))
    for comp in range(3):
        box.lower[comp].append((float(lo[comp + 1]), -1.0))
        box.upper[comp].append((float(hi[comp + 1]), -1.0))
    if not _is_feasible(box):
        raise InvalidInput(
            f"empty feasible box at mu={mu:g}: statistics inconsistent with the source model"
        )
    probe_iv = tuple((float(lo[i]), float(hi[i])) for i in (1, 2, 3))
    return FeasibleBox(mu, (float(lo[0]), float(hi[0])), probe_iv, box)


def feasible_box(observed, mu: float) -> FeasibleBox:
    """Region for one observed vector of ``Prob(0 | probe)``."""
    observed = np.asarray(observed, dtype=float)
    return feasible_box_from_intervals(observed, observed, mu)


@dataclass(frozen=True)
class RateReport:
    mu_star: float
    bits_per_pulse: float
    bits_per_second: float
    box: FeasibleBox | None
    worst_pair: PovmPair | None
    eta: float | None = None
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "eta_db": None if self.eta is None else float(eta_to_db(self.eta)),
            "mu_star": self.mu_star,
            "bits_per_pulse": self.bits_per_pulse,
            "bits_per_second": self.bits_per_second,
            "box": None if self.box is None else self.box.to_dict(),
            "worst_pair": None if self.worst_pair is None else self.worst_pair.as_dict(),
            "diagnostic": self.diagnostic,
        }


def worst_case_rate(
    box: FeasibleBox, mu: float | None = None, entropy: str = "min", rep_rate: float = 1.0
) -> RateReport:
    """Least randomness over ``box`` times the merged-channel weight ``(1+mu)e^-mu``.

    ``entropy="shannon"`` evaluates the Shannon-entropy variant of the bound.
    """
    mu = box.mu if mu is None else mu
    try:
        best = minimize_randomness(box.linear, axis=PLUS.vector, entropy=entropy)
    except InvalidInput as exc:
        return RateReport(mu, 0.0, 0.0, box, None, diagnostic=str(exc))
    bits = photon_fractions(mu).usable * best.bits
    return RateReport(mu, bits, bits * rep_rate, box, best.pair)


_OBSERVED_MODES = ("worst", "lower", "upper", "midpoint")


def _observed_interval(iv: np.ndarray, mode: str):
    if mode == "worst":
        return iv[:, 0], iv[:, 1]
    if mode == "lower":
        return iv[:, 0], iv[:, 0]
    if mode == "upper":
        return iv[:, 1], iv[:, 1]
    if mode == "midpoint":
        mid = iv.mean(axis=1)
        return mid, mid
    raise InvalidInput(f"observed mode must be one of {_OBSERVED_MODES}")


def rate_at_intensity(
    eta: float,
    mu: float,
    rep_rate: float = 1e8,
    no_click: int = 1,
    observed: str = "worst",
    entropy: str = "min",
) -> RateReport:
    """Certified rate of an honest detector of efficiency ``eta`` at intensity ``mu``.

    ``observed="worst"`` lets every probe's multi-photon contribution sit
    anywhere in its range, so the box is the union over all admissible
    observations; the other modes fix one observed vector.
    """
    model = SourceModel(mu, eta, rep_rate, no_click)
    if eta == 0.0 or mu == 0.0:
        return RateReport(mu, 0.0, 0.0, None, None, eta, "no single-photon signal")
    lo, hi = _observed_interval(honest_model_probabilities(model), observed)
    try:
        box = feasible_box_from_intervals(lo, hi, mu)
    except InvalidInput as exc:
        return RateReport(mu, 0.0, 0.0, None, None, eta, str(exc))
    rep = worst_case_rate(box, mu, entropy, rep_rate)
    return RateReport(
        mu, rep.bits_per_pulse, rep.bits_per_second, box, rep.worst_pair, eta, rep.diagnostic
    )


def default_mu_grid(eta: float, points: int = 241) -> np.ndarray:
    """Log-spaced intensities from ``1e-4 eta`` to ``min(2, 4 eta)``."""
    top = min(2.0, 4.0 * max(eta, 1e-12))
    return np.geomspace(top * 2.5e-5, top, points)


def optimize_intensity(
    eta: float,
    mu_grid=None,
    rep_rate: float = 1e8,
    no_click: int = 1,
    observed: str = "worst",
    entropy: str = "min",
) -> RateReport:
    """Intensity maximizing the certified rate, grid search then a bounded
    scalar refinement between the neighbours of the best grid point."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidInput("eta must lie in [0, 1]")
    grid = default_mu_grid(eta) if mu_grid is None else np.sort(np.asarray(mu_grid, dtype=float))
    if grid.size == 0:
        raise InvalidInput("mu grid is empty")

    def at(mu):
        return rate_at_intensity(eta, float(mu), rep_rate, no_click, observed, entropy)

    reports = [at(mu) for mu in grid]
    rates = np.array([r.bits_per_pulse for r in reports])
    i = int(np.argmax(rates))
    best = reports[i]
    if rates[i] > 0 and grid.size > 2:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(
            lambda mu: -at(mu).bits_per_pulse,
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-9 * hi},
        )
        cand = at(res.x)
        if cand.bits_per_pulse > best.bits_per_pulse:
            best = cand
    return best


def rate_sweep(
    eta_values,
    rep_rate: float = 1e8,
    no_click: int = 1,
    observed: str = "worst",
    entropy: str = "min",
) -> list[RateReport]:
    """One optimized report per transmittance, in input order."""
    return [
        optimize_intensity(float(eta), None, rep_rate, no_click, observed, entropy)
        for eta in eta_values
    ]


def sweep_rows(reports) -> list[dict]:
    return [
        {
            "eta": r.eta,
            "eta_db": float(eta_to_db(r.eta)),
            "mu_star": r.mu_star,
            "bits_per_pulse": r.bits_per_pulse,
            "bits_per_second": r.bits_per_second,
        }
        for r in reports
    ]
