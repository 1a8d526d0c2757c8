"""Loss-tolerant measurement-device-independent QRNG: tomography, certified
min-entropy, finite-size and coherent-source corrections, simulation and
extraction."""

from .core import (
    IDEAL_Z,
    ONE,
    PLUS,
    PLUS_I,
    PROBES,
    WHITE_NOISE,
    ZERO,
    BlochState,
    Decomposition,
    InvalidInput,
    PovmEffect,
    PovmPair,
    born_prob,
    canonicalize,
    decomposition_randomness,
    example_decomposition,
    honest_lossy_pair,
    min_entropy_binary,
    validate_povm,
)
from .randomness import (
    OracleConfig,
    RandomnessValue,
    average_povm,
    brute_force_randomness,
    certified_randomness,
)
from .tomography import (
    TomographyCounts,
    TomographyResult,
    predicted_frequencies,
    project_to_physical,
    solve_tomography,
)

__version__ = "0.1.0"
