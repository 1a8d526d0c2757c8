"""Toeplitz-hash randomness extraction and the packed bit-file format.

Seed layout for an ``m x n`` Toeplitz matrix (``m`` output bits, ``n``
input bits, seed of ``n + m - 1`` bits)::

    seed[0 : m]          first column, top to bottom   T[i, 0] = seed[i]
    seed[m : m + n - 1]  first row from column 1 on    T[0, j] = seed[m - 1 + j]

so ``T[i, j] = seed[i - j]`` when ``i >= j`` and ``seed[m - 1 + j - i]``
otherwise. The output is ``T x`` over GF(2).

Packed bit files hold an 8-byte big-endian unsigned bit count followed by
the bits, most significant bit first within each byte, zero-padded.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .core import InvalidInput

__all__ = [
    "ExtractorSpec",
    "toeplitz_matrix",
    "toeplitz_extract",
    "pack_bits",
    "unpack_bits",
    "write_bitfile",
    "read_bitfile",
    "bits_from_hex",
    "bits_to_hex",
]

_HEADER = struct.Struct(">Q")
_FFT_MIN = 1 << 12


@dataclass(frozen=True)
class ExtractorSpec:
    input_length: int
    output_length: int

    def __post_init__(self):
        if self.input_length < 1 or self.output_length < 0:
            raise InvalidInput("lengths must be non-negative and input_length >= 1")
        if self.output_length > self.input_length:
            raise InvalidInput("output_length cannot exceed input_length")

    @property
    def seed_length(self) -> int:
        return self.input_length + self.output_length - 1 if self.output_length else 0


def _as_bits(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.uint8).reshape(-1)
    if np.any(arr > 1):
        raise InvalidInput(f"{name} must contain only 0/1")
    return arr


def _diagonals(seed: np.ndarray, m: int, n: int) -> np.ndarray:
    """Diagonal values ``t[d + n - 1]`` for ``d = i - j`` in ``[-(n-1), m-1]``."""
    upper = seed[m:][::-1]  # d = -(n-1) .. -1
    return np.concatenate([upper, seed[:m]])


def toeplitz_matrix(seed, spec: ExtractorSpec) -> np.ndarray:
    seed = _as_bits(seed, "seed")
    m, n = spec.output_length, spec.input_length
    if seed.size != spec.seed_length:
        raise InvalidInput(f"seed must have {spec.seed_length} bits, got {seed.size}")
    t = _diagonals(seed, m, n)
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    return t[i - j + n - 1]


def toeplitz_extract(raw, seed, spec: ExtractorSpec) -> np.ndarray:
    """Hash ``raw`` to ``spec.output_length`` bits with the seeded Toeplitz matrix."""
    raw = _as_bits(raw, "raw")
    seed = _as_bits(seed, "seed")
    m, n = spec.output_length, spec.input_length
    if raw.size != n:
        raise InvalidInput(f"raw input must have {n} bits, got {raw.size}")
    if seed.size != spec.seed_length:
        raise InvalidInput(f"seed must have {spec.seed_length} bits, got {seed.size}")
    if m == 0:
        return np.zeros(0, dtype=np.uint8)
    if m * n <= _FFT_MIN * _FFT_MIN:
        return (toeplitz_matrix(seed, spec).astype(np.int64) @ raw).astype(np.uint8) & 1
    # y_i = sum_j t[i - j + n - 1] x_j is a slice of the full convolution t * x
    t = _diagonals(seed, m, n).astype(float)
    conv = fftconvolve(t, raw.astype(float))
    return np.rint(conv[n - 1 : n - 1 + m]).astype(np.int64).astype(np.uint8) & 1


def pack_bits(bits) -> bytes:
    bits = _as_bits(bits, "bits")
    return _HEADER.pack(bits.size) + np.packbits(bits, bitorder="big").tobytes()


def unpack_bits(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise InvalidInput("bit file shorter than its header")
    (n,) = _HEADER.unpack_from(blob)
    body = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size)
    if body.size != (n + 7) // 8:
        raise InvalidInput(f"header says {n} bits but payload has {body.size} bytes")
    return np.unpackbits(body, bitorder="big")[:n]


def write_bitfile(path, bits) -> None:
    """Write atomically through a temporary sibling file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(pack_bits(bits))
    tmp.replace(path)


def read_bitfile(path) -> np.ndarray:
    return unpack_bits(Path(path).read_bytes())


def bits_from_hex(text: str, length: int | None = None) -> np.ndarray:
    """MSB-first bits of a hex string, truncated to ``length`` if given."""
    text = text.strip().lower().removeprefix("0x")
    try:
        raw = bytes.fromhex(text if len(text) % 2 == 0 else text + "0")
    except ValueError as exc:
        raise InvalidInput(f"bad hex seed: {exc}") from exc
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="big")
    if length is not None:
        if length > bits.size:
            raise InvalidInput(f"hex seed holds {bits.size} bits, need {length}")
        bits = bits[:length]
    return bits


def bits_to_hex(bits) -> str:
    return np.packbits(_as_bits(bits, "bits"), bitorder="big").tobytes().hex()
