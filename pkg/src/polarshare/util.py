"""Shared helpers: labeled random streams and bit packing."""

from __future__ import annotations

import zlib

import numpy as np


def labeled_rng(master_seed: int, *labels) -> np.random.Generator:
    """Return a generator for a named sub-stream of ``master_seed``.

    Streams with distinct labels are statistically independent, and the
    mapping label -> stream is stable across runs and platforms, so any
    experiment is replayable from its master seed alone.
    """
    key = tuple(zlib.crc32(str(lab).encode()) for lab in labels)
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def bits_to_int(bits: np.ndarray) -> int:
    """Pack a 1-D bit array (most significant bit first) into an int."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size == 0:
        return 0
    packed = np.packbits(bits)
    pad = (-bits.size) % 8
    return int.from_bytes(packed.tobytes(), "big") >> pad


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Unpack ``value`` into ``width`` bits, most significant first."""
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    if value < 0 or value.bit_length() > width:
        raise ValueError(f"value does not fit in {width} bits")
    nbytes = (width + 7) // 8
    raw = (value << ((-width) % 8)).to_bytes(nbytes, "big")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:width]


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))
