"""Deterministic random streams.

All randomness flows from one master seed through named substreams backed by
counter-based Philox generators. Stream keys are derived with splitmix64 from
(master seed, label hash, index), so any component can be re-seeded
independently and per-chain streams are independent of worker scheduling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(state: int) -> int:
    """One splitmix64 step; returns the next 64-bit output."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _label_hash(label: str) -> int:
    h = 0xCBF29CE484222325  # FNV-1a 64
    for b in label.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


def stream_key(master_seed: int, label: str, index: int = 0) -> int:
    """64-bit key for substream `label[index]` of `master_seed`."""
    k = splitmix64(master_seed & _MASK64)
    k = splitmix64(k ^ _label_hash(label))
    k = splitmix64(k ^ (index & _MASK64))
    return k


def stream(master_seed: int, label: str, index: int = 0) -> np.random.Generator:
    """Independent Philox generator for a named substream."""
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, label, index)))
