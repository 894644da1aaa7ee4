"""Labeled RNG substreams.

Every source of randomness in a run (per-actor env resets, exploration
noise, replay sampling, network init, evaluation, ...) draws from its own
generator, derived from the experiment seed plus a stable string label.
Streams are therefore independent: consuming more values from one never
shifts another, and evaluation randomness never perturbs training.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_code(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for (seed, *labels). Deterministic across runs and platforms."""
    entropy = [int(seed) & 0xFFFFFFFF] + [_label_code(l) for l in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def generator_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_generator(state: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = state
    return rng
