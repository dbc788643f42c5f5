"""
Seed Derivation
===============

Every random stream in a run (split shuffle, SMOTE, training batches, sweep
cells) is derived from the single top-level seed plus a tag, so separate
commands agree on partitions and runs stay reproducible.
"""

import zlib

import numpy as np


def derive_seed(seed: int, *parts: int | float | str) -> int:
    """Stable 32-bit child seed for (seed, *parts)."""
    entropy = [int(seed) & 0xFFFFFFFF]
    for part in parts:
        if isinstance(part, str):
            entropy.append(zlib.crc32(part.encode("utf-8")))
        elif isinstance(part, float):
            entropy.append(int(round(part * 1_000_000)) & 0xFFFFFFFF)
        else:
            entropy.append(int(part) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
