"""Deterministic random streams.

Every random draw in this package flows through Philox, a 64-bit
counter-based generator, keyed by a SeedSequence over small integer
tuples. Identical seeds therefore reproduce identical samples (and
identical relation files) across platforms and processes.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the stream addressed by (seed, *stream)."""
    entropy = (int(seed),) + tuple(int(s) for s in stream)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *stream: int) -> int:
    """Stable 63-bit child seed for (seed, *stream).

    Used to label sub-draws (per-trial, per-round) so that a recorded seed
    is enough to replay any individual draw.
    """
    entropy = (int(seed),) + tuple(int(s) for s in stream)
    state = np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))
