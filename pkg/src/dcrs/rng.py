"""Counter-based RNG substreams for reproducible parallel Monte Carlo.

Each simulation slice draws from a Philox stream keyed by (master seed,
stream ids), so results depend only on the logical slice index and never on
worker count or scheduling order.  Trials are processed in fixed-size blocks;
block b of a run uses substream(master_seed, *ids, b).
"""

from __future__ import annotations

import numpy as np

# Fixed trial block size; part of the determinism contract.
TRIAL_BLOCK = 4096


def substream(master_seed: int, *ids: int) -> np.random.Generator:
    """Deterministic generator for a logical slice of a run."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(ids))
    return np.random.Generator(np.random.Philox(seq))


def block_sizes(trials: int, block: int = TRIAL_BLOCK):
    """Yield (block_index, size) pairs covering `trials` in fixed blocks."""
    full, rem = divmod(trials, block)
    for b in range(full):
        yield b, block
    if rem:
        yield full, rem
