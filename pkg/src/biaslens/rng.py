"""Seed handling.

Every stochastic step draws its uniforms from a counter-based Philox stream
keyed by ``(seed, stream)``.  Draw ``i`` is always the ``i``-th double of
that stream, so a chunked or parallel consumer that advances the generator
to its offset sees exactly the values a serial pass would.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def philox(seed: int, stream: int = 0, offset: int = 0) -> np.random.Generator:
    bitgen = np.random.Philox(key=(int(seed) & MASK64) | ((int(stream) & MASK64) << 64))
    if offset:
        # Philox4x64 yields four 64-bit words per counter step.
        q, r = divmod(offset, 4)
        bitgen.advance(q)
        gen = np.random.Generator(bitgen)
        if r:
            gen.random(r)
        return gen
    return np.random.Generator(bitgen)


def uniforms(seed: int, n: int, stream: int = 0, offset: int = 0) -> np.ndarray:
    """Doubles ``offset .. offset + n - 1`` of the ``(seed, stream)`` stream."""
    return philox(seed, stream, offset).random(n)


def derive_seed(master: int, *path: int) -> int:
    """Deterministic 63-bit child seed for a position in an experiment grid."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
