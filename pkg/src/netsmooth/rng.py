"""Deterministic random-stream derivation.

Every stochastic routine in the package is keyed by an explicit 64-bit seed
plus a path of stream labels (replication index, purpose name, ...).  Streams
are backed by the counter-based Philox generator, so any stream can be
reconstructed independently of execution order: parallel replications draw
from disjoint streams and produce identical results under any schedule.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _token_to_int(token) -> int:
    """Map a stream-path component (int or string label) to a stable uint64."""
    if isinstance(token, (bool, float)):
        token = str(token)
    if isinstance(token, (int, np.integer)):
        return int(token) & _MASK64
    digest = hashlib.blake2b(str(token).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(base_seed: int, *path) -> int:
    """Collapse ``(base_seed, *path)`` into a single stable 64-bit seed.

    Hash-based, so labels can be arbitrary strings (corruption names,
    purpose tags) without collisions between e.g. ``("a", 1)`` and ``("a1",)``.
    """
    h = hashlib.blake2b(digest_size=8)
    for token in (base_seed, *path):
        h.update(_token_to_int(token).to_bytes(8, "little"))
        h.update(b"/")
    return int.from_bytes(h.digest(), "little")


def stream(base_seed: int, *path) -> np.random.Generator:
    """Return the counter-based generator for the stream named by ``path``."""
    words = [_token_to_int(base_seed)] + [_token_to_int(t) for t in path]
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(words)))
