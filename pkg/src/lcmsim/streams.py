"""Deterministic random substreams.

Every stochastic draw in the simulator comes from a substream derived
from (master_seed, module label, slot index). Substreams are mutually
independent and order-free: drawing for slot 500 never depends on
whether slot 499 was drawn first, which is what makes regime re-seeding
and byte-identical reruns cheap to guarantee.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(master_seed: int, module: str, index: int = 0) -> np.random.Generator:
    """Return the generator for (master_seed, module, index).

    The key is hashed with SHA-256 so nearby seeds or indices share no
    state. Calling twice with the same triple yields identical streams.
    """
    key = f"{master_seed}:{module}:{index}".encode()
    digest = hashlib.sha256(key).digest()
    entropy = int.from_bytes(digest[:16], "little")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def stable_id(prefix: str, *parts: bytes | str) -> str:
    """Derive a short reproducible identifier from content bytes."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            part = part.encode()
        h.update(part)
        h.update(b"\x00")
    return f"{prefix}-{h.hexdigest()[:12]}"
