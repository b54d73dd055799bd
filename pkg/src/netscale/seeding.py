"""Stable seed derivation.

Every random stream in the package is keyed by a tuple such as
``(base_seed, "sample", label, index)`` so results do not depend on the
order in which work is scheduled.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK32 = 0xFFFFFFFF


def derive_seed(*parts: object) -> int:
    """Return a stable 64-bit integer derived from ``parts``."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def kernel_seed(seed: int) -> int:
    """Fold an arbitrary integer seed into the 32-bit range the compiled kernels accept."""
    seed = int(seed)
    if 0 <= seed <= _MASK32:
        return seed
    return derive_seed("fold", seed) & _MASK32


def derive_seeds32(base: object, *prefix: object, count: int) -> np.ndarray:
    """Per-item 32-bit seeds ``derive_seed(base, *prefix, i)`` for ``i < count``."""
    return np.fromiter(
        (derive_seed(base, *prefix, i) & _MASK32 for i in range(count)),
        dtype=np.uint32,
        count=count,
    )
