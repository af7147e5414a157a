"""Stable sub-seed derivation.

Every random draw in a scenario comes from a Generator spawned off the base
seed plus a purpose tag, so replicates and purposes never share streams and
results do not depend on platform hash randomization.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(base, *parts):
    """Hash (base, *parts) into a 64-bit seed. Parts must be ints or strings."""
    for part in parts:
        if not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
    text = "|".join([str(int(base))] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


def spawn_rng(base, *parts):
    """A numpy Generator seeded from derive_seed(base, *parts)."""
    return np.random.default_rng(derive_seed(base, *parts))
