"""Stable seed derivation.

Every random stream in the package is keyed by a tuple of parts (global seed,
component name, item id, ...) hashed with blake2b, so results never depend on
process hash randomisation or on the order work is scheduled in.
"""

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def philox(*parts) -> np.random.Generator:
    """Counter-based generator keyed by ``parts``."""
    return np.random.Generator(np.random.Philox(key=derive_seed(*parts)))


def generator(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
