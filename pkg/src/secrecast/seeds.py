"""Labeled derivation of child seeds from a single 64-bit master seed.

Every randomized component of a run draws from its own child seed, obtained
by hashing (label, index, master).  Adding a new component with a fresh label
never perturbs the random streams of existing ones.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def child_seed(master: int, label: str, index: int = 0) -> int:
    """Derive a 64-bit child seed for the component named `label`."""
    h = hashlib.sha256()
    h.update(label.encode("utf-8"))
    h.update(b"\x00")
    h.update((index & _MASK64).to_bytes(8, "big"))
    h.update((master & _MASK64).to_bytes(8, "big"))
    return int.from_bytes(h.digest()[:8], "big")
