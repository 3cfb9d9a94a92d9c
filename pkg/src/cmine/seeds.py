"""Stable seed derivation so every stage gets an independent, reproducible RNG stream."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts: str | int) -> int:
    """Derive a 63-bit child seed from a master seed and a label path.

    Same (master, parts) always yields the same seed; different labels give
    independent streams regardless of dict/iteration order at the call site.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "little") & 0x7FFF_FFFF_FFFF_FFFF
