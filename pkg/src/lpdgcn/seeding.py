"""Stable seed derivation.

Builtin hash() is salted per process, so anything that must reproduce
across runs (shuffles, dropout, init) derives child seeds through sha256
instead.
"""
from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Map a tuple of ints/strings to a stable 64-bit seed."""
    key = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
