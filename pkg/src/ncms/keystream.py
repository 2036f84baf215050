"""Shared pseudo-random bit sequences and key-rate accounting."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

KEY_RATE_PER_USER = 0.5


@dataclass(frozen=True)
class KeyMaterial:
    key_id: str
    bits: np.ndarray

    def __len__(self):
        return len(self.bits)


def _secret_bytes(master_secret) -> bytes:
    if isinstance(master_secret, bytes):
        return master_secret
    return str(master_secret).encode()


def derive_bits(master_secret, key_id: str, length: int) -> KeyMaterial:
    """Deterministic bit sequence keyed by (master_secret, key_id).

    Counter-mode Philox keyed by a SHA-256 digest; uniform enough for
    simulation, not meant to be cryptographically strong.
    """
    if length < 1:
        raise ValueError("length must be at least 1")
    digest = hashlib.sha256(_secret_bytes(master_secret) + b"\x00" + key_id.encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    gen = np.random.Generator(np.random.Philox(key=key))
    bits = gen.integers(0, 2, size=length, dtype=np.uint8)
    return KeyMaterial(key_id=key_id, bits=bits)


def key_rate_overhead(L_C: int) -> float:
    """Common-randomness rate (bits per channel use) consumed by L_C mimics."""
    if L_C < 0 or L_C % 2:
        raise ValueError("L_C must be a non-negative even number")
    return L_C * KEY_RATE_PER_USER
