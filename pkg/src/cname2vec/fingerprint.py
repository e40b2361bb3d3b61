"""Job-description fingerprints: k-gram rolling hashes, winnowing, MD5.

The defaults (k=4, window=5, base=10, modulo=1000) give only 1000 distinct
k-gram hashes; pass a larger ``modulo`` when collisions matter.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class WinnowParams:
    kgram_len: int = 4
    window_len: int = 5
    base: int = 10
    modulo: int = 1000

    def __post_init__(self):
        if self.kgram_len < 1 or self.window_len < 1 or self.base < 1:
            raise ValueError("kgram_len, window_len and base must be positive")
        if self.modulo < 2:
            raise ValueError("modulo must be >= 2")


DEFAULT_PARAMS = WinnowParams()


def clean_text(description: str) -> str:
    """Lowercase and keep only letters and digits."""
    return "".join(ch for ch in description.lower() if ch.isalnum())


def kgram_hashes(cleaned: str, p: WinnowParams = DEFAULT_PARAMS) -> list[int]:
    k, base, mod = p.kgram_len, p.base, p.modulo
    n = len(cleaned)
    if n < k:
        return []
    codes = [ord(ch) for ch in cleaned]
    top = pow(base, k - 1, mod)  # weight of the character leaving the window
    h = 0
    for c in codes[:k]:
        h = (h * base + c) % mod
    out = [h]
    for i in range(k, n):
        h = ((h - codes[i - k] * top) * base + codes[i]) % mod
        out.append(h)
    return out


def winnow(seq: Sequence[int], window_len: int) -> list[tuple[int, int]]:
    """Select the rightmost minimum of every window of ``window_len`` hashes.

    Each selected position is reported once, in position order. Sequences
    shorter than one window yield their rightmost global minimum.
    """
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    n = len(seq)
    if n == 0:
        return []
    if n < window_len:
        best = min(range(n), key=lambda i: (seq[i], -i))
        return [(best, seq[best])]

    # deque of positions with strictly increasing values; popping on `>=`
    # keeps the rightmost of equal minima at the front
    dq: deque[int] = deque()
    out: list[tuple[int, int]] = []
    last = -1
    for i, v in enumerate(seq):
        while dq and seq[dq[-1]] >= v:
            dq.pop()
        dq.append(i)
        start = i - window_len + 1
        if dq[0] < start:
            dq.popleft()
        if start >= 0 and dq[0] != last:
            last = dq[0]
            out.append((last, seq[last]))
    return out


def md5_hex(data: bytes) -> str:
    return hashlib.md5(data).hexdigest()


def digest(selected: Sequence[tuple[int, int]]) -> str:
    """MD5 of the selected hash values joined by commas (positions are dropped)."""
    return md5_hex(",".join(str(h) for _, h in selected).encode("utf-8"))


def fingerprint_job(description: str, p: WinnowParams = DEFAULT_PARAMS) -> str:
    return digest(winnow(kgram_hashes(clean_text(description), p), p.window_len))
