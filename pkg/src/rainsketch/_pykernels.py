"""Vectorized numpy implementations of the hot sketch kernels.

This is the fallback backend used when the compiled extension is not
available. Both backends implement the same integer arithmetic mod 2^64
and must produce bit-identical results; tests cross-check them.

Array contracts: ``slots`` is a C-contiguous (rows, width) uint64 array,
``mixed_seeds`` holds mix64(seed) per row, digests come from FNV-1a.
"""

from __future__ import annotations

import numpy as np

from .hashing import digest64

NAME = "python"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)


def _mix64(x: np.ndarray) -> np.ndarray:
    x = x + _GAMMA
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def _trailing_zeros(words: np.ndarray) -> np.ndarray:
    # (w & -w) - 1 is a mask of the trailing zeros; popcount it.
    # For w == 0 the mask wraps to all ones, giving 64.
    isolated = words & (~words + _ONE)
    return np.bitwise_count(isolated - _ONE).astype(np.int64)


def _positions(words: np.ndarray, width: int) -> np.ndarray:
    return np.minimum(_trailing_zeros(words), width - 1)


def digest_many(ids, out: np.ndarray) -> None:
    """FNV-1a digest of each id into a preallocated uint64 array."""
    for i, cid in enumerate(ids):
        out[i] = digest64(cid)


def positions_into(digest: int, mixed_seeds: np.ndarray, width: int, out: np.ndarray) -> None:
    """Per-row positions of one digest into a preallocated int64 array."""
    words = _mix64(np.uint64(digest) ^ mixed_seeds)
    out[:] = _positions(words, width)


def fm_or_bulk(digests: np.ndarray, mixed_seeds: np.ndarray, width: int, masks: np.ndarray) -> None:
    """OR the bit for every (digest, row) pair into per-row uint64 masks.

    Only valid for width <= 64; wider sketches take the scalar path.
    """
    words = _mix64(digests[:, None] ^ mixed_seeds[None, :])
    pos = _positions(words, width).astype(np.uint64)
    masks |= np.bitwise_or.reduce(_ONE << pos, axis=0)


def rank_insert_one(slots: np.ndarray, mixed_seeds: np.ndarray, digest: int, ts: int) -> None:
    """Min-update one timestamp into every row of a rank sketch."""
    k, width = slots.shape
    words = _mix64(np.uint64(digest) ^ mixed_seeds)
    idx = (np.arange(k), _positions(words, width))
    current = slots[idx]
    np.minimum(current, np.uint64(ts), out=current)
    slots[idx] = current


def rank_insert_bulk(slots: np.ndarray, mixed_seeds: np.ndarray, digests: np.ndarray, ts: np.ndarray) -> None:
    """Min-update a batch of (digest, timestamp) pairs into all rows."""
    k, width = slots.shape
    words = _mix64(digests[:, None] ^ mixed_seeds[None, :])
    pos = _positions(words, width)
    flat = np.arange(k, dtype=np.int64)[None, :] * width + pos
    # unbuffered scatter-min: duplicate positions must all apply
    np.minimum.at(slots.reshape(-1), flat.ravel(), np.repeat(ts, k))


def lsb0_at_most_into(slots: np.ndarray, x: int, out: np.ndarray) -> int:
    """Per row, the lowest position whose stored value is NOT <= x.

    This is lsb0 of the bit vector obtained by thresholding the row at x;
    a fully-hit row yields the row width. Empty cells hold the sentinel
    (all bits set), which never passes the threshold for a valid x.
    Returns the number of rows with at least one cell below the threshold.
    """
    width = slots.shape[1]
    hit = slots <= np.uint64(x)
    any_hit = hit.any(axis=1)
    out[:] = np.where(hit.all(axis=1), width, np.argmax(~hit, axis=1))
    return int(any_hit.sum())
