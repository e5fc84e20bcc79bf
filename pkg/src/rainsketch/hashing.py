"""Seeded 64-bit hashing that maps client identities to sketch positions.

A client id is digested once with FNV-1a, the digest is combined with a
seed-derived word, and the result is run through the splitmix64 finalizer.
The sketch position is the trailing-zero count of the final word, so
position k occurs with probability 2^-(k+1) under a uniform hash; the
residual mass lands on the last position (width - 1).

Everything here is plain integer arithmetic mod 2^64, so positions are
identical across processes, platforms, and the compiled/pure backends.

The hash is not cryptographic: an adversary who knows the seeds can grind
client ids onto chosen positions. Keyed hashing is out of scope here.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

# splitmix64 increment; also spaces out derived seeds
_GAMMA = 0x9E3779B97F4A7C15


def client_bytes(client_id: bytes | str) -> bytes:
    """Normalize a client id to non-empty bytes (strings become UTF-8)."""
    if isinstance(client_id, str):
        client_id = client_id.encode("utf-8")
    elif not isinstance(client_id, bytes):
        raise ValueError(f"client_id must be bytes or str, got {type(client_id).__name__}")
    if not client_id:
        raise ValueError("client_id must be non-empty")
    return client_id


def digest64(client_id: bytes | str) -> int:
    """FNV-1a digest of a client id as an unsigned 64-bit integer."""
    h = _FNV_OFFSET
    for b in client_bytes(client_id):
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective scramble of a 64-bit word."""
    x = (x + _GAMMA) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def row_word(digest: int, seed: int) -> int:
    """Seeded 64-bit word for one sketch row, from a precomputed digest."""
    return mix64(digest ^ mix64(seed))


def position_from_digest(digest: int, seed: int, width: int) -> int:
    """Sketch position for a digest under one seed, clamped to width - 1."""
    if width < 1:
        raise ValueError("width must be >= 1")
    word = row_word(digest, seed)
    if word == 0:
        return width - 1
    tz = (word & -word).bit_length() - 1
    return tz if tz < width else width - 1

def position_of(client_id: bytes | str, seed: int, width: int) -> int:
    """Sketch position of a client id under a seed.

    Deterministic in (client_id, seed); position k is hit with probability
    2^-(k+1) for k < width - 1.
    """
    return position_from_digest(digest64(client_id), seed, width)


def derive_seeds(count: int, master: int = 0) -> list[int]:
    """Derive ``count`` pairwise-distinct 64-bit row seeds from one master seed.

    Seeds come from the splitmix64 stream: mix64 is a bijection and the
    inputs master + i*gamma are distinct mod 2^64, so the outputs are too.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    return [mix64((master + i * _GAMMA) & _MASK64) for i in range(count)]
