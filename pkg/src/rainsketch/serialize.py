"""Binary snapshot format shared by all sketch kinds.

Layout (all little-endian):

    header   magic "FMRK" (4s) | version (u8) | kind (u8) | K (u32) | W (u32)
    kind 0   FM ensemble:   K seeds (u64 each), K rows of ceil(W/8) bytes
    kind 1   rank ensemble: K seeds (u64 each), K rows of W u64 cells
    kind 2   window snapshot: window_index (u64), now (u64), then the
             current and completed rank payloads (seeds + cells each)

FM row bytes pack bit p at byte p//8, bit p%8. Rank cells are stored
verbatim, including the empty-cell sentinel.
"""

from __future__ import annotations

import struct

import numpy as np

from .fm import FMEnsemble
from .rank import RankEnsemble

MAGIC = b"FMRK"
FORMAT_VERSION = 1

KIND_FM = 0
KIND_RANK = 1
KIND_WINDOW = 2

_HEADER = struct.Struct("<4sBBII")
HEADER_SIZE = _HEADER.size


def pack_header(kind: int, sketches: int, width: int) -> bytes:
    return _HEADER.pack(MAGIC, FORMAT_VERSION, kind, sketches, width)


def read_header(data: bytes) -> tuple[int, int, int]:
    """Validate and split a header into (kind, sketches, width)."""
    if len(data) < HEADER_SIZE:
        raise ValueError("snapshot truncated before header end")
    magic, version, kind, k, w = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version}")
    if kind not in (KIND_FM, KIND_RANK, KIND_WINDOW):
        raise ValueError(f"unknown sketch kind {kind}")
    if k < 1 or w < 1:
        raise ValueError("sketch dimensions must be positive")
    return kind, k, w


def _pack_seeds(seeds: list[int]) -> bytes:
    return np.asarray(seeds, dtype="<u8").tobytes()


def _unpack_seeds(data: bytes, offset: int, k: int) -> tuple[list[int], int]:
    end = offset + 8 * k
    if len(data) < end:
        raise ValueError("snapshot truncated inside seed block")
    seeds = np.frombuffer(data, dtype="<u8", count=k, offset=offset)
    return [int(s) for s in seeds], end


def dump_fm_ensemble(ensemble: FMEnsemble) -> bytes:
    row_bytes = (ensemble.width + 7) // 8
    parts = [pack_header(KIND_FM, ensemble.sketch_count, ensemble.width)]
    parts.append(_pack_seeds(ensemble.seeds))
    for row in ensemble.rows:
        parts.append(row.bits.to_bytes(row_bytes, "little"))
    return b"".join(parts)


def load_fm_ensemble(data: bytes) -> FMEnsemble:
    kind, k, w = read_header(data)
    if kind != KIND_FM:
        raise ValueError(f"expected an FM snapshot, found kind {kind}")
    seeds, offset = _unpack_seeds(data, HEADER_SIZE, k)
    row_bytes = (w + 7) // 8
    if len(data) != offset + k * row_bytes:
        raise ValueError("FM snapshot length mismatch")
    bits = []
    for _ in range(k):
        value = int.from_bytes(data[offset : offset + row_bytes], "little")
        if value >> w:
            raise ValueError("FM row has bits beyond the sketch width")
        bits.append(value)
        offset += row_bytes
    return FMEnsemble.from_state(seeds, bits, w)


def _pack_cells(ensemble: RankEnsemble) -> bytes:
    return np.ascontiguousarray(ensemble.slots, dtype="<u8").tobytes()


def _unpack_cells(data: bytes, offset: int, k: int, w: int) -> tuple[np.ndarray, int]:
    end = offset + 8 * k * w
    if len(data) < end:
        raise ValueError("snapshot truncated inside cell block")
    cells = np.frombuffer(data, dtype="<u8", count=k * w, offset=offset)
    return cells.reshape(k, w).astype(np.uint64), end


def dump_rank_ensemble(ensemble: RankEnsemble) -> bytes:
    header = pack_header(KIND_RANK, ensemble.sketch_count, ensemble.width)
    return header + _pack_seeds(ensemble.seeds) + _pack_cells(ensemble)


def load_rank_ensemble(data: bytes) -> RankEnsemble:
    kind, k, w = read_header(data)
    if kind != KIND_RANK:
        raise ValueError(f"expected a rank snapshot, found kind {kind}")
    seeds, offset = _unpack_seeds(data, HEADER_SIZE, k)
    cells, offset = _unpack_cells(data, offset, k, w)
    if len(data) != offset:
        raise ValueError("rank snapshot length mismatch")
    return RankEnsemble.from_state(seeds, cells)


def dump_window(
    current: RankEnsemble, completed: RankEnsemble, window_index: int, now: int
) -> bytes:
    """Serialize a double-buffered window pair plus its two clock scalars."""
    if current.width != completed.width or current.seeds != completed.seeds:
        raise ValueError("window buffers must share width and seeds")
    parts = [
        pack_header(KIND_WINDOW, current.sketch_count, current.width),
        struct.pack("<QQ", window_index, now),
        _pack_seeds(current.seeds),
        _pack_cells(current),
        _pack_seeds(completed.seeds),
        _pack_cells(completed),
    ]
    return b"".join(parts)


def load_window(data: bytes) -> tuple[RankEnsemble, RankEnsemble, int, int]:
    """Inverse of dump_window: (current, completed, window_index, now)."""
    kind, k, w = read_header(data)
    if kind != KIND_WINDOW:
        raise ValueError(f"expected a window snapshot, found kind {kind}")
    offset = HEADER_SIZE
    if len(data) < offset + 16:
        raise ValueError("snapshot truncated inside window scalars")
    window_index, now = struct.unpack_from("<QQ", data, offset)
    offset += 16
    cur_seeds, offset = _unpack_seeds(data, offset, k)
    cur_cells, offset = _unpack_cells(data, offset, k, w)
    comp_seeds, offset = _unpack_seeds(data, offset, k)
    comp_cells, offset = _unpack_cells(data, offset, k, w)
    if len(data) != offset:
        raise ValueError("window snapshot length mismatch")
    if cur_seeds != comp_seeds:
        raise ValueError("window buffers disagree on seeds")
    current = RankEnsemble.from_state(cur_seeds, cur_cells)
    completed = RankEnsemble.from_state(comp_seeds, comp_cells)
    return current, completed, window_index, now


def window_snapshot_size(sketches: int, width: int) -> int:
    """Exact byte length of a window snapshot: header + 2 scalars +
    2*K seeds + 2*K*W cells, independent of how many clients were seen."""
    return HEADER_SIZE + 16 + 2 * (8 * sketches) + 2 * (8 * sketches * width)
