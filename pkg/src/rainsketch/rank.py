"""Min-value sketches answering "how many distinct clients at or below x".

A rank sketch row is a width-sized array of timestamp cells. An event
(client id, timestamp) is hashed by client id only, and the mapped cell
keeps the minimum timestamp ever seen there. Because the position never
depends on the timestamp, repeat events from one client collapse into a
single cell holding that client's earliest timestamp.

Thresholding a row at x (cell set iff its value <= x) yields exactly the
bit vector an FMSketch would hold after inserting just the clients whose
minimum timestamp is <= x, so one stored sketch answers the distinct
count below ANY threshold after the fact. The ensemble estimate follows
the FM rule: exponentiate the mean lsb0 of the thresholded rows.

Empty cells hold a sentinel (all 64 bits set) that compares as +infinity
under min updates, so the sentinel itself is not a valid timestamp.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .fm import FMSketch, SketchMismatchError, estimate_from_lsb0
from .hashing import client_bytes, derive_seeds, digest64, mix64

SENTINEL = (1 << 64) - 1
TIMESTAMP_MAX = SENTINEL - 1


def check_timestamp(ts) -> int:
    """Validate a timestamp tick: an integer in [0, TIMESTAMP_MAX].

    Accepts anything indexable as an integer (numpy ints included) and
    returns a plain int.
    """
    if isinstance(ts, bool):
        raise ValueError("timestamp must be an integer, not bool")
    try:
        ts = operator.index(ts)
    except TypeError:
        raise ValueError(
            f"timestamp must be an integer, got {type(ts).__name__}"
        ) from None
    if ts < 0 or ts > TIMESTAMP_MAX:
        raise ValueError(f"timestamp {ts} outside [0, {TIMESTAMP_MAX}]")
    return ts


@dataclass(frozen=True)
class RainCheckEvent:
    """One stream item: a client obtained a timestamped token.

    Identity is the client id (hash key); the timestamp is the value the
    sketch minimizes over. String ids are normalized to UTF-8 bytes.
    """

    client_id: bytes
    ts: int

    def __post_init__(self):
        object.__setattr__(self, "client_id", client_bytes(self.client_id))
        object.__setattr__(self, "ts", check_timestamp(self.ts))


class RankSketchRow:
    """Read view of one ensemble row: its cells and seed."""

    __slots__ = ("_slots", "seed", "width")

    def __init__(self, slots: np.ndarray, seed: int):
        self._slots = slots
        self.seed = seed
        self.width = int(slots.shape[0])

    @property
    def slots(self) -> np.ndarray:
        return self._slots

    def cell(self, position: int) -> int | None:
        """Stored minimum at a position, or None for an empty cell."""
        value = int(self._slots[position])
        return None if value == SENTINEL else value

    def to_fm(self, x: int) -> FMSketch:
        """Threshold this row at x into an FM bit vector.

        Bit p is set iff the cell holds a value <= x. The result is
        bit-identical to inserting, with this row's seed, exactly the
        clients whose minimum timestamp is <= x.
        """
        check_timestamp(x)
        bits = 0
        for p in np.flatnonzero(self._slots <= np.uint64(x)):
            bits |= 1 << int(p)
        return FMSketch(self.width, bits)


class RankEnsemble:
    """K independently seeded rank sketch rows over a shared width.

    State is a (K, width) uint64 cell matrix; memory never depends on
    how many clients were inserted.
    """

    __slots__ = ("width", "seeds", "slots", "_mixed")

    def __init__(
        self,
        sketches: int | None = None,
        width: int = 64,
        seed: int = 0,
        *,
        seeds: list[int] | None = None,
    ):
        if seeds is None:
            if sketches is None:
                raise ValueError("give either a sketch count or explicit seeds")
            seeds = derive_seeds(sketches, seed)
        elif sketches is not None and sketches != len(seeds):
            raise ValueError("sketch count disagrees with explicit seeds")
        if len(seeds) < 1:
            raise ValueError("an ensemble needs at least one row")
        if len(set(seeds)) != len(seeds):
            raise ValueError("row seeds must be pairwise distinct")
        if width < 1:
            raise ValueError("width must be >= 1")
        self.width = width
        self.seeds = list(seeds)
        self.slots = np.full((len(seeds), width), SENTINEL, dtype=np.uint64)
        self._mixed = np.array([mix64(s) for s in self.seeds], dtype=np.uint64)

    @classmethod
    def from_state(cls, seeds: list[int], slots: np.ndarray) -> RankEnsemble:
        """Rebuild an ensemble from serialized cells."""
        ens = cls(width=int(slots.shape[1]), seeds=seeds)
        if slots.shape != ens.slots.shape:
            raise ValueError("cell matrix shape disagrees with seeds")
        ens.slots = np.ascontiguousarray(slots, dtype=np.uint64)
        return ens

    @property
    def sketch_count(self) -> int:
        return len(self.seeds)

    def row(self, i: int) -> RankSketchRow:
        return RankSketchRow(self.slots[i], self.seeds[i])

    @property
    def rows(self) -> list[RankSketchRow]:
        return [self.row(i) for i in range(len(self.seeds))]

    def insert(self, event: RainCheckEvent) -> None:
        """Min-update every row with the event's timestamp.

        The cell position depends only on the client id, so any number
        of events from one client occupy a single cell per row, holding
        the earliest timestamp.
        """
        kernels.rank_insert_one(
            self.slots, self._mixed, digest64(event.client_id), check_timestamp(event.ts)
        )

    def insert_pair(self, client_id: bytes | str, ts: int) -> None:
        """Insert without building an event object (hot-path convenience)."""
        kernels.rank_insert_one(
            self.slots, self._mixed, digest64(client_id), check_timestamp(ts)
        )

    def insert_many(self, client_ids, timestamps) -> None:
        """Bulk insert aligned id/timestamp sequences."""
        ids = list(client_ids)
        ts = np.asarray(
            [check_timestamp(t) for t in timestamps], dtype=np.uint64
        )
        if len(ids) != ts.shape[0]:
            raise ValueError("client_ids and timestamps must align")
        if not ids:
            return
        digests = np.empty(len(ids), dtype=np.uint64)
        kernels.digest_many(ids, digests)
        kernels.rank_insert_bulk(self.slots, self._mixed, digests, ts)

    def lsb0s_at(self, x: int) -> list[int]:
        """Per-row lsb0 of the rows thresholded at x."""
        check_timestamp(x)
        out = np.empty(len(self.seeds), dtype=np.int64)
        kernels.lsb0_at_most_into(self.slots, x, out)
        return [int(v) for v in out]

    def count_at_most(self, x: int) -> float:
        """Estimated number of distinct clients with minimum timestamp <= x.

        Thresholds every row at x and applies the ensemble FM estimate;
        returns exactly 0 when no cell passes the threshold.
        """
        check_timestamp(x)
        out = np.empty(len(self.seeds), dtype=np.int64)
        nonempty = kernels.lsb0_at_most_into(self.slots, x, out)
        if not nonempty:
            return 0.0
        return estimate_from_lsb0(int(out.sum()) / len(self.seeds))

    def merge(self, other: RankEnsemble) -> RankEnsemble:
        """Cell-wise minimum of two ensembles with equal width and seeds.

        Merging sketches of two event sets gives exactly the sketch of
        the combined stream.
        """
        if self.width != other.width or self.seeds != other.seeds:
            raise SketchMismatchError("ensembles differ in width or seeds")
        return RankEnsemble.from_state(self.seeds, np.minimum(self.slots, other.slots))

    def reset(self) -> None:
        """Clear every cell back to empty; seeds and shape are kept."""
        self.slots.fill(SENTINEL)

    def copy(self) -> RankEnsemble:
        return RankEnsemble.from_state(self.seeds, self.slots.copy())

    @property
    def is_empty(self) -> bool:
        return bool((self.slots == SENTINEL).all())

    def __eq__(self, other) -> bool:
        if not isinstance(other, RankEnsemble):
            return NotImplemented
        return (
            self.width == other.width
            and self.seeds == other.seeds
            and bool((self.slots == other.slots).all())
        )

    def __repr__(self) -> str:
        return f"RankEnsemble(sketches={len(self.seeds)}, width={self.width})"
