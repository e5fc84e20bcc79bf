"""Exact brute-force ground truth for tests and the simulator.

Keeps real per-client state, which is precisely what the sketches avoid:
memory here grows with the number of clients. Single-threaded use only.
"""

from __future__ import annotations

import heapq

from .hashing import client_bytes
from .rank import check_timestamp


class NotWaitingError(KeyError):
    """Rank was asked for a client that is not in the queue."""


class ExactWindowCounter:
    """Per-window map of client id to its minimum timestamp."""

    __slots__ = ("min_ts",)

    def __init__(self):
        self.min_ts: dict[bytes, int] = {}

    def observe(self, client_id: bytes | str, ts: int) -> None:
        cid = client_bytes(client_id)
        check_timestamp(ts)
        prev = self.min_ts.get(cid)
        if prev is None or ts < prev:
            self.min_ts[cid] = ts

    def count_at_most(self, x: int) -> int:
        """Exact number of distinct clients with minimum timestamp <= x."""
        check_timestamp(x)
        return sum(1 for ts in self.min_ts.values() if ts <= x)

    def distinct(self) -> int:
        return len(self.min_ts)

    def reset(self) -> None:
        self.min_ts.clear()


class ExactQueue:
    """FCFS virtual queue ordered by (rho_ts, client id).

    Equal timestamps are broken by ascending client id bytes, and ranks
    are 1-based: the head of the queue has rank 1.
    """

    def __init__(self):
        self._waiting: dict[bytes, int] = {}
        self._heap: list[tuple[int, bytes]] = []
        self.served: set[bytes] = set()

    def arrive(self, client_id: bytes | str, rho_ts: int) -> None:
        cid = client_bytes(client_id)
        check_timestamp(rho_ts)
        if cid in self._waiting or cid in self.served:
            raise ValueError(f"client {cid!r} already known to the queue")
        self._waiting[cid] = rho_ts
        heapq.heappush(self._heap, (rho_ts, cid))

    def is_waiting(self, client_id: bytes | str) -> bool:
        return client_bytes(client_id) in self._waiting

    def rho_ts(self, client_id: bytes | str) -> int:
        cid = client_bytes(client_id)
        try:
            return self._waiting[cid]
        except KeyError:
            raise NotWaitingError(f"client {cid!r} is not waiting") from None

    def rank(self, client_id: bytes | str) -> int:
        """1 + the number of waiting clients strictly ahead."""
        cid = client_bytes(client_id)
        if cid not in self._waiting:
            raise NotWaitingError(f"client {cid!r} is not waiting")
        key = (self._waiting[cid], cid)
        return 1 + sum(1 for item in self._waiting.items() if (item[1], item[0]) < key)

    def serve(self, count: int) -> list[bytes]:
        """Remove and return up to ``count`` clients from the head."""
        served = []
        while count > 0 and self._heap:
            _, cid = heapq.heappop(self._heap)
            del self._waiting[cid]
            self.served.add(cid)
            served.append(cid)
            count -= 1
        return served

    def waiting_in_order(self) -> list[bytes]:
        """Waiting client ids, head of the queue first."""
        return [cid for _, cid in sorted((ts, cid) for cid, ts in self._waiting.items())]

    @property
    def waiting_count(self) -> int:
        return len(self._waiting)

    @property
    def served_count(self) -> int:
        return len(self.served)
