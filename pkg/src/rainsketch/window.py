"""Double-buffered sketch windows for virtual-queue rank estimation.

The estimator keeps two rank ensembles: ``current`` collects events for
the in-progress window [i*delta, (i+1)*delta), and ``completed`` holds
the frozen previous window [(i-1)*delta, i*delta). At each boundary the
current buffer freezes into completed and a fresh buffer starts filling;
a gap longer than one window leaves an empty completed buffer, because
the window immediately before the new one saw no events.

A rank query for a client whose earliest token timestamp is rho_ts
returns the completed window's estimated count of distinct clients at
or below rho_ts. That count upper-bounds the client's true queue
position (given every waiting client re-appears in each window), and
overshoots it by at most the number of clients the service drained
since the completed window opened, giving the reported error bound

    epsilon * capacity_hint + (t_cur - (i-1)*delta) * issue_rate_bound

which never exceeds epsilon * N + 2 * delta * issue_rate_bound.

Concurrency contract: one writer calls observe/rotate in time order;
readers may call estimate_rank concurrently. The (completed, index)
pair is swapped atomically as one tuple, and frozen buffers are never
mutated in place, so a reader always sees a consistent pair.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fm import AccuracyParams, required_sketch_count
from .rank import RainCheckEvent, RankEnsemble, check_timestamp
from . import serialize


class TimeRegressionError(ValueError):
    """The writer clock moved backward."""


class StaleWindowError(ValueError):
    """A query timestamp fell outside the estimator's current window."""


@dataclass(frozen=True)
class WindowConfig:
    """Windowing and accuracy parameters.

    window_ticks is the window length; issue_rate_bound caps how many
    tokens the server issues (and hence drains) per tick and scales the
    deterministic part of the error bound. capacity_hint stands in for
    the distinct-client scale N in the epsilon*N term; the bound is only
    as honest as this hint, since the estimator itself keeps no
    per-client state to measure N with.
    """

    window_ticks: int
    issue_rate_bound: float
    accuracy: AccuracyParams
    capacity_hint: int
    width: int = 64
    sketches: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.window_ticks < 1:
            raise ValueError("window_ticks must be >= 1")
        if self.issue_rate_bound <= 0:
            raise ValueError("issue_rate_bound must be positive")
        if self.capacity_hint < 0:
            raise ValueError("capacity_hint must be >= 0")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.sketches is not None and self.sketches < 1:
            raise ValueError("sketches must be >= 1 when given")

    def resolved_sketches(self) -> int:
        """Explicit row count if set, else the count the accuracy demands."""
        if self.sketches is not None:
            return self.sketches
        return required_sketch_count(self.accuracy)


@dataclass(frozen=True)
class RankEstimate:
    """A rank query answer: the estimate and its error envelope."""

    estimated_rank: float
    error_bound: float
    window_index: int
    queried_ts: int


def window_error_bound(config: WindowConfig, t_cur: int, window_index: int) -> float:
    """Error envelope for a query at t_cur against window window_index.

    epsilon * capacity_hint + (t_cur - (window_index - 1) * window_ticks)
    * issue_rate_bound. Within a window this is capped by
    epsilon * capacity_hint + 2 * window_ticks * issue_rate_bound.
    """
    start_prev = (window_index - 1) * config.window_ticks
    if t_cur < start_prev:
        raise ValueError("t_cur precedes the completed window")
    return (
        config.accuracy.epsilon * config.capacity_hint
        + (t_cur - start_prev) * config.issue_rate_bound
    )


class WindowedEstimator:
    """Streaming rank estimator over rotating sketch windows.

    Memory is two ensembles (2 * K * width cells plus seeds and two
    clock scalars) no matter how many clients pass through.
    """

    def __init__(self, config: WindowConfig):
        self.config = config
        k = config.resolved_sketches()
        self._current = RankEnsemble(k, config.width, config.seed)
        # (completed ensemble, window index) swaps as one atomic unit
        self._frozen: tuple[RankEnsemble, int] = (
            RankEnsemble(k, config.width, config.seed),
            0,
        )
        self.now = 0

    @property
    def window_index(self) -> int:
        return self._frozen[1]

    @property
    def current(self) -> RankEnsemble:
        return self._current

    @property
    def completed(self) -> RankEnsemble:
        return self._frozen[0]

    def _fresh(self) -> RankEnsemble:
        return RankEnsemble(
            width=self.config.width,
            seeds=self._current.seeds,
        )

    def rotate(self, now: int) -> None:
        """Advance the clock, freezing windows crossed along the way.

        Jumping more than one window ahead leaves an EMPTY completed
        buffer: the window just before the new one saw no events.
        Never moves the clock backward (that is a no-op).
        """
        check_timestamp(now)
        if now < self.now:
            return
        self.now = now
        target = now // self.config.window_ticks
        index = self._frozen[1]
        if target == index:
            return
        completed = self._current if target == index + 1 else self._fresh()
        self._current = self._fresh()
        self._frozen = (completed, target)

    def observe(self, event: RainCheckEvent, now: int) -> None:
        """Record an event at writer time ``now``.

        Rotates first if ``now`` crossed a boundary, then min-updates the
        current window. The event timestamp may predate the window (a
        client re-announcing an old token) but never the clock.
        """
        check_timestamp(now)
        if now < self.now:
            raise TimeRegressionError(f"clock moved back from {self.now} to {now}")
        if event.ts > now:
            raise ValueError(f"event timestamp {event.ts} is ahead of now={now}")
        self.rotate(now)
        self._current.insert(event)

    def estimate_rank(self, rho_ts: int, t_cur: int) -> RankEstimate:
        """Upper-bound estimate of the rank of a client whose earliest
        valid token has timestamp rho_ts, queried at time t_cur.

        Reads only the frozen window; never mutates state. t_cur must
        fall inside the estimator's current window, otherwise the caller
        has to rotate/observe first.
        """
        check_timestamp(rho_ts)
        check_timestamp(t_cur)
        completed, index = self._frozen
        delta = self.config.window_ticks
        if not index * delta <= t_cur < (index + 1) * delta:
            raise StaleWindowError(
                f"t_cur={t_cur} outside window {index} "
                f"[{index * delta}, {(index + 1) * delta})"
            )
        return RankEstimate(
            estimated_rank=completed.count_at_most(rho_ts),
            error_bound=window_error_bound(self.config, t_cur, index),
            window_index=index,
            queried_ts=rho_ts,
        )

    def to_bytes(self) -> bytes:
        """Serialized snapshot: both buffers plus window_index and now."""
        completed, index = self._frozen
        return serialize.dump_window(self._current, completed, index, self.now)

    @classmethod
    def restore(cls, config: WindowConfig, data: bytes) -> WindowedEstimator:
        """Rebuild an estimator from a snapshot taken with to_bytes."""
        current, completed, index, now = serialize.load_window(data)
        est = cls(config)
        if current.width != config.width or current.sketch_count != est.config.resolved_sketches():
            raise ValueError("snapshot dimensions disagree with the config")
        est._current = current
        est._frozen = (completed, index)
        est.now = now
        return est
