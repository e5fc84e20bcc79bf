"""Workload simulator driving the sketch estimator and the exact oracle.

Clients arrive by a Poisson process, join an FCFS virtual queue keyed by
their arrival tick, and renew their token on a fixed interval (with a
random phase) while they wait. Every token event feeds the windowed
sketch estimator and an exact per-window counter side by side, so each
rank query can be compared against ground truth.

A renewal re-announces the client's ORIGINAL queue-position timestamp:
the token a waiting client holds keeps its place in line, so the value
the sketch sees is the client's earliest timestamp, re-inserted in every
window the client survives. This is what makes the completed window an
upper bound on the true rank: every client ahead re-appears there with
an equal-or-smaller value, provided it renews at least once per window
(renewal_interval < delta guarantees that; set allow_stale_renewal to
explore the failure mode where waiting clients drop out of windows).

Tick order is fixed: rotate windows, arrivals, renewals, service, then
rank queries. Everything is driven by one seeded RNG, so a given config
reproduces byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .fm import AccuracyParams
from .oracle import ExactQueue, ExactWindowCounter
from .rank import RainCheckEvent
from .window import WindowConfig, WindowedEstimator


class EmptyReportError(ValueError):
    """A report was requested over zero query records."""


@dataclass(frozen=True)
class SimConfig:
    """Knobs for one simulation run. Defaults give a mildly loaded queue
    whose waits stay well under one window."""

    duration_ticks: int = 20_000
    arrival_rate: float = 3.0          # clients per tick, Poisson
    renewal_interval: int = 50         # ticks between a waiting client's tokens
    service_rate: float = 5.0          # clients served per tick
    delta: int = 100                   # window length in ticks
    issue_rate_bound: float = 5.0      # R_s in the error envelope
    epsilon: float = 0.3
    delta_prob: float = 0.1
    sketches: int | None = 64
    width: int = 64
    capacity_hint: int | None = None   # default: ceil(arrival_rate * delta)
    query_fraction: float = 0.2        # waiting clients querying per tick
    rng_seed: int = 1
    allow_stale_renewal: bool = False

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1 tick")
        if self.duration_ticks < 2 * self.delta:
            raise ValueError("duration must cover at least two windows")
        if self.arrival_rate < 0 or self.service_rate < 0:
            raise ValueError("rates must be >= 0")
        if self.service_rate > self.issue_rate_bound:
            raise ValueError("service_rate must not exceed the issue rate bound")
        if self.renewal_interval < 1:
            raise ValueError("renewal_interval must be >= 1")
        if self.renewal_interval >= self.delta and not self.allow_stale_renewal:
            raise ValueError(
                "renewal_interval must stay below delta so waiting clients "
                "re-appear in every window (allow_stale_renewal overrides)"
            )
        if not 0.0 <= self.query_fraction <= 1.0:
            raise ValueError("query_fraction must be in [0, 1]")

    def effective_capacity_hint(self) -> int:
        if self.capacity_hint is not None:
            return self.capacity_hint
        return max(1, math.ceil(self.arrival_rate * self.delta))

    def window_config(self) -> WindowConfig:
        return WindowConfig(
            window_ticks=self.delta,
            issue_rate_bound=self.issue_rate_bound,
            accuracy=AccuracyParams(self.epsilon, self.delta_prob),
            capacity_hint=self.effective_capacity_hint(),
            width=self.width,
            sketches=self.sketches,
            seed=self.rng_seed,
        )


@dataclass(frozen=True)
class QueryRecord:
    """One rank query, with the sketch answer and both exact references."""

    t_cur: int
    client_id: str
    rho_ts: int
    true_rank: int
    exact_window_count: int
    sketch_estimate: float
    error_bound: float
    window_index: int


CSV_COLUMNS = [
    "t_cur",
    "client_id",
    "rho_ts",
    "true_rank",
    "exact_window_count",
    "sketch_estimate",
    "error_bound",
    "window_index",
]


@dataclass
class SimResult:
    config: SimConfig
    records: list[QueryRecord]
    summary: dict
    snapshot: bytes


def _poisson(rng: random.Random, lam: float) -> int:
    """Knuth's product-of-uniforms sampler; fine for desk-scale rates."""
    if lam <= 0:
        return 0
    limit = math.exp(-lam)
    count = 0
    product = rng.random()
    while product > limit:
        count += 1
        product *= rng.random()
    return count


class _OracleWindows:
    """Exact double-buffered counters mirroring the estimator's windows."""

    def __init__(self, delta: int):
        self.delta = delta
        self.current = ExactWindowCounter()
        self.completed = ExactWindowCounter()
        self.index = 0
        self.peak_distinct = 0

    def rotate(self, now: int) -> None:
        target = now // self.delta
        if target == self.index:
            return
        self.peak_distinct = max(self.peak_distinct, self.current.distinct())
        self.completed = self.current if target == self.index + 1 else ExactWindowCounter()
        self.current = ExactWindowCounter()
        self.index = target

    def observe(self, client_id: bytes, ts: int) -> None:
        self.current.observe(client_id, ts)


def run_simulation(config: SimConfig) -> SimResult:
    """Run one seeded workload and collect per-query records.

    Each tick: new arrivals join the queue and announce (id, t); waiting
    clients whose renewal fires re-announce (id, rho_ts); the head of the
    queue is served at service_rate; then each waiting client queries its
    rank with probability query_fraction.
    """
    rng = random.Random(config.rng_seed)
    estimator = WindowedEstimator(config.window_config())
    windows = _OracleWindows(config.delta)
    queue = ExactQueue()

    renewal_at: dict[int, list[bytes]] = {}
    records: list[QueryRecord] = []
    events = 0
    arrivals = 0
    credit = 0.0

    def announce(cid: bytes, value_ts: int, now: int) -> None:
        nonlocal events
        estimator.observe(RainCheckEvent(cid, value_ts), now)
        windows.observe(cid, value_ts)
        events += 1

    for t in range(config.duration_ticks):
        estimator.rotate(t)
        windows.rotate(t)

        for _ in range(_poisson(rng, config.arrival_rate)):
            cid = b"c%08d" % arrivals
            arrivals += 1
            queue.arrive(cid, t)
            announce(cid, t, t)
            phase = rng.randrange(config.renewal_interval)
            renewal_at.setdefault(t + 1 + phase, []).append(cid)

        for cid in renewal_at.pop(t, []):
            if queue.is_waiting(cid):
                announce(cid, queue.rho_ts(cid), t)
                renewal_at.setdefault(t + config.renewal_interval, []).append(cid)

        credit += config.service_rate
        head_count = int(credit)
        credit -= head_count
        queue.serve(head_count)

        if config.query_fraction > 0.0:
            for cid in queue.waiting_in_order():
                if rng.random() >= config.query_fraction:
                    continue
                rho = queue.rho_ts(cid)
                estimate = estimator.estimate_rank(rho, t)
                records.append(
                    QueryRecord(
                        t_cur=t,
                        client_id=cid.decode("ascii"),
                        rho_ts=rho,
                        true_rank=queue.rank(cid),
                        exact_window_count=windows.completed.count_at_most(rho),
                        sketch_estimate=estimate.estimated_rank,
                        error_bound=estimate.error_bound,
                        window_index=estimate.window_index,
                    )
                )

    summary = summarize(
        records,
        epsilon=config.epsilon,
        capacity_hint=config.effective_capacity_hint(),
        delta=config.delta,
    )
    summary["ticks"] = config.duration_ticks
    summary["events"] = events
    summary["arrivals"] = arrivals
    summary["served"] = queue.served_count
    summary["waiting_end"] = queue.waiting_count
    summary["peak_window_distinct"] = windows.peak_distinct
    return SimResult(config, records, summary, estimator.to_bytes())


def _percentiles(values: list[float]) -> dict:
    """Nearest-rank percentiles over a multiset; None-filled when empty."""
    if not values:
        return {"p50": None, "p90": None, "p99": None, "max": None}
    ordered = sorted(values)
    n = len(ordered)

    def at(q: float) -> float:
        return ordered[max(0, math.ceil(q * n) - 1)]

    return {"p50": at(0.50), "p90": at(0.90), "p99": at(0.99), "max": ordered[-1]}


def summarize(
    records: list[QueryRecord],
    epsilon: float,
    capacity_hint: int,
    delta: int | None = None,
) -> dict:
    """Error statistics over query records.

    Coverage counts rows with |sketch - exact| < epsilon * capacity_hint.
    When delta is known, slack statistics are also reported restricted to
    queries whose rho_ts falls inside the completed window, the regime
    where the count is guaranteed to upper-bound the true rank.
    """
    est_err = [abs(r.sketch_estimate - r.exact_window_count) for r in records]
    slack = [r.exact_window_count - r.true_rank for r in records]
    threshold = epsilon * capacity_hint
    summary = {
        "queries": len(records),
        "epsilon": epsilon,
        "capacity_hint": capacity_hint,
        "coverage": (
            sum(1 for e in est_err if e < threshold) / len(records) if records else None
        ),
        "estimate_abs_error": _percentiles(est_err),
        "count_minus_rank": _percentiles([float(s) for s in slack]),
    }
    if delta is not None:
        in_window = [
            r
            for r in records
            if (r.window_index - 1) * delta <= r.rho_ts < r.window_index * delta
        ]
        slack_in = [r.exact_window_count - r.true_rank for r in in_window]
        summary["in_window_queries"] = len(in_window)
        summary["in_window_slack_min"] = min(slack_in) if slack_in else None
        summary["in_window_slack_max"] = max(slack_in) if slack_in else None
        summary["in_window_violations"] = sum(1 for s in slack_in if s < 0)
    return summary


def report(records: list[QueryRecord], epsilon: float, capacity_hint: int,
           delta: int | None = None) -> tuple[str, dict]:
    """Human-readable text plus the summary dict for a record set."""
    if not records:
        raise EmptyReportError("no query records to report on")
    summary = summarize(records, epsilon, capacity_hint, delta)
    lines = [
        f"queries: {summary['queries']}",
        "abs(sketch_estimate - exact_window_count): "
        + _fmt_pct(summary["estimate_abs_error"]),
        "exact_window_count - true_rank: " + _fmt_pct(summary["count_minus_rank"]),
        f"coverage (|err| < {epsilon} * {capacity_hint}): {summary['coverage']:.4f}",
    ]
    if delta is not None:
        if summary["in_window_queries"]:
            lines.append(
                f"in-window queries: {summary['in_window_queries']}, "
                f"slack range [{summary['in_window_slack_min']}, "
                f"{summary['in_window_slack_max']}], "
                f"violations: {summary['in_window_violations']}"
            )
        else:
            lines.append("in-window queries: 0")
    return "\n".join(lines), summary


def _fmt_pct(stats: dict) -> str:
    return (
        f"p50={stats['p50']:.3f} p90={stats['p90']:.3f} "
        f"p99={stats['p99']:.3f} max={stats['max']:.3f}"
    )


def write_records(path: Path | str, records: list[QueryRecord]) -> None:
    """CSV with a fixed, versioned column order and LF line endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.t_cur,
                    r.client_id,
                    r.rho_ts,
                    r.true_rank,
                    r.exact_window_count,
                    repr(r.sketch_estimate),
                    repr(r.error_bound),
                    r.window_index,
                ]
            )


def read_records(path: Path | str) -> list[QueryRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header!r}")
        return [
            QueryRecord(
                t_cur=int(row[0]),
                client_id=row[1],
                rho_ts=int(row[2]),
                true_rank=int(row[3]),
                exact_window_count=int(row[4]),
                sketch_estimate=float(row[5]),
                error_bound=float(row[6]),
                window_index=int(row[7]),
            )
            for row in reader
        ]


def write_outputs(result: SimResult, prefix: Path | str) -> dict[str, Path]:
    """Write <prefix>.csv, <prefix>.summary.json and <prefix>.snapshot."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": prefix.with_name(prefix.name + ".csv"),
        "summary": prefix.with_name(prefix.name + ".summary.json"),
        "snapshot": prefix.with_name(prefix.name + ".snapshot"),
    }
    write_records(paths["csv"], result.records)
    paths["summary"].write_text(json.dumps(result.summary, indent=2) + "\n")
    paths["snapshot"].write_bytes(result.snapshot)
    return paths
