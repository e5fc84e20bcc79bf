"""Command line front end: simulate, report, sketch-dump.

    rainsketch simulate --ticks 20000 --seed 1 --out run1
    rainsketch report --in run1.csv
    rainsketch sketch-dump --in run1.snapshot

``simulate`` accepts either individual flags or --config pointing at a
flat key=value file (same keys as the flag names, underscores allowed);
explicit flags override file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import serialize
from .fm import estimate_from_lsb0
from .rank import TIMESTAMP_MAX
from .sim import (
    EmptyReportError,
    SimConfig,
    read_records,
    report,
    run_simulation,
    write_outputs,
)

# flag/config key -> (SimConfig field, parser)
_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}
_FIELDS = {
    "ticks": ("duration_ticks", int),
    "arrival_rate": ("arrival_rate", float),
    "renewal": ("renewal_interval", int),
    "service_rate": ("service_rate", float),
    "delta": ("delta", int),
    "rs": ("issue_rate_bound", float),
    "epsilon": ("epsilon", float),
    "delta_prob": ("delta_prob", float),
    "sketches": ("sketches", int),
    "width": ("width", int),
    "capacity_hint": ("capacity_hint", int),
    "query_fraction": ("query_fraction", float),
    "seed": ("rng_seed", int),
    "allow_stale_renewal": ("allow_stale_renewal", lambda s: _BOOL[s.lower()]),
}


def load_config_file(path: Path | str) -> dict:
    """Parse a flat key=value config file into SimConfig kwargs."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key == "out":
            values["out"] = value.strip()
            continue
        if key not in _FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        field, parse = _FIELDS[key]
        values[field] = parse(value.strip())
    return values


def _add_simulate_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value config file")
    p.add_argument("--ticks", type=int, help="simulation length in ticks")
    p.add_argument("--arrival-rate", type=float, help="mean client arrivals per tick")
    p.add_argument("--renewal", type=int, help="ticks between a waiting client's tokens")
    p.add_argument("--service-rate", type=float, help="clients served per tick")
    p.add_argument("--delta", type=int, help="sketch window length in ticks")
    p.add_argument("--rs", type=float, help="issue rate bound in the error envelope")
    p.add_argument("--epsilon", type=float, help="relative accuracy target")
    p.add_argument("--delta-prob", type=float, help="accuracy failure probability")
    p.add_argument("--sketches", type=int, help="ensemble rows (overrides accuracy)")
    p.add_argument("--width", type=int, help="sketch width in positions")
    p.add_argument("--capacity-hint", type=int, help="distinct-client scale for the bound")
    p.add_argument("--query-fraction", type=float, help="waiting clients querying per tick")
    p.add_argument("--seed", type=int, help="workload and sketch RNG seed")
    p.add_argument(
        "--allow-stale-renewal",
        action="store_const",
        const=True,
        help="permit renewal intervals of a window or more (demonstrates the failure mode)",
    )
    p.add_argument("--out", type=str, help="output prefix (default simout)")


def _cmd_simulate(args: argparse.Namespace) -> int:
    values: dict = {}
    out = "simout"
    if args.config:
        from_file = load_config_file(args.config)
        out = from_file.pop("out", out)
        values.update(from_file)
    for key, (field, _) in _FIELDS.items():
        flag = getattr(args, key, None)
        if flag is not None:
            values[field] = flag
    if args.out is not None:
        out = args.out

    config = SimConfig(**values)
    result = run_simulation(config)
    paths = write_outputs(result, out)
    print(f"ticks={result.summary['ticks']} events={result.summary['events']} "
          f"arrivals={result.summary['arrivals']} queries={result.summary['queries']}")
    for name in ("csv", "summary", "snapshot"):
        print(f"{name}: {paths[name]}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    records = read_records(args.infile)
    capacity_hint = args.capacity_hint
    if capacity_hint is None:
        capacity_hint = max((r.exact_window_count for r in records), default=0)
    try:
        text, summary = report(records, args.epsilon, capacity_hint, args.delta)
    except EmptyReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(text)
    infile = Path(args.infile)
    summary_path = infile.with_name(infile.stem + ".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"summary: {summary_path}")
    return 0


def _dump_profile(label: str, lsb0s: list[int], nonempty: bool) -> None:
    mean = sum(lsb0s) / len(lsb0s)
    estimate = estimate_from_lsb0(mean) if nonempty else 0.0
    print(f"{label} lsb0: {' '.join(str(v) for v in lsb0s)}")
    print(f"{label} mean lsb0: {mean:.4f}  estimate: {estimate:.4f}")


def _cmd_sketch_dump(args: argparse.Namespace) -> int:
    data = Path(args.infile).read_bytes()
    kind, k, w = serialize.read_header(data)
    kind_name = {0: "fm", 1: "rank", 2: "window"}[kind]
    print(f"magic=FMRK version={serialize.FORMAT_VERSION} kind={kind_name} "
          f"sketches={k} width={w} bytes={len(data)}")
    if kind == serialize.KIND_FM:
        ens = serialize.load_fm_ensemble(data)
        _dump_profile("rows", ens.lsb0s(), not ens.is_empty)
    elif kind == serialize.KIND_RANK:
        ens = serialize.load_rank_ensemble(data)
        _dump_profile("rows", ens.lsb0s_at(TIMESTAMP_MAX), not ens.is_empty)
    else:
        current, completed, window_index, now = serialize.load_window(data)
        print(f"window_index={window_index} now={now}")
        _dump_profile("completed", completed.lsb0s_at(TIMESTAMP_MAX), not completed.is_empty)
        _dump_profile("current", current.lsb0s_at(TIMESTAMP_MAX), not current.is_empty)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rainsketch",
        description="Virtual-queue rank estimation sketches: simulate and inspect.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a seeded workload simulation")
    _add_simulate_flags(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_rep = sub.add_parser("report", help="summarize a records CSV")
    p_rep.add_argument("--in", dest="infile", required=True, type=Path)
    p_rep.add_argument("--epsilon", type=float, default=0.3)
    p_rep.add_argument("--capacity-hint", type=int, default=None,
                       help="N for the coverage threshold (default: max exact count)")
    p_rep.add_argument("--delta", type=int, default=None,
                       help="window length, enables in-window slack stats")
    p_rep.set_defaults(func=_cmd_report)

    p_dump = sub.add_parser("sketch-dump", help="print a snapshot's header and lsb0 profile")
    p_dump.add_argument("--in", dest="infile", required=True, type=Path)
    p_dump.set_defaults(func=_cmd_sketch_dump)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
