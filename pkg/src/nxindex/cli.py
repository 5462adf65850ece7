"""Command-line entry point: ``nxindex <subcommand> ...``.

Exit status: 0 success, 1 usage error, 2 data error, 3 I/O error.
Diagnostics go to stderr, data to stdout or to the named output files.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import bench, kernels, synth
from .errors import DataError, InvalidScale, IoFailure, UnknownProfile
from .index import build_index
from .loader import MODES, load_event_nexus
from .schema import DATASET, NX_CLASS, ROOT, classify
from .store import open_store, write_store

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("nxindex")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_list(text: str) -> list[str]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nxindex", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic instrument file")
    g.add_argument("--profile", required=True, choices=synth.PROFILE_NAMES)
    g.add_argument("--seed", type=_u64, default=0)
    g.add_argument("--scale", type=float, default=synth.DEFAULT_SCALE)
    g.add_argument("-o", "--output", required=True, type=Path)

    i = sub.add_parser("inspect", help="summarize a file's records")
    i.add_argument("path", type=Path)
    i.add_argument("--tree", action="store_true", help="print the full hierarchy")

    x = sub.add_parser("index", help="build the metadata index and report bucket sizes")
    x.add_argument("path", type=Path)
    x.add_argument("--dump", action="store_true", help="print every indexed path per class")

    ld = sub.add_parser("load", help="load a file into an event workspace")
    ld.add_argument("path", type=Path)
    ld.add_argument("--mode", required=True, choices=MODES)
    ld.add_argument("--json", action="store_true", help="emit a JSON summary")
    ld.add_argument("--meta-latency-us", type=float, default=0.0)
    ld.add_argument("--workers", type=int, default=1)

    b = sub.add_parser("bench", help="benchmark legacy vs indexed loading")
    b.add_argument("--profiles", required=True, type=_csv_list)
    b.add_argument("--repeat", required=True, type=int)
    b.add_argument("--scale", type=float, default=synth.DEFAULT_SCALE)
    b.add_argument("--meta-latency-us", type=float, default=0.0)
    b.add_argument("--cache", choices=("fresh", "repeated"), default="repeated")
    b.add_argument("--seed", type=_u64, default=0)
    b.add_argument("--csv", required=True, type=Path)
    b.add_argument("--summary-csv", type=Path, default=None,
                   help="summary output (default: <csv stem>.summary.csv)")
    return p


def cmd_gen(args, out) -> None:
    profile = synth.instrument_profile(args.profile)
    try:
        model = synth.generate(profile, args.seed, args.scale)
    except InvalidScale as exc:
        raise UsageError(str(exc)) from exc
    write_store(model, args.output)
    sidecar = Path(str(args.output) + ".provenance.txt")
    try:
        sidecar.write_text(synth.provenance(profile, args.seed, args.scale, model))
    except OSError as exc:
        raise IoFailure(f"cannot write {sidecar}: {exc}") from exc
    log.info("wrote %s (%d entries)", args.output, model.n_entries)


def cmd_inspect(args, out) -> None:
    with open_store(args.path) as h:
        recs = h.records
        groups = sum(1 for r in recs if r.kind != DATASET)
        payload = sum(r.byte_length for r in recs if r.kind == DATASET)
        print(f"file: {args.path}", file=out)
        print(f"size_bytes: {h.file_size}", file=out)
        print(f"records: {len(recs)}", file=out)
        print(f"entries: {len(recs) - 1}", file=out)
        print(f"groups: {groups}", file=out)
        print(f"datasets: {len(recs) - groups}", file=out)
        print(f"payload_bytes: {payload}", file=out)
        if args.tree:
            for r in recs:
                if r.path == ROOT:
                    print("/", file=out)
                    continue
                pad = "  " * r.path.depth
                if r.kind == DATASET:
                    print(f"{pad}{r.path.name}  {r.dtype}[{r.element_count}]", file=out)
                else:
                    print(f"{pad}{r.path.name}  <{classify(r.kind, r.attribute(NX_CLASS))}>", file=out)


def cmd_index(args, out) -> None:
    with open_store(args.path) as h:
        ix = build_index(h)
        c = h.counters()
    width = max((len(k) for k in ix.classes), default=8) + 2
    if args.dump:
        print(f"{'NX_class':<{width}}absolute path", file=out)
        for cls, paths in ix.as_dict().items():
            for k, p in enumerate(paths):
                print(f"{cls if k == 0 else '':<{width}}{p}", file=out)
            print("", file=out)
    else:
        for cls, n in ix.bucket_sizes().items():
            print(f"{cls:<{width}}{n}", file=out)
        print(f"{'total':<{width}}{len(ix)}", file=out)
    log.info("index built with %d list_children and %d read_attribute calls",
             c.list_children_calls, c.read_attribute_calls)


def load_summary(ws, mode: str, counters) -> dict:
    return {
        "mode": mode,
        "n_logs": len(ws.logs),
        "logs": sorted(ws.logs),
        "n_monitors": len(ws.monitors),
        "monitor_totals": {k: int(v.sum()) for k, v in sorted(ws.monitors.items())},
        "n_detector_banks": len(ws.geometry.banks),
        "bank_events": dict(sorted(ws.bank_totals.items())),
        "n_events": ws.n_events,
        "n_pixels_with_events": int(ws.pixel_ids.shape[0]),
        "counters": counters._asdict(),
    }


def cmd_load(args, out) -> None:
    with open_store(args.path, meta_latency_us=args.meta_latency_us) as h:
        ws = load_event_nexus(h, args.mode, workers=args.workers)
        c = h.counters()
    summary = load_summary(ws, args.mode, c)
    if args.json:
        json.dump(summary, out, sort_keys=True, indent=2)
        out.write("\n")
        return
    print(f"mode: {args.mode}", file=out)
    print(f"logs: {summary['n_logs']}", file=out)
    print(f"monitors: {summary['n_monitors']}", file=out)
    print(f"banks: {len(summary['bank_events'])}", file=out)
    print(f"events: {summary['n_events']}", file=out)
    print(f"pixels_with_events: {summary['n_pixels_with_events']}", file=out)
    for k, v in summary["counters"].items():
        print(f"{k}: {v}", file=out)


def cmd_bench(args, out) -> None:
    try:
        cfg = bench.BenchConfig(profiles=args.profiles, repeats=args.repeat, event_scale=args.scale,
                                meta_latency_us=args.meta_latency_us, cache_mode=args.cache,
                                seed=args.seed)
    except (ValueError, UnknownProfile) as exc:
        raise UsageError(str(exc)) from exc
    report = bench.run_benchmark(cfg)
    summary_path = args.summary_csv or args.csv.with_name(args.csv.stem + ".summary.csv")
    try:
        report.write_csv(args.csv)
        report.write_summary_csv(summary_path)
    except OSError as exc:
        raise IoFailure(f"cannot write benchmark output: {exc}") from exc
    print(",".join(bench.SUMMARY_HEADER), file=out)
    for s in report.summaries:
        print(f"{s.profile},{s.legacy_wall_ms_median:.3f},{s.indexed_wall_ms_median:.3f},"
              f"{s.relative_speedup:.4f},{s.call_reduction_ratio:.3f}", file=out)


COMMANDS = {"gen": cmd_gen, "inspect": cmd_inspect, "index": cmd_index,
            "load": cmd_load, "bench": cmd_bench}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"nxindex: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_OK
    except IoFailure as exc:
        print(f"nxindex: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataError as exc:
        print(f"nxindex: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"nxindex: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK
