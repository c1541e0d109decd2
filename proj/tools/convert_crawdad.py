#!/usr/bin/env python3
"""Convert a raw contact/sighting log into the canonical trace CSV.

Raw Bluetooth sighting logs usually carry one contact interval per line
(two device ids plus start/end timestamps, whitespace- or comma-separated,
sometimes with extra columns). The simulator wants point meetings:
``time,a,b`` lines, integer seconds, one canonical row per symmetric
meeting. This one-shot script does the format drop: pick the id and
timestamp columns, rescale/floor times, collapse an interval to its start
instant, rebase ids to 0, and emit sorted, deduplicated canonical CSV with
the ``n=..,duration=..`` header.

Example (interval log ``id1 id2 start end`` with 1-based ids):

    python3 tools/convert_crawdad.py contacts.dat raw.csv --id-base 1

Anything smarter (windowing, dropping nodes, repeating) belongs to
``capsim preprocess``, which also emits the relabeling sidecar.
"""

import argparse
import math
import sys


def parse_args(argv):
    p = argparse.ArgumentParser(description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("input", help="raw contact log ('-' reads stdin)")
    p.add_argument("output", help="canonical CSV to write ('-' writes stdout)")
    p.add_argument("--a-col", type=int, default=0, help="column of the first node id (default 0)")
    p.add_argument("--b-col", type=int, default=1, help="column of the second node id (default 1)")
    p.add_argument("--time-col", type=int, default=2,
                   help="column of the meeting timestamp; for interval logs point it at the "
                        "start column — the interval collapses to its start instant (default 2)")
    p.add_argument("--delimiter", default=None,
                   help="field separator (default: any whitespace run)")
    p.add_argument("--time-scale", type=float, default=1.0,
                   help="multiply timestamps by this before flooring to integer seconds "
                        "(e.g. 0.001 for millisecond logs)")
    p.add_argument("--time-origin", type=float, default=0.0,
                   help="subtract this from timestamps before scaling (epoch rebase)")
    p.add_argument("--id-base", type=int, default=0,
                   help="subtract this from both ids (1 for 1-based logs)")
    p.add_argument("--skip-header", type=int, default=0, metavar="N",
                   help="drop the first N lines")
    p.add_argument("--skip-bad", action="store_true",
                   help="skip rows that fail to parse instead of aborting")
    return p.parse_args(argv)


def convert(lines, args, log=sys.stderr):
    events = set()
    skipped = 0
    self_pairs = 0
    max_id = -1
    for lineno, line in enumerate(lines, start=1):
        if lineno <= args.skip_header:
            continue
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(args.delimiter) if args.delimiter else line.split()
        try:
            a = int(fields[args.a_col]) - args.id_base
            b = int(fields[args.b_col]) - args.id_base
            raw_time = float(fields[args.time_col])
        except (IndexError, ValueError) as exc:
            if args.skip_bad:
                skipped += 1
                continue
            raise SystemExit(f"line {lineno}: cannot parse ({exc}): {line}")
        if a < 0 or b < 0:
            if args.skip_bad:
                skipped += 1
                continue
            raise SystemExit(f"line {lineno}: negative node id after --id-base: {line}")
        if a == b:
            self_pairs += 1
            continue
        time = math.floor((raw_time - args.time_origin) * args.time_scale)
        if time < 0:
            if args.skip_bad:
                skipped += 1
                continue
            raise SystemExit(f"line {lineno}: negative timestamp after rebase/scale: {line}")
        lo, hi = (a, b) if a < b else (b, a)
        events.add((time, lo, hi))
        max_id = max(max_id, hi)

    if skipped:
        print(f"skipped {skipped} unparseable rows", file=log)
    if self_pairs:
        print(f"dropped {self_pairs} self-sightings (a == b)", file=log)
    if not events:
        raise SystemExit("no usable contact rows found")

    ordered = sorted(events)
    n = max_id + 1
    duration = ordered[-1][0]
    print(f"{len(ordered)} canonical meetings, n={n}, duration={duration} s", file=log)
    return n, duration, ordered


def main(argv=None):
    args = parse_args(argv)
    source = sys.stdin if args.input == "-" else open(args.input, "r", encoding="utf-8")
    with source:
        n, duration, ordered = convert(source, args)
    sink = sys.stdout if args.output == "-" else open(args.output, "w", encoding="utf-8")
    with sink:
        sink.write(f"n={n},duration={duration}\n")
        for time, a, b in ordered:
            sink.write(f"{time},{a},{b}\n")


if __name__ == "__main__":
    main()
