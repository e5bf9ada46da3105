"""Command line entry points: `evlogd` collector daemon and `evlog` tools."""

from __future__ import annotations

import argparse
import json
import sys

from corridor.evlog.analyze import analyze_log
from corridor.evlog.records import merge_records, parse_log, serialize_record


def evlogd_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="evlogd", description="event log collector daemon")
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--out", required=True, help="log file to append records to")
    parser.add_argument("--host", default="0.0.0.0")
    args = parser.parse_args(argv)

    from corridor.evlog.collector import Collector

    collector = Collector(args.out, host=args.host, port=args.port)
    collector.start()
    print(f"evlogd listening on {args.host}:{collector.port}, writing {args.out}", flush=True)
    try:
        while collector.error is None:
            import time

            time.sleep(0.5)
        print(f"evlogd stopping: {collector.error}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    finally:
        collector.stop()


def _cmd_analyze(args) -> int:
    report = analyze_log(args.log)
    if args.report == "json":
        print(json.dumps(report.to_dict(), indent=2))
    else:
        d = report.to_dict()
        print(f"records:          {d['record_count']}")
        print(f"frames:           {d['frame_count']} ({len(d['incomplete_frames'])} incomplete)")
        print(f"mean load (s):    {d['mean_load_s']}")
        print(f"mean render (s):  {d['mean_render_s']}")
        print(f"wall (s):         {d['wall_s']:.6f}")
        print(f"overlap fraction: {d['overlap_fraction']}")
        print(f"load rate (Mbps): {d['mean_load_mbps']}")
        print(f"violations:       {len(d['ordering_violations'])}")
        for v in d["ordering_violations"]:
            print(f"  {v}")
    return 0


def _cmd_plot(args) -> int:
    from corridor.evlog.plot import plot_log

    info = plot_log(args.log, args.out, title=args.title)
    print(f"wrote {info.path} ({len(info.lifelines)} lifelines, {info.polyline_count} polylines)")
    return 0


def _cmd_merge(args) -> int:
    merged = merge_records(*(parse_log(p) for p in args.logs))
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in merged:
            fh.write(serialize_record(rec) + "\n")
    print(f"wrote {args.out} ({len(merged)} records)")
    return 0


def evlog_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="evlog", description="event log analysis tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="compute per-frame phase timings")
    p_an.add_argument("log")
    p_an.add_argument("--report", choices=["text", "json"], default="text")
    p_an.set_defaults(func=_cmd_analyze)

    p_plot = sub.add_parser("plot", help="render a lifeline plot")
    p_plot.add_argument("log")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--title", default=None)
    p_plot.set_defaults(func=_cmd_plot)

    p_merge = sub.add_parser("merge", help="merge spool/collector logs by timestamp")
    p_merge.add_argument("logs", nargs="+")
    p_merge.add_argument("--out", required=True)
    p_merge.set_defaults(func=_cmd_merge)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(evlog_main())
