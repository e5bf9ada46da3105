"""`backend` entry point: render a cache-resident dataset into a viewer."""

from __future__ import annotations

import argparse
import json
import os
import sys

from corridor.backend.loader import CacheVolumeReader
from corridor.backend.pipeline import (
    AxisControl,
    BackendContext,
    ViewerLink,
    feedback_listener,
    run_backend,
)
from corridor.blockcache.client import CacheClient, DEFAULT_BLOCK_SIZE, StoreConfig
from corridor.evlog.client import CollectorSink, EventLogger, FileSink
from corridor.volume import Axis


def parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host, int(port)


def make_logger(prog: str, evlog_spec: str | None, spool_dir: str = ".") -> EventLogger:
    """Collector endpoint from --evlog or EVLOG_ADDR; local spool otherwise."""
    spec = evlog_spec or os.environ.get("EVLOG_ADDR")
    spool = os.path.join(spool_dir, f"{prog}.evlog")
    if spec:
        return EventLogger(prog, CollectorSink(parse_endpoint(spec), spool))
    return EventLogger(prog, FileSink(spool))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="backend", description="parallel slab renderer")
    parser.add_argument("--workers", type=int, required=True)
    parser.add_argument("--cache", required=True, help="host:port,host:port,...")
    parser.add_argument("--viewer", required=True, help="host:port")
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--mode", choices=["serial", "overlapped"], default="serial")
    parser.add_argument("--inject-load", type=float, default=0.0, metavar="MS")
    parser.add_argument("--inject-render", type=float, default=0.0, metavar="MS")
    parser.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE)
    parser.add_argument("--axis", default="X", help="initial decomposition axis")
    parser.add_argument("--timesteps", type=int, default=0, help="limit timesteps (0 = all)")
    parser.add_argument("--worker-index", type=int, default=-1,
                        help="run only this group (one-group-per-process deployment)")
    parser.add_argument("--evlog", default=None, help="collector host:port")
    args = parser.parse_args(argv)

    client = CacheClient(StoreConfig.parse(args.cache, block_size=args.block_size))
    reader = CacheVolumeReader(client, args.dataset)
    timesteps = args.timesteps or reader.meta.timesteps
    viewer_ep = parse_endpoint(args.viewer)

    logger = make_logger("backend", args.evlog)
    indices = list(range(args.workers)) if args.worker_index < 0 else [args.worker_index]
    links = {w: ViewerLink(viewer_ep) for w in indices}
    axis_control = AxisControl(Axis.parse(args.axis))

    ctx = BackendContext(
        reader=reader,
        workers=args.workers,
        timesteps=timesteps,
        senders={w: links[w] for w in indices},
        logger=logger,
        axis_control=axis_control,
        inject_load_s=args.inject_load / 1000.0,
        inject_render_s=args.inject_render / 1000.0,
    )
    listener = None
    if 0 in links:
        listener = feedback_listener(links[0], axis_control, logger, ctx.stop)

    try:
        report = run_backend(ctx, args.mode, worker_indices=indices)
    finally:
        ctx.stop.set()
        for link in links.values():
            link.close()
        if listener is not None:
            listener.join(timeout=2.0)
        logger.close()

    print(json.dumps({
        "mode": report.mode,
        "workers": report.workers,
        "timesteps": report.timesteps,
        "wall_s": report.wall_s,
        "heavy_bytes": report.total_heavy_bytes,
        "light_bytes": report.total_light_bytes,
        "aborted": report.aborted,
        "errors": [s.error for s in report.stats if s.error],
        "spooled_events": logger.spooled,
    }, indent=2))
    return 1 if report.aborted else 0


if __name__ == "__main__":
    sys.exit(main())
