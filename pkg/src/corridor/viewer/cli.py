"""`viewer` entry point: headless compositing viewer with optional UI bridge."""

from __future__ import annotations

import argparse
import os
import sys

from corridor.backend.cli import make_logger, parse_endpoint
from corridor.viewer.bridge import UiBridge
from corridor.viewer.receiver import SnapshotWriter, ViewerCore, ViewerServer


def default_asset_dir() -> str | None:
    candidate = os.path.join(os.getcwd(), "frontend", "dist")
    return candidate if os.path.isdir(candidate) else None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="viewer", description="compositing viewer")
    parser.add_argument("--listen", required=True, help="host:port for back-end connections")
    parser.add_argument("--workers", type=int, required=True)
    parser.add_argument("--ui-port", type=int, default=0, help="serve the UI bridge on this port (0 = off)")
    parser.add_argument("--ui-assets", default=None, help="static asset directory for the UI")
    parser.add_argument("--headless-out", default=None, help="write composite PNGs to this directory")
    parser.add_argument("--snapshot-every", type=int, default=1, metavar="K")
    parser.add_argument("--evlog", default=None, help="collector host:port")
    parser.add_argument("--timeout", type=float, default=300.0, help="give up after this many seconds")
    args = parser.parse_args(argv)

    host, port = parse_endpoint(args.listen)
    logger = make_logger("viewer", args.evlog)
    core = ViewerCore(args.workers, logger)
    server = ViewerServer(core, logger, host=host, port=port)

    snapshots = None
    if args.headless_out:
        snapshots = SnapshotWriter(core, args.headless_out, every=args.snapshot_every)

    bridge = None
    if args.ui_port:
        bridge = UiBridge(core, host="0.0.0.0", port=args.ui_port, asset_dir=args.ui_assets or default_asset_dir())
        bridge.start()
        print(f"viewer UI bridge on port {bridge.port}", flush=True)

    server.start()
    print(f"viewer listening on {host}:{server.port} for {args.workers} workers", flush=True)
    try:
        done = server.wait_done(timeout=args.timeout)
        if not done:
            print("viewer timed out waiting for back-end traffic", file=sys.stderr)
            return 1
        if snapshots is not None:
            print(f"wrote {len(snapshots.written)} composites to {args.headless_out}")
        return 0
    except KeyboardInterrupt:
        return 0
    finally:
        server.stop()
        if bridge is not None:
            bridge.stop()
        logger.close()


if __name__ == "__main__":
    sys.exit(main())
