"""`cached` server daemon and `cachectl` client tool."""

from __future__ import annotations

import argparse
import sys
import time

from corridor.blockcache.client import DEFAULT_BLOCK_SIZE, CacheClient, StoreConfig
from corridor.blockcache.server import CacheServer


def cached_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cached", description="block store server daemon")
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--host", default="0.0.0.0")
    parser.add_argument("--delay-ms", type=float, default=0.0, help="artificial response delay (testing)")
    args = parser.parse_args(argv)

    server = CacheServer(args.data_dir, host=args.host, port=args.port, delay_s=args.delay_ms / 1000.0)
    server.start()
    print(f"cached serving {args.data_dir} on {args.host}:{server.port}", flush=True)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        return 0
    finally:
        server.stop()


def _store_from_args(args) -> StoreConfig:
    return StoreConfig.parse(args.servers, block_size=args.block_size)


def _cmd_ingest(args) -> int:
    client = CacheClient(_store_from_args(args))
    entry = client.ingest(args.name, args.file)
    print(f"ingested {entry.name!r}: {entry.total_bytes} bytes in {entry.block_count} blocks "
          f"of {entry.block_size} across {client.store.stripe_count} servers")
    return 0


def _cmd_ingest_volume(args) -> int:
    from corridor.backend.loader import ingest_volume_files

    client = CacheClient(_store_from_args(args))
    meta = ingest_volume_files(client, args.name, args.descriptor)
    print(f"ingested volume {args.name!r}: dims={meta.dims} timesteps={meta.timesteps}")
    return 0


def _cmd_lookup(args) -> int:
    client = CacheClient(_store_from_args(args))
    entry = client.lookup(args.name)
    print(f"{entry.name}: id=0x{entry.dataset_id:08x} bytes={entry.total_bytes} blocks={entry.block_count}")
    return 0


def cachectl_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cachectl", description="block store client tool")
    parser.add_argument("--servers", required=True, help="host:port,host:port,...")
    parser.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE)
    sub = parser.add_subparsers(dest="command", required=True)

    p_in = sub.add_parser("ingest", help="stripe a local file into the store")
    p_in.add_argument("name")
    p_in.add_argument("file")
    p_in.set_defaults(func=_cmd_ingest)

    p_vol = sub.add_parser("ingest-volume", help="stripe a descriptor's timestep files into the store")
    p_vol.add_argument("name")
    p_vol.add_argument("descriptor")
    p_vol.set_defaults(func=_cmd_ingest_volume)

    p_look = sub.add_parser("lookup", help="print a catalog entry")
    p_look.add_argument("name")
    p_look.set_defaults(func=_cmd_lookup)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(cachectl_main())
