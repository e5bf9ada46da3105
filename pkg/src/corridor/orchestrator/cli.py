"""`corridor` entry point: run experiments, compare reports, synthesize data."""

from __future__ import annotations

import argparse
import json
import os
import sys

from corridor.orchestrator.config import ConfigError, load_config
from corridor.orchestrator.runner import RunFailure, RunReport, compare_reports, run


def _cmd_run(args) -> int:
    config = load_config(args.config)
    overrides = dict(kv.split("=", 1) for kv in args.set)
    if overrides:
        config = config.with_overrides(overrides)
    try:
        report = run(config, keep_components_s=args.keep_alive)
    except (ConfigError, RunFailure) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def _cmd_compare(args) -> int:
    a = RunReport.load(args.report_a)
    b = RunReport.load(args.report_b)
    try:
        summary = compare_reports(a, b)
    except ValueError as exc:
        print(f"compare failed: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_synth(args) -> int:
    from corridor.volume import synthesize, write_descriptor, write_timestep

    dims = tuple(int(p) for p in args.dims.split(","))
    if len(dims) != 3:
        print("--dims must be nx,ny,nz", file=sys.stderr)
        return 1
    dataset = synthesize(args.kind, dims, args.timesteps, value=args.value)
    os.makedirs(args.out, exist_ok=True)
    pattern = "timestep_{t:04d}.f32"
    for t in range(args.timesteps):
        write_timestep(os.path.join(args.out, pattern.format(t=t)), dataset.timestep(t))
    write_descriptor(os.path.join(args.out, "volume.desc"), dataset.meta, pattern)
    print(f"wrote {args.timesteps} timesteps and volume.desc to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="corridor", description="pipeline experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configured experiment")
    p_run.add_argument("config")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    p_run.add_argument("--keep-alive", type=float, default=0.0, metavar="S",
                       help="hold the stack up this long after the render (steering window)")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="serial vs overlapped speedup summary")
    p_cmp.add_argument("report_a")
    p_cmp.add_argument("report_b")
    p_cmp.set_defaults(func=_cmd_compare)

    p_synth = sub.add_parser("synth", help="write a synthetic volume to disk")
    p_synth.add_argument("--kind", default="moving-blob",
                         choices=["constant", "gaussian-blob", "moving-blob"])
    p_synth.add_argument("--dims", required=True, help="nx,ny,nz")
    p_synth.add_argument("--timesteps", type=int, required=True)
    p_synth.add_argument("--value", type=float, default=0.0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=_cmd_synth)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
