"""Launch the full pipeline from one config and bind measurement to model.

All components run in-process on one host (each also has a standalone
CLI for multi-host deployment); endpoints are explicit TCP sockets either
way, so the wire protocols are exercised end to end.  Teardown runs on
every exit path and the report records the ports that must be dead
afterwards.
"""

from __future__ import annotations

import json
import os
import shutil
import time
from dataclasses import asdict, dataclass, field

from corridor.backend.loader import CacheVolumeReader, ingest_volume
from corridor.backend.pipeline import (
    AxisControl,
    BackendContext,
    ViewerLink,
    feedback_listener,
    run_backend,
)
from corridor.backend.timing import TimingModel, equal_phase_speedup_bound, predict
from corridor.blockcache.client import CacheClient, StoreConfig
from corridor.blockcache.server import CacheServer
from corridor.evlog.analyze import analyze_log
from corridor.evlog.client import CollectorSink, EventLogger
from corridor.evlog.collector import Collector
from corridor.evlog.plot import plot_log
from corridor.orchestrator.config import RunConfig
from corridor.viewer.bridge import UiBridge
from corridor.viewer.receiver import SnapshotWriter, ViewerCore, ViewerServer
from corridor.volume import Axis, synthesize


class RunFailure(RuntimeError):
    pass


@dataclass
class RunReport:
    config: dict
    mode: str
    wall_s: float
    mean_load_s: float | None
    mean_render_s: float | None
    predicted_t_serial: float | None
    predicted_t_overlapped: float | None
    predicted_speedup: float | None
    overlap_fraction: float | None
    ordering_violations: int
    mean_load_mbps: float | None
    mean_heavy_mbps: float | None
    light_bytes: int
    heavy_bytes: int
    heavy_bytes_per_timestep: float
    checks: dict = field(default_factory=dict)
    ports: dict = field(default_factory=dict)
    log_path: str = ""
    plot_path: str = ""
    aborted: bool = False
    errors: list = field(default_factory=list)
    spooled_events: int = 0
    axis_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(**{k: data[k] for k in data if k in cls.__dataclass_fields__})

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "RunReport":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def run(config: RunConfig, keep_components_s: float = 0.0) -> RunReport:
    """Run one experiment: ingest, render, collect, analyze, report.

    `keep_components_s` holds the stack up after the render completes (the
    UI bridge stays reachable), for interactive or scripted steering.
    """
    config.validate()
    out_dir = config.out_dir
    os.makedirs(out_dir, exist_ok=True)

    collector: Collector | None = None
    cache_servers: list[CacheServer] = []
    viewer_server: ViewerServer | None = None
    bridge: UiBridge | None = None
    loggers: list[EventLogger] = []
    links: dict[int, ViewerLink] = {}
    report_ports: dict = {}

    try:
        log_path = os.path.join(out_dir, "events.log")
        if os.path.exists(log_path):
            os.remove(log_path)
        collector = Collector(log_path, port=config.collector_port).start()
        report_ports["collector"] = collector.port

        for i in range(config.servers):
            data_dir = os.path.join(out_dir, f"cache{i}")
            shutil.rmtree(data_dir, ignore_errors=True)
            port = config.cache_port_base + i if config.cache_port_base else 0
            cache_servers.append(CacheServer(data_dir, port=port).start())
        report_ports["cache"] = [s.port for s in cache_servers]

        store = StoreConfig(
            servers=tuple(s.endpoint for s in cache_servers), block_size=config.block_size
        )
        client = CacheClient(store)
        dataset = synthesize(config.kind, config.dims, config.timesteps, value=config.value)
        ingest_volume(client, config.dataset_name, dataset)

        def logger_for(prog: str) -> EventLogger:
            sink = CollectorSink(collector.endpoint, os.path.join(out_dir, f"{prog}.spool"))
            logger = EventLogger(prog, sink)
            loggers.append(logger)
            return logger

        viewer_logger = logger_for("viewer")
        core = ViewerCore(config.workers, viewer_logger)
        viewer_server = ViewerServer(core, viewer_logger, port=config.viewer_port).start()
        report_ports["viewer"] = viewer_server.port

        if config.snapshot_every:
            SnapshotWriter(core, os.path.join(out_dir, "snapshots"), every=config.snapshot_every)
        if config.ui_port:
            bridge = UiBridge(core, port=config.ui_port).start()
            report_ports["ui"] = bridge.port

        backend_logger = logger_for("backend")
        reader = CacheVolumeReader(client, config.dataset_name)
        axis_control = AxisControl(Axis.parse(config.axis))
        for w in range(config.workers):
            links[w] = ViewerLink(viewer_server.endpoint)
        ctx = BackendContext(
            reader=reader,
            workers=config.workers,
            timesteps=config.timesteps,
            senders=links,
            logger=backend_logger,
            axis_control=axis_control,
            inject_load_s=config.inject_load_ms / 1000.0,
            inject_render_s=config.inject_render_ms / 1000.0,
        )
        feedback_listener(links[0], axis_control, backend_logger, ctx.stop)

        backend_report = run_backend(ctx, config.mode)

        if keep_components_s > 0:
            time.sleep(keep_components_s)

        ctx.stop.set()
        for link in links.values():
            link.close()
        viewer_server.wait_done(timeout=10.0)

        spooled_total = 0
        for logger in loggers:
            logger.flush()
            logger.close()
            spooled_total += logger.spooled
        loggers.clear()
        collector_path = collector.path
        collector.stop()
        collector = None

        phases = analyze_log(collector_path)
        model = None
        if phases.mean_load_s is not None and phases.mean_render_s is not None:
            model = TimingModel(phases.mean_load_s, phases.mean_render_s, config.timesteps)
        t_serial, t_overlapped, speedup = predict(model) if model else (None, None, None)

        plot_path = os.path.join(out_dir, "lifelines.svg")
        try:
            plot_log(collector_path, plot_path, title=f"{config.mode} run")
        except ValueError:
            plot_path = ""

        checks: dict = {}
        if config.mode == "serial":
            checks["serial_ordering_clean"] = len(phases.violations) == 0
            checks["no_overlap"] = (phases.overlap_fraction or 0.0) == 0.0
            model_wall = t_serial
        else:
            checks["overlap_fraction_ge_80pct"] = (phases.overlap_fraction or 0.0) >= 0.8
            model_wall = t_overlapped
        if model_wall:
            checks["wall_within_15pct_of_model"] = abs(backend_report.wall_s - model_wall) <= 0.15 * model_wall
        checks["completed"] = not backend_report.aborted

        report = RunReport(
            config={
                "kind": config.kind,
                "dims": list(config.dims),
                "timesteps": config.timesteps,
                "servers": config.servers,
                "workers": config.workers,
                "mode": config.mode,
                "inject_load_ms": config.inject_load_ms,
                "inject_render_ms": config.inject_render_ms,
                "block_size": config.block_size,
            },
            mode=config.mode,
            wall_s=backend_report.wall_s,
            mean_load_s=phases.mean_load_s,
            mean_render_s=phases.mean_render_s,
            predicted_t_serial=t_serial,
            predicted_t_overlapped=t_overlapped,
            predicted_speedup=speedup,
            overlap_fraction=phases.overlap_fraction,
            ordering_violations=len(phases.violations),
            mean_load_mbps=phases.mean_load_mbps,
            mean_heavy_mbps=phases.mean_heavy_mbps,
            light_bytes=backend_report.total_light_bytes,
            heavy_bytes=backend_report.total_heavy_bytes,
            heavy_bytes_per_timestep=backend_report.total_heavy_bytes / config.timesteps,
            checks=checks,
            ports=report_ports,
            log_path=collector_path,
            plot_path=plot_path,
            aborted=backend_report.aborted,
            errors=[s.error for s in backend_report.stats if s.error],
            spooled_events=spooled_total,
            axis_history=[s.axis_history for s in backend_report.stats],
        )
        report.write(os.path.join(out_dir, "report.json"))
        if backend_report.aborted:
            raise RunFailure(f"backend aborted: {report.errors}")
        return report
    finally:
        for link in links.values():
            link.close()
        if viewer_server is not None:
            viewer_server.stop()
        if bridge is not None:
            bridge.stop()
        for server in cache_servers:
            server.stop()
        for logger in loggers:
            try:
                logger.close()
            except Exception:  # noqa: BLE001 - teardown must not mask the cause
                pass
        if collector is not None:
            collector.stop()


def compare_reports(serial: RunReport, overlapped: RunReport) -> dict:
    """Measured serial/overlapped speedup next to the model's bound."""
    if serial.mode == overlapped.mode:
        raise ValueError("need one serial and one overlapped report")
    if serial.mode != "serial":
        serial, overlapped = overlapped, serial
    keys = ("kind", "dims", "timesteps", "servers", "workers", "inject_load_ms", "inject_render_ms")
    mismatch = [k for k in keys if serial.config.get(k) != overlapped.config.get(k)]
    if mismatch:
        raise ValueError(f"reports differ beyond mode: {mismatch}")

    timesteps = serial.config["timesteps"]
    measured = serial.wall_s / overlapped.wall_s if overlapped.wall_s else None
    return {
        "serial_wall_s": serial.wall_s,
        "overlapped_wall_s": overlapped.wall_s,
        "measured_speedup": measured,
        "predicted_speedup": serial.predicted_speedup,
        "equal_phase_bound": equal_phase_speedup_bound(timesteps),
        "timesteps": timesteps,
    }
