"""Run configuration: a line-oriented key=value file plus flag overrides.

Ports left at 0 are assigned ephemerally at launch; explicitly set ports
must be distinct.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from corridor.blockcache.client import DEFAULT_BLOCK_SIZE


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    kind: str = "gaussian-blob"  # constant | gaussian-blob | moving-blob
    value: float = 0.0  # scalar for kind=constant
    dims: tuple[int, int, int] = (32, 32, 32)
    timesteps: int = 5
    servers: int = 2
    workers: int = 2
    mode: str = "serial"  # serial | overlapped
    axis: str = "X"
    block_size: int = DEFAULT_BLOCK_SIZE
    inject_load_ms: float = 0.0
    inject_render_ms: float = 0.0
    cache_port_base: int = 0
    viewer_port: int = 0
    collector_port: int = 0
    ui_port: int = 0
    snapshot_every: int = 0  # 0 = no headless snapshots
    out_dir: str = "run-out"
    dataset_name: str = "dataset"

    def validate(self) -> "RunConfig":
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.servers < 1:
            raise ConfigError(f"servers must be >= 1, got {self.servers}")
        if self.timesteps < 1:
            raise ConfigError(f"timesteps must be >= 1, got {self.timesteps}")
        if self.mode not in ("serial", "overlapped"):
            raise ConfigError(f"mode must be serial or overlapped, got {self.mode!r}")
        if self.kind not in ("constant", "gaussian-blob", "moving-blob"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ConfigError(f"dims must be three positive integers, got {self.dims}")
        if self.workers > self.dims[["X", "Y", "Z"].index(self.axis.upper())]:
            raise ConfigError(f"workers={self.workers} exceeds axis extent {self.dims}")
        if self.block_size < 1:
            raise ConfigError("block_size must be positive")
        explicit = [p for p in self._port_list() if p != 0]
        if len(explicit) != len(set(explicit)):
            raise ConfigError(f"explicit ports must be distinct: {explicit}")
        return self

    def _port_list(self) -> list[int]:
        ports = [self.viewer_port, self.collector_port, self.ui_port]
        if self.cache_port_base:
            ports.extend(self.cache_port_base + i for i in range(self.servers))
        return ports

    def with_overrides(self, overrides: dict) -> "RunConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        for key, raw in overrides.items():
            if key not in values:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw, type(values[key]))
        return RunConfig(**values)


def _coerce(key: str, raw, target_type):
    if isinstance(raw, target_type) and not isinstance(raw, str):
        return raw
    text = str(raw).strip()
    if target_type is tuple:
        parts = [p for p in text.replace("x", ",").split(",") if p]
        if len(parts) != 3:
            raise ConfigError(f"{key}: expected three comma-separated integers, got {text!r}")
        return tuple(int(p) for p in parts)
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    return text


def parse_config(text: str) -> RunConfig:
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        overrides[key.strip()] = value.strip()
    return RunConfig().with_overrides(overrides)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
