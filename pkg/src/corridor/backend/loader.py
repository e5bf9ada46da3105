"""Volume access for the renderer: cache-backed and in-memory readers.

A time-varying volume lives in the block store as one dataset per
timestep, named ``<name>/<t>``, plus a ``<name>.desc`` dataset holding the
key=value descriptor (dimensions, timestep count, scalar range).  Slab
loads issue block-level reads covering only the slab's byte runs, batched
into one pipelined fetch per timestep.
"""

from __future__ import annotations

import numpy as np

from corridor.blockcache.client import CacheClient
from corridor.volume import (
    SlabAssignment,
    SyntheticDataset,
    VolumeMeta,
    descriptor_text,
    parse_descriptor,
    read_descriptor,
    read_timestep,
    slab_byte_runs,
    slab_from_run_bytes,
    slice_slab,
    timestep_array,
)


def timestep_dataset_name(name: str, t: int) -> str:
    return f"{name}/{t}"


def descriptor_dataset_name(name: str) -> str:
    return f"{name}.desc"


def ingest_volume(client: CacheClient, name: str, dataset: SyntheticDataset) -> VolumeMeta:
    """Stripe an in-memory dataset into the store under `name`."""
    meta = dataset.meta
    for t in range(meta.timesteps):
        arr = timestep_array(dataset.timestep(t))
        client.ingest(timestep_dataset_name(name, t), arr.tobytes())
    client.ingest(descriptor_dataset_name(name), descriptor_text(meta).encode("utf-8"))
    return meta


def ingest_volume_files(client: CacheClient, name: str, descriptor_path) -> VolumeMeta:
    """Stripe a descriptor's timestep files into the store under `name`."""
    import os

    meta, pattern = read_descriptor(descriptor_path)
    if not pattern:
        raise ValueError(f"{descriptor_path}: descriptor has no file pattern")
    base = os.path.dirname(os.fspath(descriptor_path))
    for t in range(meta.timesteps):
        path = os.path.join(base, pattern.format(t=t))
        arr = read_timestep(path, meta.dims)
        client.ingest(timestep_dataset_name(name, t), arr.tobytes())
    client.ingest(descriptor_dataset_name(name), descriptor_text(meta).encode("utf-8"))
    return meta


class CacheVolumeReader:
    """Loads slabs of a cache-resident volume via block-level reads."""

    def __init__(self, client: CacheClient, name: str):
        self.client = client
        self.name = name
        with client.open(descriptor_dataset_name(name)) as handle:
            text = handle.read(0, handle.entry.total_bytes).decode("utf-8")
        self.meta, _ = parse_descriptor(text)

    def read_slab(self, t: int, assignment: SlabAssignment) -> np.ndarray:
        runs = slab_byte_runs(self.meta.dims, assignment)
        with self.client.open(timestep_dataset_name(self.name, t)) as handle:
            chunks = handle.readv(runs)
        return slab_from_run_bytes(self.meta.dims, assignment, chunks)

    def read_timestep(self, t: int) -> np.ndarray:
        nx, ny, nz = self.meta.dims
        with self.client.open(timestep_dataset_name(self.name, t)) as handle:
            data = handle.read(0, handle.entry.total_bytes)
        return np.frombuffer(data, dtype="<f4").reshape(nz, ny, nx)


class MemoryVolumeReader:
    """Same interface over an in-memory dataset; used for local runs."""

    def __init__(self, dataset: SyntheticDataset):
        self.dataset = dataset
        self.meta = dataset.meta

    def read_slab(self, t: int, assignment: SlabAssignment) -> np.ndarray:
        return np.ascontiguousarray(slice_slab(self.dataset.timestep(t), assignment))

    def read_timestep(self, t: int) -> np.ndarray:
        return self.dataset.timestep(t)
