import os
import threading

import numpy as np
import pytest

from corridor.blockcache.client import CacheClient, StoreConfig
from corridor.blockcache.server import CacheServer


@pytest.fixture
def cache_cluster(tmp_path):
    """Start S in-process cache servers; yields a factory for clients."""
    started: list[CacheServer] = []

    def make(servers: int, block_size: int = 4096, delays=None):
        delays = delays or {}
        group = []
        for i in range(servers):
            server = CacheServer(tmp_path / f"srv{len(started)}_{i}", delay_s=delays.get(i, 0.0))
            server.start()
            started.append(server)
            group.append(server)
        store = StoreConfig(servers=tuple(s.endpoint for s in group), block_size=block_size)
        return CacheClient(store), group

    yield make
    for server in started:
        server.stop()


@pytest.fixture
def memory_logger():
    from corridor.evlog.client import EventLogger, MemorySink

    sink = MemorySink()
    return EventLogger("backend", sink, host="testhost"), sink


def wait_until(predicate, timeout=5.0, interval=0.01):
    import time

    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()
