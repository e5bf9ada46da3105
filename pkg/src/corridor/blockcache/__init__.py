"""Striped network block store: server daemon plus parallel client."""

from corridor.blockcache.client import (
    CacheClient,
    CacheHandle,
    DatasetEntry,
    IngestError,
    InvalidHandleError,
    NotFoundError,
    OutOfRangeError,
    StoreConfig,
    TransferError,
)
from corridor.blockcache.server import CacheServer

__all__ = [
    "CacheClient",
    "CacheHandle",
    "CacheServer",
    "DatasetEntry",
    "IngestError",
    "InvalidHandleError",
    "NotFoundError",
    "OutOfRangeError",
    "StoreConfig",
    "TransferError",
]
