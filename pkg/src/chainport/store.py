"""Replicated off-chain key-value store with fault injection.

Writes go synchronously to every live replica; reads are served by the
lowest-index live replica that holds the requested version.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

from . import errors


class RetentionMode(enum.Enum):
    OVERWRITE = "overwrite"
    APPEND_VERSIONS = "append"


Replica = dict[str, dict[int, bytes]]


@dataclass
class ReplicaSet:
    n_replicas: int = 3
    mode: RetentionMode = RetentionMode.APPEND_VERSIONS
    replicas: list[Replica] = field(default_factory=list)
    failed: set[int] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not 1 <= self.n_replicas <= 255:
            raise errors.ChainportError("n_replicas must be between 1 and 255")
        if not self.replicas:
            self.replicas = [{} for _ in range(self.n_replicas)]
        if len(self.replicas) != self.n_replicas:
            raise errors.ChainportError("replica list does not match n_replicas")

    def live(self) -> list[int]:
        return [i for i in range(self.n_replicas) if i not in self.failed]

    def _first_live(self) -> Replica:
        live = self.live()
        if not live:
            raise errors.Unavailable("all replicas have failed")
        return self.replicas[live[0]]

    def latest_version(self, key: str) -> int | None:
        """Highest retained version index of ``key`` on the live view."""
        versions = self._first_live().get(key)
        return max(versions) if versions else None

    def keys(self, prefix: str = "") -> list[str]:
        return sorted(k for k in self._first_live() if k.startswith(prefix))

    def purge(self, prefix: str) -> None:
        """Drop every key under ``prefix`` from all live replicas."""
        for i in self.live():
            for k in [k for k in self.replicas[i] if k.startswith(prefix)]:
                del self.replicas[i][k]


@dataclass(frozen=True)
class Ack:
    replicas_written: int


@dataclass(frozen=True)
class StorageReport:
    total_versions: int
    per_key: dict[str, int]


def _check_index(store: ReplicaSet, index: int) -> None:
    if not 0 <= index < store.n_replicas:
        raise errors.ChainportError(f"replica index {index} out of range 0..{store.n_replicas - 1}")


def store_write(store: ReplicaSet, key: str, version_index: int, value: bytes) -> Ack:
    live = store.live()
    if not live:
        raise errors.Unavailable("all replicas have failed")
    value = bytes(value)
    for i in live:
        replica = store.replicas[i]
        if store.mode is RetentionMode.OVERWRITE:
            replica[key] = {version_index: value}
        else:
            replica.setdefault(key, {})[version_index] = value
    return Ack(len(live))


def store_read(store: ReplicaSet, key: str, version_index: int | None = None) -> bytes:
    live = store.live()
    if not live:
        raise errors.Unavailable("all replicas have failed")
    for i in live:
        versions = store.replicas[i].get(key)
        if not versions:
            continue
        v = max(versions) if version_index is None else version_index
        if v in versions:
            return versions[v]
    what = key if version_index is None else f"{key}@{version_index}"
    raise errors.NotFound(f"{what} not in store")


def fail_replica(store: ReplicaSet, index: int) -> ReplicaSet:
    _check_index(store, index)
    store.failed.add(index)
    return store


def recover_replica(store: ReplicaSet, index: int) -> ReplicaSet:
    _check_index(store, index)
    if index not in store.failed:
        return store
    store.failed.discard(index)
    donors = [i for i in store.live() if i != index]
    store.replicas[index] = copy.deepcopy(store.replicas[donors[0]]) if donors else {}
    return store


def storage_report(store: ReplicaSet) -> StorageReport:
    view = store._first_live()
    per_key = {k: len(v) for k, v in sorted(view.items())}
    return StorageReport(sum(per_key.values()), per_key)
