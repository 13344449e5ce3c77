"""The minimal application API that runs unchanged on any supported chain.

Two storage designs sit behind the same calls:

* ``IN_CHAIN`` (design A): every put writes the value itself as a chain entry.
* ``EXTERNAL_STORE`` (design B): the chain carries SHA-256 of each value and
  the value lives in a replicated off-chain store.

An application's log may be spread over several places after migrations:
archived segments of earlier chains, an imported snapshot left by an
existence-only migration, and the live home chain. ``_slots`` stitches them
into one ordered log per key.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, MutableMapping

from . import errors
from ._wire import I64, sha256
from .archive import ArchiveChain
from .chain import Bytes, Chain, LedgerEntry, check_key, confirm_block, get_entries, submit_entry
from .store import ReplicaSet, RetentionMode, store_read, store_write

MAX_VALUE_BYTES = 1 << 20
MAX_APP_ID_BYTES = 128
RESERVED_PREFIX = "__"
ANCHOR_NAME = "__anchor"
COPIED_NAME = "__copied"
COPIER_NAME = "__copier"


class StorageDesign(enum.Enum):
    IN_CHAIN = "A"
    EXTERNAL_STORE = "B"


@dataclass(frozen=True)
class AppConfig:
    app_id: str
    storage_design: StorageDesign = StorageDesign.IN_CHAIN
    requires_change_verification: bool = True
    key_namespace: str = ""

    def __post_init__(self) -> None:
        raw = self.app_id.encode("utf-8", "surrogatepass") if isinstance(self.app_id, str) else b""
        if not raw or len(raw) > MAX_APP_ID_BYTES:
            raise errors.KeyInvalid(f"app id must be 1..{MAX_APP_ID_BYTES} bytes of UTF-8")
        if not self.key_namespace:
            object.__setattr__(self, "key_namespace", f"{self.app_id}/")

    @property
    def expected_retention(self) -> RetentionMode:
        if self.requires_change_verification:
            return RetentionMode.APPEND_VERSIONS
        return RetentionMode.OVERWRITE

    @property
    def keeps_log(self) -> bool:
        """True when every put leaves a chain entry (so history and sums are available)."""
        return self.storage_design is StorageDesign.IN_CHAIN or self.requires_change_verification


@dataclass(frozen=True)
class StateVersion:
    key: str
    value: bytes
    version_index: int
    value_digest: bytes
    logical_time: tuple[int, int] | None


@dataclass(frozen=True)
class Segment:
    """Part of the log that lives in ``archives[archive_index]`` from ``since_height`` on."""

    archive_index: int
    since_height: int


@dataclass(frozen=True)
class ImportedVersion:
    """Latest version of a key as re-recorded by an existence-only migration."""

    key: str
    version_index: int
    stored: bytes  # the value (design A) or its digest (design B)
    holds_value: bool
    source_chain_id: bytes
    source_time: tuple[int, int]
    wall_clock: int
    copied_at: tuple[int, int]


@dataclass
class AppLedger:
    config: AppConfig
    chain: Chain
    store_binding: ReplicaSet | None = None
    archive_anchor: bytes | None = None
    archives: ArchiveChain = field(default_factory=ArchiveChain)
    segments: list[Segment] = field(default_factory=list)
    home_since: int = 0
    imported: dict[str, ImportedVersion] = field(default_factory=dict)
    attestation: object | None = None
    import_chain: Chain | None = None  # where the existence-only copy was recorded
    migrated_to: bytes | None = None

    @property
    def app_id(self) -> str:
        return self.config.app_id

    @property
    def home_chain(self) -> bytes:
        return self.chain.chain_id

    @property
    def namespace(self) -> str:
        return self.config.key_namespace

    def chain_key(self, key: str) -> str:
        if not isinstance(key, str) or not key:
            raise errors.KeyInvalid("record key must be a non-empty string")
        if key.startswith(RESERVED_PREFIX):
            raise errors.KeyInvalid(f"keys starting with {RESERVED_PREFIX!r} are reserved")
        nkey = self.namespace + key
        check_key(nkey)
        return nkey

    def reserved_key(self, name: str) -> str:
        return self.namespace + name


@dataclass(frozen=True)
class _Slot:
    """One on-chain log record of a key, wherever it currently lives."""

    version_index: int
    stored: bytes
    logical_time: tuple[int, int]
    wall_clock: int
    chain_id: bytes
    archive_index: int | None
    entry: LedgerEntry | None  # None for an imported snapshot


def create_app(
    config: AppConfig,
    home_chain: Chain,
    store: ReplicaSet | None = None,
    registry: MutableMapping[str, AppLedger] | None = None,
) -> AppLedger:
    if registry is not None and config.app_id in registry:
        raise errors.DuplicateApp(f"app {config.app_id!r} already exists")
    if config.storage_design is StorageDesign.EXTERNAL_STORE:
        if store is None:
            raise errors.StoreRequired("design B needs an external store")
        if store.mode is not config.expected_retention:
            raise errors.StoreMismatch(
                f"store retains {store.mode.value} but the app needs {config.expected_retention.value}"
            )
    elif store is not None:
        raise errors.StoreMismatch("design A keeps data in-chain and takes no store")
    ledger = AppLedger(config, home_chain, store, home_since=len(home_chain.blocks))
    if registry is not None:
        registry[config.app_id] = ledger
    return ledger


def _is_value_design(ledger: AppLedger) -> bool:
    return ledger.config.storage_design is StorageDesign.IN_CHAIN


def _entries(ledger: AppLedger, nkey: str) -> Iterator[tuple[bytes, int | None, LedgerEntry]]:
    for seg in ledger.segments:
        archive = ledger.archives.archives[seg.archive_index]
        for e in archive.entries_for(nkey, seg.since_height):
            yield archive.chain_id, seg.archive_index, e
    for e in get_entries(ledger.chain, nkey, ledger.home_since):
        yield ledger.chain.chain_id, None, e


def _slots(ledger: AppLedger, key: str) -> list[_Slot]:
    nkey = ledger.chain_key(key)
    slots = []
    imp = ledger.imported.get(key)
    if imp is not None:
        slots.append(_Slot(imp.version_index, imp.stored, imp.source_time, imp.wall_clock, imp.source_chain_id, None, None))
    for chain_id, archive_index, e in _entries(ledger, nkey):
        if not isinstance(e.payload, Bytes):
            raise errors.DecodeError(f"entry {e.logical_time} for {key!r} is not a byte payload")
        n = slots[-1].version_index + 1 if slots else 0
        slots.append(_Slot(n, e.payload.data, e.logical_time, e.wall_clock, chain_id, archive_index, e))
    return slots


def app_keys(ledger: AppLedger) -> list[str]:
    """Every application key with at least one log record (or stored value)."""
    ns = ledger.namespace
    found: set[str] = set(ledger.imported)
    for seg in ledger.segments:
        archive = ledger.archives.archives[seg.archive_index]
        found.update(k[len(ns):] for k in archive.keys() if k.startswith(ns) and archive.entries_for(k, seg.since_height))
    for k in ledger.chain.keys():
        if k.startswith(ns) and get_entries(ledger.chain, k, ledger.home_since):
            found.add(k[len(ns):])
    if ledger.store_binding is not None and not ledger.config.requires_change_verification:
        found.update(k[len(ns):] for k in ledger.store_binding.keys(ns))
    return sorted(k for k in found if not k.startswith(RESERVED_PREFIX))


def _ensure_live(ledger: AppLedger) -> None:
    if ledger.migrated_to is not None:
        raise errors.MigratedAway(f"app {ledger.app_id!r} has migrated to chain {ledger.migrated_to.hex()}")


def _check_clock(chain: Chain, wall_clock: int) -> None:
    if chain.blocks and wall_clock < chain.blocks[-1].wall_clock:
        raise errors.NonMonotonicClock(
            f"wall clock {wall_clock} precedes previous block's {chain.blocks[-1].wall_clock}"
        )


def _record(ledger: AppLedger, nkey: str, data: bytes, wall_clock: int) -> tuple[int, int]:
    submit_entry(ledger.chain, nkey, Bytes(data), wall_clock)
    index = len(ledger.chain.pending) - 1
    block = confirm_block(ledger.chain, wall_clock)
    return block.height, index


def put_state(ledger: AppLedger, key: str, value: bytes, wall_clock: int) -> StateVersion:
    _ensure_live(ledger)
    nkey = ledger.chain_key(key)
    value = bytes(value)
    if len(value) > MAX_VALUE_BYTES:
        raise errors.PayloadTooLarge(f"value of {len(value)} bytes exceeds {MAX_VALUE_BYTES}")
    _check_clock(ledger.chain, wall_clock)
    digest = sha256(value)

    if _is_value_design(ledger):
        slots = _slots(ledger, key)
        version = slots[-1].version_index + 1 if slots else 0
        return StateVersion(key, value, version, digest, _record(ledger, nkey, value, wall_clock))

    store = ledger.store_binding
    if ledger.config.requires_change_verification:
        slots = _slots(ledger, key)
        version = slots[-1].version_index + 1 if slots else 0
        store_write(store, nkey, version, value)
        return StateVersion(key, value, version, digest, _record(ledger, nkey, digest, wall_clock))

    # overwrite mode: only a key's first value is recorded on chain; later ones wait for checkpoint()
    latest = store.latest_version(nkey)
    version = 0 if latest is None else latest + 1
    store_write(store, nkey, version, value)
    logical_time = _record(ledger, nkey, digest, wall_clock) if latest is None else None
    return StateVersion(key, value, version, digest, logical_time)


def checkpoint(ledger: AppLedger, wall_clock: int, keys: list[str] | None = None) -> list[StateVersion]:
    """Record the current value digest of each key on chain (design B overwrite mode only)."""
    _ensure_live(ledger)
    if ledger.config.keeps_log:
        raise errors.CheckpointNotApplicable("checkpoints only apply to design B without change verification")
    _check_clock(ledger.chain, wall_clock)
    store = ledger.store_binding
    if keys is None:
        keys = [k[len(ledger.namespace):] for k in store.keys(ledger.namespace)]
    pending = []
    for key in keys:
        nkey = ledger.chain_key(key)
        value = store_read(store, nkey)
        pending.append((key, value, store.latest_version(nkey)))
        submit_entry(ledger.chain, nkey, Bytes(sha256(value)), wall_clock)
    base = len(ledger.chain.pending) - len(pending)
    block = confirm_block(ledger.chain, wall_clock)
    return [
        StateVersion(key, value, version, sha256(value), (block.height, base + i))
        for i, (key, value, version) in enumerate(pending)
    ]


def _value_of(ledger: AppLedger, key: str, slot: _Slot) -> bytes:
    if _is_value_design(ledger):
        return slot.stored
    return store_read(ledger.store_binding, ledger.chain_key(key), slot.version_index)


def get_state(ledger: AppLedger, key: str) -> bytes:
    if not ledger.config.keeps_log:
        return store_read(ledger.store_binding, ledger.chain_key(key))
    slots = _slots(ledger, key)
    if not slots:
        raise errors.NotFound(f"no state for key {key!r}")
    latest = slots[-1]
    value = _value_of(ledger, key, latest)
    if not _is_value_design(ledger) and sha256(value) != latest.stored:
        raise errors.IntegrityError(f"stored value of {key!r} does not match its on-chain digest")
    return value


def _require_history(ledger: AppLedger) -> None:
    if not ledger.config.requires_change_verification:
        raise errors.HistoryDisabled(f"app {ledger.app_id!r} does not keep change history")


def get_history(ledger: AppLedger, key: str) -> list[StateVersion]:
    _require_history(ledger)
    out = []
    for slot in _slots(ledger, key):
        digest = sha256(slot.stored) if _is_value_design(ledger) else slot.stored
        out.append(StateVersion(key, _value_of(ledger, key, slot), slot.version_index, digest, slot.logical_time))
    return out


@dataclass(frozen=True)
class Violation:
    version_index: int


def verify_state_changes(ledger: AppLedger, key: str) -> Violation | None:
    """Recompute every version's digest; None when the whole log matches."""
    _require_history(ledger)
    if ledger.imported:
        raise errors.ChangeVerificationUnsupported(
            "log before the existence-only migration was abandoned; changes cannot be verified"
        )
    for slot in _slots(ledger, key):
        if slot.entry is not None and not slot.entry.digest_ok():
            return Violation(slot.version_index)
        if _is_value_design(ledger):
            continue
        try:
            value = _value_of(ledger, key, slot)
        except errors.NotFound:
            return Violation(slot.version_index)
        if sha256(value) != slot.stored:
            return Violation(slot.version_index)
    return None


def encode_delta(delta: int) -> bytes:
    return I64.pack(delta)


def derive_numeric_state(ledger: AppLedger, key: str) -> int:
    """Sum of all 8-byte big-endian signed deltas ever put under ``key``."""
    if not ledger.config.keeps_log:
        raise errors.HistoryDisabled("overwrite mode keeps no log to sum")
    total = 0
    for slot in _slots(ledger, key):
        value = _value_of(ledger, key, slot)
        if len(value) != I64.size:
            raise errors.DecodeError(f"version {slot.version_index} of {key!r} is not an 8-byte delta")
        total += I64.unpack(value)[0]
        if not -(2**63) <= total < 2**63:
            raise errors.NumericOverflow(f"balance of {key!r} leaves the signed 64-bit range")
    return total
