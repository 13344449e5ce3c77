"""Moving an application from one chain to another.

Three modes, from strongest to weakest:

* full log: the source chain is frozen into an archive at its current tip,
  the archive joins the app's archive chain, and the new archive-chain head
  is committed by an anchor entry on the destination chain;
* existence only: the latest version of every key is re-recorded on the
  destination with its original position, next to an attestation of the
  program that did the copying; the source is abandoned;
* restart: the app starts empty on the destination.

A failed migration leaves ledger, archive chain and destination untouched.
"""

from __future__ import annotations

import enum
import inspect
import sys
from dataclasses import dataclass, replace

from . import errors
from ._wire import U8, U16, U32, U64, Reader, sha256
from .archive import ArchiveChain, snapshot, verify_archive_chain
from .chain import CHAIN_ID_SIZE, Bytes, Chain, confirm_block, submit_entry, verify_chain
from .ledger import (
    ANCHOR_NAME,
    COPIED_NAME,
    COPIER_NAME,
    AppLedger,
    ImportedVersion,
    Segment,
    StorageDesign,
    _check_clock,
    _ensure_live,
    _slots,
    app_keys,
)

COPIER_ID = "chainport.migration/1"


class MigrationMode(enum.Enum):
    FULL_LOG = "full-log"
    EXISTENCE_ONLY = "existence-only"
    RESTART_INITIAL = "restart"


@dataclass(frozen=True)
class CopierAttestation:
    program_identifier: str
    program_digest: bytes
    recorded_at: tuple[int, int]


@dataclass(frozen=True)
class MigrationReceipt:
    app_id: str
    mode: MigrationMode
    source_chain_id: bytes
    destination_chain_id: bytes
    expiration_height: int | None = None
    archive_digest: bytes | None = None
    copied_entries: int | None = None
    anchor_time: tuple[int, int] | None = None
    attestation_digest: bytes | None = None

    def render(self) -> str:
        """Stable ``key=value`` lines; absent fields are omitted."""
        fields = [
            ("app", self.app_id),
            ("mode", self.mode.value),
            ("source", self.source_chain_id.hex()),
            ("destination", self.destination_chain_id.hex()),
            ("expiration_height", self.expiration_height),
            ("archive_digest", self.archive_digest.hex() if self.archive_digest else None),
            ("copied_entries", self.copied_entries),
            ("anchor_time", "%d:%d" % self.anchor_time if self.anchor_time else None),
            ("attestation_digest", self.attestation_digest.hex() if self.attestation_digest else None),
        ]
        return "\n".join(f"{k}={v}" for k, v in fields if v is not None) + "\n"


def default_copier_program() -> bytes:
    """Source of this module: the program that performs existence-only copies."""
    return inspect.getsource(sys.modules[__name__]).encode("utf-8")


@dataclass(frozen=True)
class CopiedRecord:
    key: str
    version_index: int
    source_chain_id: bytes
    source_time: tuple[int, int]
    wall_clock: int
    holds_value: bool
    data: bytes

    def encode(self) -> bytes:
        raw = self.key.encode("utf-8")
        return b"".join(
            [
                U16.pack(len(raw)),
                raw,
                U32.pack(self.version_index),
                self.source_chain_id,
                U64.pack(self.source_time[0]),
                U32.pack(self.source_time[1]),
                U64.pack(self.wall_clock),
                U8.pack(0 if self.holds_value else 1),
                U32.pack(len(self.data)),
                self.data,
            ]
        )

    @classmethod
    def decode(cls, data: bytes) -> CopiedRecord:
        r = Reader(data)
        key = r.take(r.u16()).decode("utf-8")
        version = r.u32()
        chain_id = r.take(CHAIN_ID_SIZE)
        time = (r.u64(), r.u32())
        wall_clock = r.u64()
        kind = r.u8()
        if kind not in (0, 1):
            raise errors.MalformedStream(f"unknown copied-record kind {kind}")
        body = r.take(r.u32())
        r.expect_end()
        return cls(key, version, chain_id, time, wall_clock, kind == 0, body)

    def value_digest(self) -> bytes:
        return sha256(self.data) if self.holds_value else self.data


def encode_attestation(identifier: str, program: bytes) -> bytes:
    raw = identifier.encode("utf-8")
    return U16.pack(len(raw)) + raw + sha256(program) + U32.pack(len(program)) + program


def decode_attestation(data: bytes) -> tuple[str, bytes, bytes]:
    r = Reader(data)
    identifier = r.take(r.u16()).decode("utf-8")
    digest = r.digest()
    program = r.take(r.u32())
    r.expect_end()
    return identifier, digest, program


def _precheck(ledger: AppLedger, src: Chain, dst: Chain, wall_clock: int) -> None:
    _ensure_live(ledger)
    if ledger.chain is not src:
        raise errors.MigrationError(f"app {ledger.app_id!r} is not homed on chain {src.chain_id.hex()}")
    if dst is src or dst.chain_id == src.chain_id:
        raise errors.MigrationError("source and destination are the same chain")
    if src.height is None:
        raise errors.MigrationError("source chain has no confirmed blocks")
    violation = verify_chain(src)
    if violation is not None:
        raise errors.SourceIntegrityError(f"source chain fails verification at height {violation.height}")
    if ledger.archive_anchor is not None:
        bad = verify_archive_chain(ledger.archives, ledger.archive_anchor)
        if bad is not None:
            raise errors.SourceIntegrityError(f"archive chain fails at position {bad.position}: {bad.reason}")
    _check_clock(dst, wall_clock)


def _confirm_batch(dst: Chain, batch: list[tuple[str, bytes]], wall_clock: int) -> tuple[int, int]:
    """Submit and confirm ``batch``; returns (height, index of the first batch entry)."""
    first = len(dst.pending)
    for key, data in batch:
        submit_entry(dst, key, Bytes(data), wall_clock)
    try:
        block = confirm_block(dst, wall_clock)
    except errors.ChainportError:
        del dst.pending[first:]
        raise
    return block.height, first


def migrate_full_log(
    ledger: AppLedger, src: Chain, dst: Chain, wall_clock: int
) -> tuple[AppLedger, MigrationReceipt]:
    """Archive ``src`` at its tip, anchor the archive chain on ``dst`` and re-home the app."""
    _precheck(ledger, src, dst, wall_clock)
    archives = ledger.archives
    expiration = src.height
    archive = snapshot(src, expiration, archives.head_digest)
    height, index = _confirm_batch(dst, [(ledger.reserved_key(ANCHOR_NAME), archive.archive_digest)], wall_clock)
    archives.append(archive)

    moved = replace(
        ledger,
        chain=dst,
        archive_anchor=archive.archive_digest,
        segments=[*ledger.segments, Segment(len(archives) - 1, ledger.home_since)],
        home_since=height + 1,
        imported=dict(ledger.imported),
        migrated_to=None,
    )
    ledger.migrated_to = dst.chain_id
    receipt = MigrationReceipt(
        ledger.app_id,
        MigrationMode.FULL_LOG,
        src.chain_id,
        dst.chain_id,
        expiration_height=expiration,
        archive_digest=archive.archive_digest,
        anchor_time=(height, index),
    )
    return moved, receipt


def migrate_existence_only(
    ledger: AppLedger,
    src: Chain,
    dst: Chain,
    copier_program: bytes,
    wall_clock: int,
    program_identifier: str = COPIER_ID,
) -> tuple[AppLedger, MigrationReceipt]:
    """Copy the latest version of every key to ``dst`` and abandon ``src`` and its archives."""
    if not copier_program:
        raise errors.AttestationRequired("existence-only migration needs the copier program bytes")
    _precheck(ledger, src, dst, wall_clock)

    holds_value = ledger.config.storage_design is StorageDesign.IN_CHAIN
    records = []
    for key in app_keys(ledger):
        slots = _slots(ledger, key)
        if not slots:
            continue
        latest = slots[-1]
        version = latest.version_index
        if not ledger.config.keeps_log:
            # overwrite mode: the store's latest version supersedes the checkpoint ordinal
            version = ledger.store_binding.latest_version(ledger.chain_key(key))
        records.append(
            CopiedRecord(key, version, latest.chain_id, latest.logical_time, latest.wall_clock, holds_value, latest.stored)
        )

    copied_key = ledger.reserved_key(COPIED_NAME)
    batch = [(copied_key, rec.encode()) for rec in records]
    batch.append((ledger.reserved_key(COPIER_NAME), encode_attestation(program_identifier, copier_program)))
    height, first = _confirm_batch(dst, batch, wall_clock)
    attestation = CopierAttestation(program_identifier, sha256(copier_program), (height, first + len(records)))

    imported = {
        rec.key: ImportedVersion(
            rec.key, rec.version_index, rec.data, rec.holds_value, rec.source_chain_id,
            rec.source_time, rec.wall_clock, (height, first + i),
        )
        for i, rec in enumerate(records)
    }
    moved = replace(
        ledger,
        chain=dst,
        archive_anchor=None,
        archives=ArchiveChain(),
        segments=[],
        home_since=height + 1,
        imported=imported,
        attestation=attestation,
        import_chain=dst,
        migrated_to=None,
    )
    ledger.migrated_to = dst.chain_id
    receipt = MigrationReceipt(
        ledger.app_id,
        MigrationMode.EXISTENCE_ONLY,
        src.chain_id,
        dst.chain_id,
        expiration_height=src.height,
        copied_entries=len(records),
        anchor_time=attestation.recorded_at,
        attestation_digest=attestation.program_digest,
    )
    return moved, receipt


def migrate_restart_initial(ledger: AppLedger, dst: Chain) -> tuple[AppLedger, MigrationReceipt]:
    """Start the app over, empty, on ``dst``; nothing is carried."""
    _ensure_live(ledger)
    if ledger.store_binding is not None:
        ledger.store_binding.purge(ledger.namespace)
    moved = replace(
        ledger,
        chain=dst,
        archive_anchor=None,
        archives=ArchiveChain(),
        segments=[],
        home_since=len(dst.blocks),
        imported={},
        attestation=None,
        import_chain=None,
        migrated_to=None,
    )
    source = ledger.chain.chain_id
    ledger.migrated_to = dst.chain_id
    return moved, MigrationReceipt(ledger.app_id, MigrationMode.RESTART_INITIAL, source, dst.chain_id)


def load_imported(dst: Chain, namespace: str, height: int) -> tuple[dict[str, ImportedVersion], CopierAttestation]:
    """Rebuild an existence-only import from the copied entries confirmed at ``height`` on ``dst``."""
    copied_key, copier_key = namespace + COPIED_NAME, namespace + COPIER_NAME
    imported: dict[str, ImportedVersion] = {}
    attestation = None
    for e in dst.blocks[height].entries:
        if e.key == copied_key:
            rec = CopiedRecord.decode(e.payload.data)
            imported[rec.key] = ImportedVersion(
                rec.key, rec.version_index, rec.data, rec.holds_value, rec.source_chain_id,
                rec.source_time, rec.wall_clock, e.logical_time,
            )
        elif e.key == copier_key:
            identifier, digest, _ = decode_attestation(e.payload.data)
            attestation = CopierAttestation(identifier, digest, e.logical_time)
    if attestation is None:
        raise errors.MalformedStream(f"no copier attestation at height {height}")
    return imported, attestation
