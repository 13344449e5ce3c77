"""Existence proofs that keep verifying after the data's chain is archived.

A proof is a locator plus digests: the entry, the header of the block that
holds it, the entry's position in that block and the archive link path from
the containing archive to the archive-chain head. Verification re-reads the
block from evidence (a live chain or the archive chain) and walks the links
up to a trust anchor.

Proof file layout, big-endian, magic ``BCPF``::

    "BCPF" | version u16
    | claim: key_len u16, key, payload_digest 32B, chain_id 16B,
             archive_index u64 (all ones = live), height u64, binding u8
    | entry layout | entry height u64 | entry index u32 | entry_digest 32B
    | header: height u64, prev_digest 32B, wall_clock u64, block_digest 32B
    | position u32 | path_len u32 | path_len x (archive_digest 32B, prev_digest 32B)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from . import errors
from ._wire import U8, U16, U32, U64, Reader, sha256
from .archive import ArchiveChain, verify_archive_chain
from .chain import CHAIN_ID_SIZE, Block, Bytes, Chain, LedgerEntry, decode_entry, verify_chain
from .ledger import ANCHOR_NAME, COPIED_NAME, COPIER_NAME, AppLedger, StorageDesign, _slots
from .migration import CopiedRecord, CopierAttestation, decode_attestation

MAGIC = b"BCPF"
FORMAT_VERSION = 1
LIVE = 2**64 - 1

BIND_VALUE = 0  # the entry payload is the value; payload_digest = SHA-256(payload)
BIND_DIGEST = 1  # the entry payload is the value's digest itself


@dataclass(frozen=True)
class ExistenceClaim:
    key: str
    payload_digest: bytes
    chain_id: bytes
    archive_index: int | None  # None: on a live chain when the proof was made
    height: int


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_digest: bytes
    wall_clock: int
    block_digest: bytes

    @classmethod
    def of(cls, block: Block) -> BlockHeader:
        return cls(block.height, block.prev_digest, block.wall_clock, block.block_digest)


@dataclass(frozen=True)
class ExistenceProof:
    claim: ExistenceClaim
    entry: LedgerEntry
    header: BlockHeader
    position: int
    binding: int
    path: tuple[tuple[bytes, bytes], ...] = ()


@dataclass(frozen=True)
class LiveHead:
    chain_id: bytes
    head_digest: bytes


@dataclass(frozen=True)
class DestinationAnchor:
    chain_id: bytes
    anchor_time: tuple[int, int]
    head_digest: bytes


TrustAnchor = Union[LiveHead, DestinationAnchor]


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str | None = None
    trust: str | None = None  # "digest-chain" or "attestation" when accepted

    def __bool__(self) -> bool:
        return self.accepted

    @property
    def label(self) -> str:
        if not self.accepted:
            return f"REJECT {self.reason}"
        return "ACCEPT" if self.trust == "digest-chain" else "ACCEPT-ATTESTED"


ACCEPT = Verdict(True, trust="digest-chain")
ACCEPT_WITH_ATTESTATION = Verdict(True, trust="attestation")


def reject(reason: str) -> Verdict:
    return Verdict(False, reason)


@dataclass
class Evidence:
    """What a verifier may read: an archive chain and any live chains, by id."""

    archives: ArchiveChain | None = None
    chains: dict[bytes, Chain] = field(default_factory=dict)

    @classmethod
    def of(cls, archives: ArchiveChain | None = None, chains: Iterable[Chain] = ()) -> Evidence:
        return cls(archives, {c.chain_id: c for c in chains})


def prove_existence(ledger: AppLedger, key: str, version_index: int) -> ExistenceProof:
    slot = next((s for s in _slots(ledger, key) if s.version_index == version_index), None)
    if slot is None:
        raise errors.NotFound(f"{key!r} has no version {version_index}")
    if slot.entry is None:
        raise errors.ProofUnavailable(
            f"version {version_index} of {key!r} was copied by an existence-only migration; "
            "use the copier attestation instead"
        )
    height, position = slot.entry.logical_time
    if slot.archive_index is None:
        block = ledger.chain.blocks[height]
        path: tuple[tuple[bytes, bytes], ...] = ()
    else:
        archives = ledger.archives.archives
        block = archives[slot.archive_index].blocks[height]
        path = tuple((a.archive_digest, a.prev_archive_digest) for a in archives[slot.archive_index :])
    if ledger.config.storage_design is StorageDesign.IN_CHAIN:
        binding, payload_digest = BIND_VALUE, sha256(slot.stored)
    else:
        binding, payload_digest = BIND_DIGEST, slot.stored
    claim = ExistenceClaim(slot.entry.key, payload_digest, slot.chain_id, slot.archive_index, height)
    return ExistenceProof(claim, slot.entry, BlockHeader.of(block), position, binding, path)


def current_anchor(ledger: AppLedger) -> TrustAnchor:
    """The anchor a verifier should trust for ``ledger`` right now."""
    if ledger.archive_anchor is None:
        return LiveHead(ledger.chain.chain_id, ledger.chain.head_digest)
    anchors = [
        e for e in ledger.chain.blocks[ledger.home_since - 1].entries if e.key == ledger.reserved_key(ANCHOR_NAME)
    ]
    return DestinationAnchor(ledger.chain.chain_id, anchors[-1].logical_time, ledger.archive_anchor)


def evidence_for(ledger: AppLedger) -> Evidence:
    return Evidence.of(ledger.archives, [ledger.chain])


def _binding_ok(proof: ExistenceProof) -> bool:
    payload = proof.entry.payload
    if not isinstance(payload, Bytes):
        return False
    if proof.binding == BIND_VALUE:
        return sha256(payload.data) == proof.claim.payload_digest
    if proof.binding == BIND_DIGEST:
        return payload.data == proof.claim.payload_digest
    return False


def _read_anchor_entry(dst: Chain, time: tuple[int, int]) -> LedgerEntry | None:
    height, index = time
    if not (0 <= height < len(dst.blocks) and 0 <= index < len(dst.blocks[height].entries)):
        return None
    return dst.blocks[height].entries[index]


def verify_existence(proof: ExistenceProof, anchor: TrustAnchor, evidence: Evidence) -> Verdict:
    claim, entry, header = proof.claim, proof.entry, proof.header

    if not entry.digest_ok() or claim.key != entry.key or not _binding_ok(proof):
        return reject("entry-digest")
    if claim.height != header.height or entry.logical_time != (header.height, proof.position):
        return reject("position")

    chain = evidence.chains.get(anchor.chain_id)
    if chain is None:
        return reject("no-evidence")
    if verify_chain(chain) is not None:
        return reject("chain-integrity")

    if isinstance(anchor, LiveHead):
        if chain.head_digest != anchor.head_digest:
            return reject("anchor-mismatch")
        if claim.chain_id != chain.chain_id or claim.archive_index is not None or proof.path:
            return reject("position")
        block = chain.blocks[header.height] if header.height < len(chain.blocks) else None
    else:
        anchor_entry = _read_anchor_entry(chain, anchor.anchor_time)
        if (
            anchor_entry is None
            or not anchor_entry.key.endswith(ANCHOR_NAME)
            or not claim.key.startswith(anchor_entry.key[: -len(ANCHOR_NAME)])
            or anchor_entry.payload != Bytes(anchor.head_digest)
        ):
            return reject("anchor-mismatch")
        archives = evidence.archives
        if archives is None:
            return reject("no-evidence")
        if verify_archive_chain(archives, anchor.head_digest) is not None:
            return reject("archive-chain")
        block = None
        position = claim.archive_index
        if position is None and claim.chain_id == chain.chain_id:
            live = chain.blocks[header.height] if header.height < len(chain.blocks) else None
            if live is not None and live.block_digest == header.block_digest:
                if proof.path:
                    return reject("path-mismatch")
                block = live
        if block is None:
            if position is None:
                position = next(
                    (
                        i
                        for i in reversed(range(len(archives)))
                        if archives.archives[i].chain_id == claim.chain_id
                        and (b := archives.archives[i].block_at(header.height)) is not None
                        and b.block_digest == header.block_digest
                    ),
                    None,
                )
            if position is None or position >= len(archives) or archives.archives[position].chain_id != claim.chain_id:
                return reject("no-evidence")
            expected = [(a.archive_digest, a.prev_archive_digest) for a in archives.archives[position:]]
            if list(proof.path) != expected[: len(proof.path)]:
                return reject("path-mismatch")
            block = archives.archives[position].block_at(header.height)

    if block is None or BlockHeader.of(block) != header:
        return reject("block-mismatch")
    if proof.position >= len(block.entries):
        return reject("entry-not-in-block")
    held = block.entries[proof.position]
    if held.encode() != entry.encode() or held.entry_digest != entry.entry_digest:
        return reject("entry-not-in-block")
    return ACCEPT


def verify_existence_copied(
    claim: ExistenceClaim, dst: Chain, attestation: CopierAttestation, program: bytes | None = None
) -> Verdict:
    """Accept a claim backed only by copied metadata and the copier's attestation.

    An acceptance here is tagged ``attestation``: the copied entries are not
    linked to the original log, so this is weaker than a digest-chain proof.
    """
    if verify_chain(dst) is not None:
        return reject("chain-integrity")
    entry = _read_anchor_entry(dst, attestation.recorded_at)
    if entry is None or not entry.key.endswith(COPIER_NAME) or not isinstance(entry.payload, Bytes):
        return reject("attestation")
    try:
        identifier, digest, stored_program = decode_attestation(entry.payload.data)
    except (errors.MalformedStream, UnicodeDecodeError):
        return reject("attestation")
    if (
        identifier != attestation.program_identifier
        or digest != attestation.program_digest
        or sha256(stored_program) != digest
        or (program is not None and sha256(program) != digest)
    ):
        return reject("attestation")

    namespace = entry.key[: -len(COPIER_NAME)]
    if not claim.key.startswith(namespace):
        return reject("no-evidence")
    for copied in dst.blocks[attestation.recorded_at[0]].entries:
        if copied.key != namespace + COPIED_NAME:
            continue
        try:
            rec = CopiedRecord.decode(copied.payload.data)
        except (errors.MalformedStream, UnicodeDecodeError, AttributeError):
            continue
        if (
            namespace + rec.key == claim.key
            and rec.value_digest() == claim.payload_digest
            and rec.source_chain_id == claim.chain_id
            and rec.source_time[0] == claim.height
        ):
            return ACCEPT_WITH_ATTESTATION
    return reject("no-evidence")


def _encode_claim(claim: ExistenceClaim, binding: int) -> bytes:
    raw = claim.key.encode("utf-8")
    index = LIVE if claim.archive_index is None else claim.archive_index
    return b"".join(
        [U16.pack(len(raw)), raw, claim.payload_digest, claim.chain_id, U64.pack(index), U64.pack(claim.height), U8.pack(binding)]
    )


def proof_write(proof: ExistenceProof) -> bytes:
    e, h = proof.entry, proof.header
    parts = [
        MAGIC,
        U16.pack(FORMAT_VERSION),
        _encode_claim(proof.claim, proof.binding),
        e.encode(),
        U64.pack(e.logical_time[0]),
        U32.pack(e.logical_time[1]),
        e.entry_digest,
        U64.pack(h.height),
        h.prev_digest,
        U64.pack(h.wall_clock),
        h.block_digest,
        U32.pack(proof.position),
        U32.pack(len(proof.path)),
    ]
    for digest, prev in proof.path:
        parts += [digest, prev]
    return b"".join(parts)


def proof_read(data: bytes) -> ExistenceProof:
    r = Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise errors.MalformedStream("bad proof magic")
    if r.u16() != FORMAT_VERSION:
        raise errors.MalformedStream("unsupported proof version")
    try:
        key = r.take(r.u16()).decode("utf-8")
    except UnicodeDecodeError:
        raise errors.MalformedStream("claim key is not valid UTF-8") from None
    payload_digest = r.digest()
    chain_id = r.take(CHAIN_ID_SIZE)
    index = r.u64()
    height = r.u64()
    binding = r.u8()
    claim = ExistenceClaim(key, payload_digest, chain_id, None if index == LIVE else index, height)
    parsed = decode_entry(r, (0, 0))
    entry = LedgerEntry(parsed.key, parsed.payload, parsed.wall_clock, (r.u64(), r.u32()), r.digest())
    header = BlockHeader(r.u64(), r.digest(), r.u64(), r.digest())
    position = r.u32()
    count = r.u32()
    if count * 64 != r.remaining():
        raise errors.MalformedStream("archive path length does not match stream")
    path = tuple((r.digest(), r.digest()) for _ in range(count))
    return ExistenceProof(claim, entry, header, position, binding, path)
