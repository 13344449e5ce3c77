"""Static truncated chain snapshots and the hash chain that links them.

File layout (all integers big-endian)::

    "BCAR" | version u16 | chain_id 16B | expiration_height u64
    | prev_archive_digest 32B | block_count u64 | blocks... | archive_digest 32B

``archive_digest`` is SHA-256 of every byte before it. Blocks use the same
layout as the live chain, so block and entry digests carry over unchanged.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

from . import errors
from ._wire import DIGEST_SIZE, U16, U64, ZERO_DIGEST, Reader, sha256
from .chain import CHAIN_ID_SIZE, Block, Chain, LedgerEntry, check_blocks, decode_block, verify_chain

MAGIC = b"BCAR"
FORMAT_VERSION = 1
# expiration_height value used by chain files that hold no blocks yet
NO_BLOCKS = 2**64 - 1


def encode_archive_body(chain_id: bytes, expiration_height: int, prev_digest: bytes, blocks) -> bytes:
    parts = [MAGIC, U16.pack(FORMAT_VERSION), chain_id, U64.pack(expiration_height), prev_digest, U64.pack(len(blocks))]
    parts.extend(b.encode() for b in blocks)
    return b"".join(parts)


@dataclass(frozen=True)
class ChainArchive:
    chain_id: bytes
    expiration_height: int
    prev_archive_digest: bytes
    blocks: tuple[Block, ...]
    archive_digest: bytes

    def body(self) -> bytes:
        return encode_archive_body(self.chain_id, self.expiration_height, self.prev_archive_digest, self.blocks)

    def recompute_digest(self) -> bytes:
        return sha256(self.body())

    @functools.cached_property
    def _index(self) -> dict[str, list[LedgerEntry]]:
        index: dict[str, list[LedgerEntry]] = {}
        for block in self.blocks:
            for e in block.entries:
                index.setdefault(e.key, []).append(e)
        return index

    def entries_for(self, key: str, since_height: int = 0) -> list[LedgerEntry]:
        return [e for e in self._index.get(key, ()) if e.height >= since_height]

    def keys(self) -> list[str]:
        return sorted(self._index)

    def block_at(self, height: int) -> Block | None:
        if 0 <= height < len(self.blocks):
            return self.blocks[height]
        return None


@dataclass(frozen=True)
class ArchiveViolation:
    reason: str
    position: int | None = None
    height: int | None = None


@dataclass
class ArchiveChain:
    archives: list[ChainArchive] = field(default_factory=list)

    @property
    def head_digest(self) -> bytes:
        return self.archives[-1].archive_digest if self.archives else ZERO_DIGEST

    def append(self, archive: ChainArchive) -> None:
        if archive.prev_archive_digest != self.head_digest:
            raise errors.MigrationError("archive does not link to the current head")
        self.archives.append(archive)

    def __len__(self) -> int:
        return len(self.archives)


def snapshot(chain: Chain, expiration: int, prev_archive_digest: bytes = ZERO_DIGEST) -> ChainArchive:
    """Freeze blocks ``0..=expiration`` of ``chain``; pending entries are not included."""
    if chain.height is None or not 0 <= expiration <= chain.height:
        raise errors.ExpirationBeyondTip(f"expiration {expiration} beyond chain tip {chain.height}")
    if len(prev_archive_digest) != DIGEST_SIZE:
        raise errors.ChainportError("prev_archive_digest must be 32 bytes")
    violation = verify_chain(chain)
    if violation is not None:
        raise errors.SourceIntegrityError(f"source chain fails verification at height {violation.height}")
    blocks = tuple(chain.blocks[: expiration + 1])
    digest = sha256(encode_archive_body(chain.chain_id, expiration, prev_archive_digest, blocks))
    return ChainArchive(chain.chain_id, expiration, prev_archive_digest, blocks, digest)


def verify_archive(archive: ChainArchive, expected_prev: bytes) -> ArchiveViolation | None:
    if archive.recompute_digest() != archive.archive_digest:
        return ArchiveViolation("digest-mismatch")
    if archive.prev_archive_digest != expected_prev:
        return ArchiveViolation("prev-link-mismatch")
    bad = check_blocks(archive.blocks)
    if bad is not None:
        return ArchiveViolation("block-integrity", height=bad.height)
    if len(archive.blocks) != archive.expiration_height + 1:
        return ArchiveViolation("expiration")
    return None


def verify_archive_chain(chain: ArchiveChain, anchor: bytes) -> ArchiveViolation | None:
    """Check every archive against its predecessor's recomputed digest, then the head against ``anchor``."""
    expected_prev = ZERO_DIGEST
    for pos, archive in enumerate(chain.archives):
        v = verify_archive(archive, expected_prev)
        if v is not None:
            return ArchiveViolation(v.reason, pos, v.height)
        expected_prev = archive.recompute_digest()
    if expected_prev != anchor:
        return ArchiveViolation("anchor-mismatch", max(len(chain.archives) - 1, 0))
    return None


def archive_write(archive: ChainArchive) -> bytes:
    return archive.body() + archive.archive_digest


def _parse(data: bytes) -> ChainArchive:
    r = Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise errors.MalformedStream("bad magic")
    version = r.u16()
    if version != FORMAT_VERSION:
        raise errors.MalformedStream(f"unsupported archive version {version}")
    chain_id = r.take(CHAIN_ID_SIZE)
    expiration = r.u64()
    prev = r.digest()
    count = r.u64()
    # every block occupies at least 84 bytes
    if count * 84 > r.remaining():
        raise errors.MalformedStream(f"block count {count} overruns stream")
    blocks = tuple(decode_block(r) for _ in range(count))
    digest = r.digest()
    r.expect_end()
    return ChainArchive(chain_id, expiration, prev, blocks, digest)


def archive_read(data: bytes, verify: bool = True) -> ChainArchive:
    """Parse an archive stream. With ``verify`` the archive and block digests must check out."""
    archive = _parse(data)
    if verify:
        if sha256(bytes(data[:-DIGEST_SIZE])) != archive.archive_digest:
            raise errors.DigestMismatch("archive digest does not match contents")
        bad = check_blocks(archive.blocks)
        if bad is not None:
            raise errors.DigestMismatch(f"block {bad.height} fails verification ({bad.reason})")
    return archive


def chain_write(chain: Chain) -> bytes:
    """Serialize a live chain's confirmed blocks in archive layout (zero prev link)."""
    expiration = len(chain.blocks) - 1 if chain.blocks else NO_BLOCKS
    body = encode_archive_body(chain.chain_id, expiration, ZERO_DIGEST, chain.blocks)
    return body + sha256(body)


def chain_read(data: bytes, verify: bool = True) -> Chain:
    archive = archive_read(data, verify=verify)
    expected = len(archive.blocks) - 1 if archive.blocks else NO_BLOCKS
    if archive.expiration_height != expected:
        raise errors.MalformedStream("chain file height field does not match its blocks")
    if archive.prev_archive_digest != ZERO_DIGEST:
        raise errors.MalformedStream("chain file carries a nonzero prev link")
    return Chain(archive.chain_id, list(archive.blocks))
