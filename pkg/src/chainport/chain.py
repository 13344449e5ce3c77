"""Deterministic in-process blockchain.

Entries (a key, a payload and a wall-clock stamp) are submitted to a pending
pool and drained into digest-linked blocks by an explicit ``confirm_block``.
Wall clocks are recorded but never trusted; block height is the only time
axis used by proofs.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from . import errors
from ._wire import I64, U8, U16, U32, U64, ZERO_DIGEST, Reader, sha256

MAX_KEY_BYTES = 1024
MAX_BYTES_PAYLOAD = 2**32 - 1
CHAIN_ID_SIZE = 16

TAG_NUMBERS = 0
TAG_BYTES = 1

_I64_MIN, _I64_MAX = -(2**63), 2**63 - 1


@dataclass(frozen=True)
class NumberList:
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        for v in self.values:
            if not isinstance(v, int) or not _I64_MIN <= v <= _I64_MAX:
                raise errors.PayloadInvalid(f"number {v!r} is not a signed 64-bit integer")
        if len(self.values) > 2**32 - 1:
            raise errors.PayloadTooLarge("too many numbers")

    def encode(self) -> bytes:
        return b"".join([U8.pack(TAG_NUMBERS), U32.pack(len(self.values))] + [I64.pack(v) for v in self.values])


@dataclass(frozen=True)
class Bytes:
    data: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.data, (bytes, bytearray)):
            raise errors.PayloadInvalid("byte payload must be bytes")
        object.__setattr__(self, "data", bytes(self.data))
        if len(self.data) > MAX_BYTES_PAYLOAD:
            raise errors.PayloadTooLarge(f"byte payload of {len(self.data)} bytes")

    def encode(self) -> bytes:
        return U8.pack(TAG_BYTES) + U32.pack(len(self.data)) + self.data


Payload = Union[NumberList, Bytes]


def check_key(key: str) -> bytes:
    """Validate a record key and return its UTF-8 encoding."""
    if not isinstance(key, str) or not key:
        raise errors.KeyInvalid("record key must be a non-empty string")
    try:
        raw = key.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise errors.KeyInvalid(f"record key is not valid UTF-8: {exc}") from None
    if len(raw) > MAX_KEY_BYTES:
        raise errors.KeyTooLong(f"record key is {len(raw)} bytes (max {MAX_KEY_BYTES})")
    return raw


def _check_u64(name: str, value: int) -> None:
    if not isinstance(value, int) or not 0 <= value < 2**64:
        raise errors.ChainportError(f"{name} must be an unsigned 64-bit integer, got {value!r}")


def encode_entry(key: str, payload: Payload, wall_clock: int) -> bytes:
    raw = check_key(key)
    return U16.pack(len(raw)) + raw + payload.encode() + U64.pack(wall_clock)


@dataclass(frozen=True)
class LedgerEntry:
    key: str
    payload: Payload
    wall_clock: int
    logical_time: tuple[int, int]
    entry_digest: bytes

    @classmethod
    def create(cls, key: str, payload: Payload, wall_clock: int, logical_time: tuple[int, int]) -> LedgerEntry:
        return cls(key, payload, wall_clock, logical_time, sha256(encode_entry(key, payload, wall_clock)))

    @property
    def height(self) -> int:
        return self.logical_time[0]

    @property
    def index(self) -> int:
        return self.logical_time[1]

    def encode(self) -> bytes:
        return encode_entry(self.key, self.payload, self.wall_clock)

    def digest_ok(self) -> bool:
        return sha256(self.encode()) == self.entry_digest


def encode_block_body(height: int, prev_digest: bytes, wall_clock: int, entries: Sequence[LedgerEntry]) -> bytes:
    parts = [U64.pack(height), prev_digest, U64.pack(wall_clock), U32.pack(len(entries))]
    parts.extend(e.encode() for e in entries)
    return b"".join(parts)


@dataclass(frozen=True)
class Block:
    height: int
    prev_digest: bytes
    wall_clock: int
    entries: tuple[LedgerEntry, ...]
    block_digest: bytes

    @classmethod
    def create(cls, height: int, prev_digest: bytes, wall_clock: int, entries: Iterable[LedgerEntry]) -> Block:
        entries = tuple(entries)
        return cls(height, prev_digest, wall_clock, entries, sha256(encode_block_body(height, prev_digest, wall_clock, entries)))

    def body(self) -> bytes:
        return encode_block_body(self.height, self.prev_digest, self.wall_clock, self.entries)

    def encode(self) -> bytes:
        """Block layout followed by the stored block digest."""
        return self.body() + self.block_digest

    def recompute_digest(self) -> bytes:
        return sha256(self.body())


def decode_payload(r: Reader) -> Payload:
    tag = r.u8()
    if tag == TAG_NUMBERS:
        count = r.u32()
        if count * 8 > r.remaining():
            raise errors.MalformedStream(f"number list of {count} overruns stream")
        return NumberList(tuple(r.i64() for _ in range(count)))
    if tag == TAG_BYTES:
        return Bytes(r.take(r.u32()))
    raise errors.MalformedStream(f"unknown payload tag {tag}")


def decode_entry(r: Reader, logical_time: tuple[int, int]) -> LedgerEntry:
    start = r.pos
    raw_key = r.take(r.u16())
    try:
        key = raw_key.decode("utf-8")
    except UnicodeDecodeError:
        raise errors.MalformedStream("entry key is not valid UTF-8") from None
    if not key:
        raise errors.MalformedStream("empty entry key")
    payload = decode_payload(r)
    wall_clock = r.u64()
    return LedgerEntry(key, payload, wall_clock, logical_time, sha256(r.data[start : r.pos]))


def decode_block(r: Reader) -> Block:
    """Parse one block, keeping the stored digest as-is (verification is separate)."""
    height = r.u64()
    prev = r.digest()
    wall_clock = r.u64()
    count = r.u32()
    # the smallest possible entry is 16 bytes
    if count * 16 > r.remaining():
        raise errors.MalformedStream(f"entry count {count} overruns stream")
    entries = tuple(decode_entry(r, (height, i)) for i in range(count))
    return Block(height, prev, wall_clock, entries, r.digest())


@dataclass(frozen=True)
class PendingReceipt:
    position: int


@dataclass(frozen=True)
class IntegrityViolation:
    height: int
    reason: str = "digest-mismatch"


@dataclass
class Chain:
    chain_id: bytes
    blocks: list[Block] = field(default_factory=list)
    pending: list[tuple[str, Payload, int]] = field(default_factory=list)
    _index: dict[str, list[tuple[int, int]]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.chain_id) != CHAIN_ID_SIZE:
            raise errors.ChainportError(f"chain id must be {CHAIN_ID_SIZE} bytes")
        self.chain_id = bytes(self.chain_id)
        if self.blocks and not self._index:
            for block in self.blocks:
                self._index_block(block)

    def _index_block(self, block: Block) -> None:
        for e in block.entries:
            self._index.setdefault(e.key, []).append(e.logical_time)

    @property
    def height(self) -> int | None:
        """Latest confirmed height, or None before genesis."""
        return len(self.blocks) - 1 if self.blocks else None

    @property
    def head_digest(self) -> bytes:
        return self.blocks[-1].block_digest if self.blocks else ZERO_DIGEST

    def entry_at(self, logical_time: tuple[int, int]) -> LedgerEntry:
        height, index = logical_time
        return self.blocks[height].entries[index]

    def keys(self) -> list[str]:
        return sorted(self._index)


def submit_entry(chain: Chain, key: str, payload: Payload, wall_clock: int) -> PendingReceipt:
    check_key(key)
    if not isinstance(payload, (NumberList, Bytes)):
        raise errors.PayloadInvalid(f"unsupported payload {type(payload).__name__}")
    _check_u64("wall_clock", wall_clock)
    chain.pending.append((key, payload, wall_clock))
    return PendingReceipt(len(chain.pending) - 1)


def confirm_block(chain: Chain, wall_clock: int) -> Block:
    _check_u64("wall_clock", wall_clock)
    if chain.blocks and wall_clock < chain.blocks[-1].wall_clock:
        raise errors.NonMonotonicClock(
            f"wall clock {wall_clock} precedes previous block's {chain.blocks[-1].wall_clock}"
        )
    height = len(chain.blocks)
    entries = [LedgerEntry.create(k, p, w, (height, i)) for i, (k, p, w) in enumerate(chain.pending)]
    block = Block.create(height, chain.head_digest, wall_clock, entries)
    chain.blocks.append(block)
    chain.pending.clear()
    chain._index_block(block)
    return block


def get_entries(chain: Chain, key: str, since_height: int = 0) -> list[LedgerEntry]:
    """Confirmed entries for ``key`` in (height, index) order."""
    positions = chain._index.get(key, [])
    start = bisect.bisect_left(positions, (since_height, 0))
    return [chain.entry_at(lt) for lt in positions[start:]]


def check_blocks(blocks: Sequence[Block]) -> IntegrityViolation | None:
    """Return the lowest violating height of a block sequence, or None."""
    prev = ZERO_DIGEST
    for k, block in enumerate(blocks):
        if block.height != k:
            return IntegrityViolation(k, "height")
        if block.prev_digest != prev:
            return IntegrityViolation(k, "prev-link")
        if block.recompute_digest() != block.block_digest:
            return IntegrityViolation(k, "digest-mismatch")
        for i, e in enumerate(block.entries):
            if e.logical_time != (k, i) or not e.digest_ok():
                return IntegrityViolation(k, "entry")
        prev = block.block_digest
    return None


def verify_chain(chain: Chain) -> IntegrityViolation | None:
    """None when every digest and link of ``chain`` checks out."""
    return check_blocks(chain.blocks)
