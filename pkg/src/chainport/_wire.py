"""Big-endian binary primitives shared by the chain, archive and proof formats."""

from __future__ import annotations

import hashlib
import struct

from .errors import MalformedStream

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)

U8 = struct.Struct(">B")
U16 = struct.Struct(">H")
U32 = struct.Struct(">I")
U64 = struct.Struct(">Q")
I64 = struct.Struct(">q")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class Reader:
    """Bounds-checked cursor over a byte string."""

    def __init__(self, data: bytes, pos: int = 0) -> None:
        self.data = data
        self.pos = pos

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise MalformedStream(f"truncated stream: wanted {n} bytes at offset {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def _unpack(self, fmt: struct.Struct) -> int:
        return fmt.unpack(self.take(fmt.size))[0]

    def u8(self) -> int:
        return self._unpack(U8)

    def u16(self) -> int:
        return self._unpack(U16)

    def u32(self) -> int:
        return self._unpack(U32)

    def u64(self) -> int:
        return self._unpack(U64)

    def i64(self) -> int:
        return self._unpack(I64)

    def digest(self) -> bytes:
        return self.take(DIGEST_SIZE)

    def expect_end(self) -> None:
        if self.remaining():
            raise MalformedStream(f"{self.remaining()} trailing bytes")
