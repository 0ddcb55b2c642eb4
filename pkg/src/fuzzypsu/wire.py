"""Length-prefixed big-endian framing shared by every protocol message."""

from __future__ import annotations

import struct


class WireError(ValueError):
    """Raised when a message is truncated or malformed."""


def u8(x: int) -> bytes:
    return struct.pack(">B", x)


def u32(x: int) -> bytes:
    return struct.pack(">I", x)


def u64(x: int) -> bytes:
    return struct.pack(">Q", x)


def blob(data: bytes) -> bytes:
    return u32(len(data)) + data


def big(x: int) -> bytes:
    """Variable-width nonnegative integer as a length-prefixed blob."""
    if x < 0:
        raise WireError("negative integer on the wire")
    return blob(x.to_bytes(max(1, (x.bit_length() + 7) // 8), "big"))


def blob_list(items: list[bytes]) -> bytes:
    return u32(len(items)) + b"".join(blob(i) for i in items)


class Reader:
    def __init__(self, data: bytes):
        self._data = memoryview(data)
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise WireError("truncated message")
        out = bytes(self._data[self._pos:self._pos + n])
        self._pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def blob(self) -> bytes:
        return self._take(self.u32())

    def big(self) -> int:
        return int.from_bytes(self.blob(), "big")

    def blob_list(self) -> list[bytes]:
        return [self.blob() for _ in range(self.u32())]

    def done(self) -> None:
        if self._pos != len(self._data):
            raise WireError("trailing bytes in message")

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos
