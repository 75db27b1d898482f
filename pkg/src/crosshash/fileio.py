"""Low-level helpers shared by the binary artifact formats.

All formats follow the same convention: an 8-byte magic, a little-endian
header of unsigned 64-bit fields, a raw payload, and a trailing CRC32 of
the payload.
"""

import os
import struct
import tempfile
import zlib

from .errors import StoreFormatError

U64 = struct.Struct("<Q")
U32 = struct.Struct("<I")
F64 = struct.Struct("<d")


def write_atomic(path, data: bytes) -> None:
    """Write *data* to *path* via a temp file + rename so readers never
    observe a partial artifact."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise StoreFormatError(
            f"truncated file: expected {n} bytes for {what}, got {len(buf)}"
        )
    return buf


def check_magic(fh, magic: bytes, path) -> None:
    got = fh.read(len(magic))
    if got != magic:
        raise StoreFormatError(
            f"bad magic in {path!r}: expected {magic!r}, got {got!r}"
        )


def check_crc(payload: bytes, stored: int, path) -> None:
    actual = zlib.crc32(payload) & 0xFFFFFFFF
    if actual != stored:
        raise StoreFormatError(
            f"checksum mismatch in {path!r}: payload CRC32 {actual:#010x} "
            f"!= stored {stored:#010x}"
        )


def crc_of(payload: bytes) -> int:
    return zlib.crc32(payload) & 0xFFFFFFFF
