"""Shared binary framing for the embedding container and probe checkpoints.

Layout: magic (4 bytes) | format version u32 | header length u32 |
header JSON (UTF-8) | payload | CRC32 of payload (u32). All integers are
little-endian. Writers emit the header JSON with sorted keys so identical
logical content produces identical bytes.
"""
from __future__ import annotations

import json
import struct
import zlib


class FormatError(ValueError):
    """Base class for binary-format violations."""


class BadMagicError(FormatError):
    pass


class BadVersionError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


def encode_frame(magic: bytes, version: int, header: dict, payload: bytes) -> bytes:
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"".join([
        magic,
        struct.pack("<II", version, len(header_bytes)),
        header_bytes,
        payload,
        struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF),
    ])


def write_frame(path, magic: bytes, version: int, header: dict, payload: bytes) -> None:
    with open(path, "wb") as f:
        f.write(encode_frame(magic, version, header, payload))


class Frame:
    """Two-phase reader: parse the preamble, then claim the payload.

    The split lets callers compute the expected payload size from the header
    before the checksum is verified, so truncation and corruption surface as
    distinct errors.
    """

    def __init__(self, header: dict, version: int, body: bytes):
        self.header = header
        self.version = version
        self._body = body  # payload followed by the trailing CRC32

    @classmethod
    def parse(cls, data: bytes, magic: bytes, version: int) -> "Frame":
        if len(data) < len(magic) + 8 or data[: len(magic)] != magic:
            raise BadMagicError(f"not a {magic.decode('ascii', 'replace')} file")
        got_version, header_len = struct.unpack_from("<II", data, len(magic))
        if got_version != version:
            raise BadVersionError(f"unsupported format version {got_version} (expected {version})")
        header_start = len(magic) + 8
        header_end = header_start + header_len
        if header_end + 4 > len(data):
            raise TruncatedPayloadError("file ends inside the header")
        try:
            header = json.loads(data[header_start:header_end].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise TruncatedPayloadError(f"header JSON is unreadable: {err}") from None
        return cls(header=header, version=got_version, body=data[header_end:])

    @classmethod
    def read(cls, path, magic: bytes, version: int) -> "Frame":
        with open(path, "rb") as f:
            return cls.parse(f.read(), magic, version)

    def take_payload(self, expected_len: int) -> bytes:
        if len(self._body) != expected_len + 4:
            raise TruncatedPayloadError(
                f"payload holds {len(self._body) - 4} bytes, header promises {expected_len}"
            )
        payload = self._body[:expected_len]
        (stored,) = struct.unpack_from("<I", self._body, expected_len)
        actual = zlib.crc32(payload) & 0xFFFFFFFF
        if stored != actual:
            raise ChecksumError(f"payload CRC32 {actual:#010x} does not match stored {stored:#010x}")
        return payload
