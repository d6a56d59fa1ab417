"""Writer (and verifying reader) for the probe embedding container.

This is an independent implementation of the published byte layout:

    magic "SPB1" | version u32 | header length u32 | header JSON (UTF-8)
                 | payload | CRC32(payload) as u32

little-endian throughout. The header JSON holds model_name, num_layers,
dim, contextual and a sentence index of {sent_id, token_count, offset}
records; offsets are relative to the payload start. Per sentence the
payload is a C-order (num_layers, token_count, dim) float32 block. The
header is serialized with sorted keys so equal content gives equal bytes.
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SPB1"
VERSION = 1


@dataclass
class SentenceBlock:
    sent_id: str
    vectors: np.ndarray  # (num_layers, token_count, dim) float32


@dataclass
class ContainerData:
    model_name: str
    num_layers: int
    dim: int
    contextual: bool
    sentences: list[SentenceBlock]
    extra: dict = field(default_factory=dict)


def write(data: ContainerData, path) -> None:
    index = []
    chunks = []
    offset = 0
    seen = set()
    for block in data.sentences:
        if block.sent_id in seen:
            raise ValueError(f"duplicate sent_id {block.sent_id!r}")
        seen.add(block.sent_id)
        v = np.ascontiguousarray(block.vectors, dtype="<f4")
        if v.shape[0] != data.num_layers or v.shape[2] != data.dim:
            raise ValueError(
                f"sentence {block.sent_id!r}: shape {v.shape} does not match "
                f"({data.num_layers}, T, {data.dim})"
            )
        if not np.isfinite(v).all():
            raise ValueError(f"sentence {block.sent_id!r} contains non-finite values")
        raw = v.tobytes()
        index.append({"sent_id": block.sent_id, "token_count": v.shape[1], "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "model_name": data.model_name,
        "num_layers": data.num_layers,
        "dim": data.dim,
        "contextual": data.contextual,
        "sentences": index,
        **data.extra,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(chunks)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def read(path) -> ContainerData:
    """Verifying reader used by tests and spot checks."""
    raw = open(path, "rb").read()
    if raw[:4] != MAGIC:
        raise ValueError("bad magic")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    payload = raw[12 + header_len : -4]
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise ValueError("checksum mismatch")
    num_layers, dim = int(header["num_layers"]), int(header["dim"])
    sentences = []
    for rec in header["sentences"]:
        t = int(rec["token_count"])
        start = int(rec["offset"])
        count = num_layers * t * dim
        vectors = np.frombuffer(payload, dtype="<f4", count=count, offset=start)
        sentences.append(SentenceBlock(rec["sent_id"], vectors.reshape(num_layers, t, dim).copy()))
    extra = {k: v for k, v in header.items()
             if k not in {"model_name", "num_layers", "dim", "contextual", "sentences"}}
    return ContainerData(
        model_name=header["model_name"],
        num_layers=num_layers,
        dim=dim,
        contextual=bool(header["contextual"]),
        sentences=sentences,
        extra=extra,
    )
