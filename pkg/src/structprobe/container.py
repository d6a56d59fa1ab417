"""The embedding container: per-layer, per-token vectors aligned to a treebank.

File layout (all integers little-endian):

    magic "SPB1" | version u32 | header length u32 | header JSON | payload | CRC32(payload)

The header JSON carries model_name, num_layers, dim, contextual and a
sentence index of {sent_id, token_count, offset} records; offsets are byte
positions relative to the start of the payload section. Each sentence's
block is float32 little-endian, layers-major then tokens then components,
i.e. a C-order (num_layers, token_count, dim) array.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .binfmt import (
    BadMagicError,
    BadVersionError,
    ChecksumError,
    Frame,
    FormatError,
    TruncatedPayloadError,
    write_frame,
)
from .treebank import Sentence

MAGIC = b"SPB1"
VERSION = 1

_RESERVED_KEYS = {"model_name", "num_layers", "dim", "contextual", "sentences"}


class NonFiniteError(FormatError):
    """The payload (or a set about to be written) contains NaN or Inf."""


class AlignmentError(ValueError):
    """Embeddings and treebank disagree on a sentence's token count."""


@dataclass
class SentenceEmbeddings:
    sent_id: str
    vectors: np.ndarray  # (num_layers, token_count, dim) float32

    @property
    def token_count(self) -> int:
        return self.vectors.shape[1]


@dataclass
class EmbeddingSet:
    model_name: str
    num_layers: int
    dim: int
    contextual: bool
    sentences: list[SentenceEmbeddings]
    extra: dict = field(default_factory=dict)  # extra header metadata, round-trips

    def validate(self) -> None:
        seen = set()
        for s in self.sentences:
            if s.sent_id in seen:
                raise ValueError(f"duplicate sent_id {s.sent_id!r} in embedding set")
            seen.add(s.sent_id)
            v = s.vectors
            if v.ndim != 3 or v.shape[0] != self.num_layers or v.shape[2] != self.dim:
                raise ValueError(
                    f"sentence {s.sent_id!r} has shape {v.shape}, expected "
                    f"({self.num_layers}, T, {self.dim})"
                )
            if v.dtype != np.float32:
                raise ValueError(f"sentence {s.sent_id!r} is {v.dtype}, expected float32")
            if not np.isfinite(v).all():
                raise NonFiniteError(f"sentence {s.sent_id!r} contains non-finite values")
        bad = _RESERVED_KEYS & set(self.extra)
        if bad:
            raise ValueError(f"extra header keys collide with reserved ones: {sorted(bad)}")


def write_container(eset: EmbeddingSet, path) -> None:
    """Write the set; identical input produces identical bytes."""
    eset.validate()
    index = []
    chunks = []
    offset = 0
    for s in eset.sentences:
        raw = np.ascontiguousarray(s.vectors, dtype="<f4").tobytes()
        index.append({"sent_id": s.sent_id, "token_count": s.token_count, "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    header = {
        "model_name": eset.model_name,
        "num_layers": eset.num_layers,
        "dim": eset.dim,
        "contextual": eset.contextual,
        "sentences": index,
        **eset.extra,
    }
    write_frame(path, MAGIC, VERSION, header, b"".join(chunks))


def read_container(path) -> EmbeddingSet:
    """Read and fully validate a container.

    Distinct failures raise distinct errors: BadMagicError, BadVersionError,
    TruncatedPayloadError, ChecksumError, NonFiniteError.
    """
    frame = Frame.read(path, MAGIC, VERSION)
    header = frame.header
    try:
        num_layers = int(header["num_layers"])
        dim = int(header["dim"])
        index = header["sentences"]
        model_name = str(header["model_name"])
        contextual = bool(header["contextual"])
    except (KeyError, TypeError, ValueError) as err:
        raise TruncatedPayloadError(f"header is missing required fields: {err}") from None

    expected = sum(num_layers * int(rec["token_count"]) * dim * 4 for rec in index)
    payload = frame.take_payload(expected)

    sentences = []
    for rec in index:
        t = int(rec["token_count"])
        start = int(rec["offset"])
        nbytes = num_layers * t * dim * 4
        if start < 0 or start + nbytes > len(payload):
            raise TruncatedPayloadError(
                f"sentence {rec['sent_id']!r} offset {start} is outside the payload"
            )
        vectors = np.frombuffer(payload, dtype="<f4", count=num_layers * t * dim, offset=start)
        vectors = vectors.reshape(num_layers, t, dim).copy()
        if not np.isfinite(vectors).all():
            raise NonFiniteError(f"sentence {rec['sent_id']!r} contains non-finite values")
        sentences.append(SentenceEmbeddings(sent_id=str(rec["sent_id"]), vectors=vectors))

    extra = {k: v for k, v in header.items() if k not in _RESERVED_KEYS}
    eset = EmbeddingSet(
        model_name=model_name,
        num_layers=num_layers,
        dim=dim,
        contextual=contextual,
        sentences=sentences,
        extra=extra,
    )
    eset.validate()
    return eset


@dataclass
class Alignment:
    """Sentences paired with their (num_layers, T, dim) vectors.

    Sentences absent from the embedding set are listed in `missing` rather
    than silently dropped.
    """

    pairs: list[tuple[Sentence, np.ndarray]]
    missing: list[str]

    def __iter__(self):
        return iter(self.pairs)


def align(eset: EmbeddingSet, sentences: Iterable[Sentence]) -> Alignment:
    """Match treebank sentences to embeddings by sent_id and token count."""
    by_id = {s.sent_id: s for s in eset.sentences}
    pairs = []
    missing = []
    for sent in sentences:
        emb = by_id.get(sent.sent_id)
        if emb is None:
            missing.append(sent.sent_id)
            continue
        if emb.token_count != len(sent):
            raise AlignmentError(
                f"sentence {sent.sent_id!r}: treebank has {len(sent)} tokens, "
                f"embeddings have {emb.token_count}"
            )
        pairs.append((sent, emb.vectors))
    return Alignment(pairs=pairs, missing=missing)
