"""Turn treebank sentences into pooled per-token, per-layer embeddings.

Contextual mode runs one forward pass per sentence; a token's vector at
layer l is the mean of its subword hidden states at that layer. Non-
contextual mode forwards each distinct word in isolation (cached), so a
word's vectors are identical wherever it appears. Special tokens are
excluded from pooling unless explicitly requested.

Sentences the model cannot fit are skipped, never truncated: truncation
would silently corrupt token alignment. Skips are reported to the caller
and, via the CLI, to a sidecar log; the probe tools surface them as
missing sentences during alignment.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conllu import SentenceWords
from .container import ContainerData, SentenceBlock
from .encoders import Encoder, SequenceTooLongError, WordEncoding

LAYER_INDEXING_NOTE = "layer l = output of transformer block l+1"


class ExtractionError(Exception):
    """A token could not be embedded (for example, zero subwords)."""


@dataclass
class ExtractorConfig:
    model: str
    contextual: bool = True
    include_special_tokens_in_pooling: bool = False


@dataclass
class ExtractionResult:
    data: ContainerData
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (sent_id, reason)

    @property
    def written(self) -> int:
        return len(self.data.sentences)


def _checked_rows(seq: WordEncoding, words, sent_id: str) -> list[list[int]]:
    for word, rows in zip(words, seq.word_rows):
        if not rows:
            raise ExtractionError(
                f"sentence {sent_id!r}: token {word!r} produced zero subwords"
            )
    return seq.word_rows


def _pool_sentence(encoder: Encoder, words: list[str], sent_id: str,
                   include_special: bool) -> np.ndarray:
    seq = encoder.encode_words(words)
    word_rows = _checked_rows(seq, words, sent_id)
    extra = seq.special_rows if include_special else []
    out = np.empty((encoder.num_layers, len(words), encoder.dim), dtype=np.float32)
    for t, rows in enumerate(word_rows):
        out[:, t, :] = seq.hidden[:, rows + extra, :].mean(axis=1)
    return out


def _pool_single_word(encoder: Encoder, word: str, sent_id: str,
                      include_special: bool) -> np.ndarray:
    seq = encoder.encode_words([word])
    rows = _checked_rows(seq, [word], sent_id)[0]
    if include_special:
        rows = rows + seq.special_rows
    return seq.hidden[:, rows, :].mean(axis=1)


def extract(encoder: Encoder, sentences: list[SentenceWords],
            config: ExtractorConfig) -> ExtractionResult:
    blocks: list[SentenceBlock] = []
    skipped: list[tuple[str, str]] = []
    cache: dict[str, np.ndarray] = {}  # non-contextual: word -> (L, dim)
    for sent in sentences:
        try:
            if config.contextual:
                vectors = _pool_sentence(
                    encoder, sent.forms, sent.sent_id,
                    config.include_special_tokens_in_pooling,
                )
            else:
                columns = []
                for word in sent.forms:
                    if word not in cache:
                        cache[word] = _pool_single_word(
                            encoder, word, sent.sent_id,
                            config.include_special_tokens_in_pooling,
                        )
                    columns.append(cache[word])
                vectors = np.stack(columns, axis=1).astype(np.float32)
        except SequenceTooLongError as err:
            skipped.append((sent.sent_id, str(err)))
            continue
        blocks.append(SentenceBlock(sent_id=sent.sent_id, vectors=vectors))
    data = ContainerData(
        model_name=config.model,
        num_layers=encoder.num_layers,
        dim=encoder.dim,
        contextual=config.contextual,
        sentences=blocks,
        extra={
            "include_special_tokens_in_pooling": config.include_special_tokens_in_pooling,
            "layer_indexing": LAYER_INDEXING_NOTE,
        },
    )
    return ExtractionResult(data=data, skipped=skipped)
