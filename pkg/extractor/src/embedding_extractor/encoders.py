"""Model backends. An encoder maps a pre-tokenized word sequence to
per-layer hidden states plus the word <-> hidden-row alignment.

Layer indexing contract: row l of the returned hidden states is the output
of transformer block l+1; the embedding-layer output is dropped.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np


class SequenceTooLongError(Exception):
    """The tokenized sequence (including specials) exceeds the model maximum."""


@dataclass
class WordEncoding:
    hidden: np.ndarray  # (num_layers, seq_len, dim) float32
    word_rows: list[list[int]]  # hidden rows per input word, specials excluded
    special_rows: list[int]  # rows occupied by special tokens

    def __post_init__(self):
        claimed = [r for rows in self.word_rows for r in rows] + list(self.special_rows)
        if sorted(claimed) != list(range(self.hidden.shape[1])):
            raise ValueError("word_rows and special_rows must partition the sequence")


class Encoder(Protocol):
    num_layers: int
    dim: int

    def encode_words(self, words: Sequence[str]) -> WordEncoding:
        """Hidden states for one word sequence (one forward pass).

        A word that the tokenizer reduces to zero subwords gets an empty row
        list. Raises SequenceTooLongError when the input cannot fit.
        """
        ...


class TransformersEncoder:
    """Adapter for Hugging Face models (BERT-style encoders, GPT-2, ...).

    Needs the `hf` extra (transformers + torch), locally available weights,
    and a fast tokenizer (for subword-to-word alignment). Inference only:
    eval mode, no gradients.
    """

    def __init__(self, model_name: str, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as err:
            raise ImportError(
                "the transformers backend needs the `hf` extra: "
                "pip install 'embedding-extractor[hf]'"
            ) from err
        self._torch = torch
        try:
            # GPT-2-style byte BPE needs add_prefix_space for pre-split input
            self.tokenizer = AutoTokenizer.from_pretrained(
                model_name, use_fast=True, add_prefix_space=True
            )
        except (TypeError, ValueError):
            self.tokenizer = AutoTokenizer.from_pretrained(model_name, use_fast=True)
        if not getattr(self.tokenizer, "is_fast", False):
            raise ValueError(f"{model_name} has no fast tokenizer; alignment needs one")
        self.model = AutoModel.from_pretrained(model_name, output_hidden_states=True)
        self.model.eval()
        self.model.to(device)
        self.device = device
        self.num_layers = int(self.model.config.num_hidden_layers)
        self.dim = int(self.model.config.hidden_size)
        limit = getattr(self.tokenizer, "model_max_length", None)
        # tokenizers report a huge sentinel when there is no real limit
        self.max_length = int(limit) if limit and limit < 10**6 else None

    def encode_words(self, words: Sequence[str]) -> WordEncoding:
        enc = self.tokenizer(list(words), is_split_into_words=True, add_special_tokens=True)
        ids = enc["input_ids"]
        if self.max_length is not None and len(ids) > self.max_length:
            raise SequenceTooLongError(
                f"{len(ids)} tokens exceed the model maximum {self.max_length}"
            )
        word_ids = enc.word_ids()
        rows: list[list[int]] = [[] for _ in words]
        specials: list[int] = []
        for pos, w in enumerate(word_ids):
            if w is None:
                specials.append(pos)
            else:
                rows[w].append(pos)
        tensor = self._torch.tensor([ids], device=self.device)
        with self._torch.no_grad():
            out = self.model(tensor)
        # hidden_states[0] is the embedding layer; keep blocks 1..L as rows 0..L-1
        stacked = self._torch.stack(out.hidden_states[1:], dim=0)[:, 0, :, :]
        hidden = stacked.cpu().numpy().astype(np.float32)
        return WordEncoding(hidden=hidden, word_rows=rows, special_rows=specials)
