"""Just enough CoNLL-U reading to know each sentence's id and word forms.

Multi-word-token range lines ("4-5") and empty nodes ("4.1") are skipped so
the word sequence matches the dependency-level tokens the probe tools use.
Tree validation is the consumer's job; extraction only needs the words.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

_SKIP_ID = re.compile(r"^\d+-\d+$|^\d+\.\d+$")


@dataclass
class SentenceWords:
    sent_id: str
    forms: list[str]


def read_sentences(path) -> list[SentenceWords]:
    sentences: list[SentenceWords] = []
    forms: list[str] = []
    sent_id = None

    def flush():
        nonlocal sent_id, forms
        if forms:
            sid = sent_id if sent_id is not None else f"s{len(sentences) + 1}"
            sentences.append(SentenceWords(sent_id=sid, forms=forms))
        forms = []
        sent_id = None

    with open(path, encoding="utf-8-sig", newline="") as f:
        for raw in f:
            line = raw.rstrip("\r\n")
            if line == "":
                flush()
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("sent_id"):
                    _, _, value = body.partition("=")
                    if value.strip():
                        sent_id = value.strip()
                continue
            cols = line.split("\t")
            if _SKIP_ID.match(cols[0]):
                continue
            if len(cols) < 2:
                raise ValueError(f"{path}: not a CoNLL-U token line: {line!r}")
            forms.append(cols[1])
    flush()
    return sentences
