"""CoNLL-U treebanks, gold dependency trees, and tree path distances.

Only the four columns the probes need are retained per token: index, form,
universal POS tag, and head. Multi-word-token range lines (id "3-4") and
empty nodes (id "3.1") are skipped, which is the CoNLL-U convention for
recovering the basic dependency structure.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

PUNCT = "PUNCT"

_INT_ID = re.compile(r"^\d+$")
_RANGE_ID = re.compile(r"^\d+-\d+$")
_EMPTY_ID = re.compile(r"^\d+\.\d+$")


class ConlluError(ValueError):
    """Malformed CoNLL-U input, pointing at the offending sentence and line."""

    def __init__(self, message, sent_id=None, line_no=None):
        where = []
        if sent_id is not None:
            where.append(f"sentence {sent_id!r}")
        if line_no is not None:
            where.append(f"line {line_no}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.sent_id = sent_id
        self.line_no = line_no


@dataclass(frozen=True)
class Token:
    index: int  # 1-based position within the sentence
    form: str
    upos: str
    head: int  # 0 = root, otherwise 1-based index of the head token
    deprel: str = "_"  # stored only, never interpreted


@dataclass
class Sentence:
    sent_id: str
    tokens: list[Token]

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]


@dataclass
class TreeDistances:
    """All-pairs path lengths (in edges) over the gold tree, 0-based array."""

    n: int
    d: np.ndarray  # (n, n) non-negative integers


def parse_conllu(text: str | Iterable[str]) -> list[Sentence]:
    """Parse a CoNLL-U character stream into validated sentences.

    Sentences are blank-line separated; token lines carry exactly 10
    tab-separated columns; '#' lines are comments. The returned sentences
    are guaranteed to be single-rooted trees.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = (line.rstrip("\n").rstrip("\r") for line in text)

    sentences: list[Sentence] = []
    pending: list[tuple[int, list[str]]] = []
    sent_id: str | None = None

    def flush():
        nonlocal sent_id
        if pending:
            ordinal = len(sentences) + 1
            sid = sent_id if sent_id is not None else f"s{ordinal}"
            sentences.append(_build_sentence(sid, pending))
            pending.clear()
        sent_id = None

    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
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
        ident = cols[0]
        if _RANGE_ID.match(ident) or _EMPTY_ID.match(ident):
            continue  # multi-word token range / empty node
        if len(cols) != 10:
            raise ConlluError(
                f"expected 10 tab-separated columns, got {len(cols)}",
                sent_id=sent_id, line_no=line_no,
            )
        pending.append((line_no, cols))
    flush()
    return sentences


def _build_sentence(sent_id: str, rows: list[tuple[int, list[str]]]) -> Sentence:
    tokens: list[Token] = []
    head_lines: list[int] = []
    for line_no, cols in rows:
        ident = cols[0]
        if not _INT_ID.match(ident):
            raise ConlluError(f"malformed token id {ident!r}", sent_id, line_no)
        index = int(ident)
        if index != len(tokens) + 1:
            raise ConlluError(
                f"token ids must be consecutive from 1, got {index}",
                sent_id, line_no,
            )
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"non-integer head {cols[6]!r}", sent_id, line_no) from None
        if head < 0:
            raise ConlluError(f"negative head {head}", sent_id, line_no)
        if head == index:
            raise ConlluError(f"token {index} is its own head", sent_id, line_no)
        tokens.append(Token(index=index, form=cols[1], upos=cols[3], head=head, deprel=cols[7]))
        head_lines.append(line_no)

    n = len(tokens)
    roots = [t.index for t in tokens if t.head == 0]
    for t, line_no in zip(tokens, head_lines):
        if t.head > n:
            raise ConlluError(f"head {t.head} exceeds sentence length {n}", sent_id, line_no)
    if not roots:
        raise ConlluError("no root token (head = 0)", sent_id, head_lines[0] if head_lines else None)
    if len(roots) > 1:
        raise ConlluError(f"multiple root tokens at {roots}", sent_id, head_lines[roots[1] - 1])

    # Every non-root token has exactly one head, so the structure is a tree
    # iff every token is reachable from the root.
    children: list[list[int]] = [[] for _ in range(n + 1)]
    for t in tokens:
        if t.head != 0:
            children[t.head].append(t.index)
    seen = {roots[0]}
    stack = [roots[0]]
    while stack:
        for child in children[stack.pop()]:
            if child not in seen:
                seen.add(child)
                stack.append(child)
    if len(seen) != n:
        orphan = min(set(range(1, n + 1)) - seen)
        raise ConlluError(
            f"head links are cyclic: token {orphan} is unreachable from the root",
            sent_id, head_lines[orphan - 1],
        )
    return Sentence(sent_id=sent_id, tokens=tokens)


def read_conllu(path) -> list[Sentence]:
    """Read and parse a CoNLL-U file (UTF-8, LF or CRLF)."""
    with open(path, encoding="utf-8-sig", newline="") as f:
        return parse_conllu(f)


def to_conllu(sentences: Iterable[Sentence]) -> str:
    """Serialize sentences back to CoNLL-U (the four retained columns)."""
    blocks = []
    for s in sentences:
        lines = [f"# sent_id = {s.sent_id}"]
        for t in s.tokens:
            lines.append(
                f"{t.index}\t{t.form}\t_\t{t.upos}\t_\t_\t{t.head}\t{t.deprel}\t_\t_"
            )
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n" if blocks else ""


def adjacency(sentence: Sentence) -> list[list[int]]:
    """Undirected 0-based adjacency lists of the gold tree."""
    adj: list[list[int]] = [[] for _ in range(len(sentence))]
    for t in sentence.tokens:
        if t.head != 0:
            adj[t.index - 1].append(t.head - 1)
            adj[t.head - 1].append(t.index - 1)
    return adj


def tree_distances(sentence: Sentence) -> TreeDistances:
    """Number of edges on the unique tree path between every token pair."""
    n = len(sentence)
    adj = adjacency(sentence)
    d = np.zeros((n, n), dtype=np.int64)
    for src in range(n):
        dist = d[src]
        seen = [False] * n
        seen[src] = True
        frontier = [src]
        depth = 0
        while frontier:
            depth += 1
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        dist[v] = depth
                        nxt.append(v)
            frontier = nxt
    return TreeDistances(n=n, d=d)


def gold_edges(sentence: Sentence, exclude_punct: bool = True) -> set[tuple[int, int]]:
    """Unordered gold edges as 1-based (min, max) pairs.

    With exclude_punct, edges incident to a PUNCT-tagged token are dropped.
    """
    edges = {
        (min(t.index, t.head), max(t.index, t.head))
        for t in sentence.tokens
        if t.head != 0
    }
    if exclude_punct:
        punct = {t.index for t in sentence.tokens if t.upos == PUNCT}
        edges = {e for e in edges if e[0] not in punct and e[1] not in punct}
    return edges
