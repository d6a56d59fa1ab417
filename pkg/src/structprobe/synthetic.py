"""Synthetic treebanks and embeddings with a known exact linear solution.

The construction: index the T-1 gold edges of each sentence, give token i an
indicator vector x_i over those edges marking the root-to-i path, and note
that ||x_i - x_j||^2 counts the edges where the two root paths differ, which
is exactly the tree distance between i and j. Word vectors are x_i padded
into `dim` dimensions and passed through a fixed random rotation, so a probe
must learn to undo the rotation but an exact solution (the planted
projection) always exists.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .container import EmbeddingSet, SentenceEmbeddings
from .treebank import Sentence, Token


def tree_from_pruefer(seq: list[int], n: int) -> list[tuple[int, int]]:
    """Decode a Pruefer sequence into the edge list of a tree on 0..n-1."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    if len(seq) != n - 2:
        raise ValueError(f"sequence length {len(seq)} != n - 2 = {n - 2}")
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u = heapq.heappop(leaves)
    w = heapq.heappop(leaves)
    edges.append((u, w))
    return edges


def random_heads(n: int, rng: np.random.Generator) -> list[int]:
    """Head array (1-based, 0 = root) of a uniform random tree on n tokens."""
    if n == 1:
        return [0]
    seq = [int(v) for v in rng.integers(0, n, size=max(0, n - 2))]
    edges = tree_from_pruefer(seq, n)
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    root = int(rng.integers(0, n))
    heads = [0] * n
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                heads[v] = u + 1
                stack.append(v)
    return heads


def sentence_from_heads(heads: list[int], sent_id: str) -> Sentence:
    tokens = [
        Token(index=i + 1, form=f"w{i + 1}", upos="NOUN", head=h)
        for i, h in enumerate(heads)
    ]
    return Sentence(sent_id=sent_id, tokens=tokens)


def _path_indicators(heads: list[int], width: int) -> np.ndarray:
    """Rows are per-token indicator vectors over edge slots 0..width-1.

    Edge slot e corresponds to the (e+2)-th token in a fixed renumbering of
    non-root tokens; slot e is set for token i iff that edge lies on the
    root-to-i path.
    """
    n = len(heads)
    edge_slot = {}  # child token (0-based) -> edge slot
    for i, h in enumerate(heads):
        if h != 0:
            edge_slot[i] = len(edge_slot)
    x = np.zeros((n, width))
    for i in range(n):
        node = i
        while heads[node] != 0:
            x[i, edge_slot[node]] = 1.0
            node = heads[node] - 1
    return x


@dataclass
class PlantedCorpus:
    sentences: list[Sentence]
    embeddings: EmbeddingSet
    projection: np.ndarray  # (signal_rank, dim) exact solution B*


def merge_embedding_sets(first: EmbeddingSet, *rest: EmbeddingSet) -> EmbeddingSet:
    """One container covering several splits (sent_ids must not collide)."""
    sentences = list(first.sentences)
    for other in rest:
        if (other.num_layers, other.dim) != (first.num_layers, first.dim):
            raise ValueError("cannot merge embedding sets with different shapes")
        sentences.extend(other.sentences)
    merged = EmbeddingSet(
        model_name=first.model_name,
        num_layers=first.num_layers,
        dim=first.dim,
        contextual=first.contextual,
        sentences=sentences,
        extra=dict(first.extra),
    )
    merged.validate()
    return merged


def planted_corpus(
    num_sentences: int,
    seed: int,
    min_len: int = 5,
    max_len: int = 10,
    dim: int = 16,
    signal_rank: int | None = None,
    num_layers: int = 1,
    planted_layer: int = 0,
    noise_scale: float = 1.0,
    model_name: str = "planted",
    id_prefix: str = "synth",
    rotation_seed: int | None = None,
) -> PlantedCorpus:
    """Corpus whose layer `planted_layer` admits an exact linear probe.

    Other layers (if any) are pure noise. With the returned projection P,
    ||P h_i - P h_j||^2 equals the gold tree distance for every pair.
    Splits that must share one exact solution (train/dev/test) should pass
    the same rotation_seed with different sentence seeds.
    """
    if signal_rank is None:
        signal_rank = max_len - 1
    if dim < signal_rank:
        raise ValueError(f"dim {dim} is smaller than signal rank {signal_rank}")
    if not 0 <= planted_layer < num_layers:
        raise ValueError("planted_layer out of range")
    rng = np.random.default_rng(seed)
    rot_rng = np.random.default_rng(seed if rotation_seed is None else rotation_seed)
    rotation, _ = np.linalg.qr(rot_rng.normal(size=(dim, dim)))

    sentences = []
    embedded = []
    for idx in range(num_sentences):
        n = int(rng.integers(min_len, max_len + 1))
        heads = random_heads(n, rng)
        sent = sentence_from_heads(heads, f"{id_prefix}-{idx:04d}")
        x = _path_indicators(heads, signal_rank)
        full = np.zeros((n, dim))
        full[:, :signal_rank] = x
        h = full @ rotation.T  # h_i = rotation @ full_i
        layers = np.empty((num_layers, n, dim), dtype=np.float32)
        for layer in range(num_layers):
            if layer == planted_layer:
                layers[layer] = h.astype(np.float32)
            else:
                layers[layer] = rng.normal(scale=noise_scale, size=(n, dim)).astype(np.float32)
        sentences.append(sent)
        embedded.append(SentenceEmbeddings(sent_id=sent.sent_id, vectors=layers))

    projection = rotation.T[:signal_rank, :]
    eset = EmbeddingSet(
        model_name=model_name,
        num_layers=num_layers,
        dim=dim,
        contextual=True,
        sentences=embedded,
        extra={"planted_layer": planted_layer, "signal_rank": signal_rank},
    )
    return PlantedCorpus(sentences=sentences, embeddings=eset, projection=projection)
