"""Tree prediction and scoring: MST extraction, UUAS, edge strengths, sweeps."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .container import EmbeddingSet, align
from .probes import DistanceMatrix, ProbeParams, distance_matrix
from .training import TrainConfig, train
from .treebank import Sentence, gold_edges, tree_distances

DEFAULT_RANKS = (1, 2, 4, 8, 16, 32, 64, 128, 256)


@dataclass
class PredictedTree:
    """A spanning tree over one sentence's tokens (edges are 1-based pairs)."""

    edges: list[tuple[int, int]]
    weights: list[float]  # squared predicted distance per edge
    strengths: list[float] | None = None  # d_B / d_T per edge, once gold is known


@dataclass
class EdgeRecord:
    i: int
    j: int
    weight: float
    strength: float
    correct: bool


@dataclass
class SentenceEval:
    sent_id: str
    forms: list[str]
    gold: list[tuple[int, int]]
    predicted: list[EdgeRecord]


@dataclass
class EvalReport:
    uuas: float
    exclude_punct: bool
    kernel: str
    layer: int
    rank: int
    rbf_mode: str
    sentences: list[SentenceEval] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "EvalReport":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        sentences = [
            SentenceEval(
                sent_id=s["sent_id"],
                forms=list(s["forms"]),
                gold=[tuple(e) for e in s["gold"]],
                predicted=[EdgeRecord(**e) for e in s["predicted"]],
            )
            for s in raw.pop("sentences", [])
        ]
        return cls(sentences=sentences, **raw)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[ry] = rx
        return True


def extract_mst(dm: DistanceMatrix | np.ndarray) -> PredictedTree:
    """Minimum spanning tree of the complete graph weighted by dm.

    Kruskal over edges sorted by (weight, i, j): ties break toward the
    lexicographically smaller pair, so output is deterministic.
    """
    values = dm.values if isinstance(dm, DistanceMatrix) else np.asarray(dm)
    t = values.shape[0]
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {values.shape}")
    if t < 2:
        raise ValueError("need at least 2 tokens to span a tree")
    if not np.isfinite(values).all():
        raise ValueError("distance matrix contains non-finite weights")

    candidates = sorted(
        (float(values[i, j]), i, j) for i in range(t) for j in range(i + 1, t)
    )
    uf = _UnionFind(t)
    edges = []
    weights = []
    for w, i, j in candidates:
        if uf.union(i, j):
            edges.append((i + 1, j + 1))
            weights.append(w)
            if len(edges) == t - 1:
                break
    order = sorted(range(len(edges)), key=lambda k: edges[k])
    return PredictedTree(edges=[edges[k] for k in order], weights=[weights[k] for k in order])


def strength(d_b_val: float, d_t_val: int) -> float:
    """Connectivity strength of a pair: predicted distance over tree distance."""
    if d_t_val < 1:
        raise ValueError("tree distance must be >= 1 for distinct tokens")
    return d_b_val / d_t_val


def uuas(predicted: list[PredictedTree], gold: list[Sentence], exclude_punct: bool = True) -> float:
    """Percent of gold edges recovered, micro-averaged over the corpus.

    Both edge sets are filtered for punctuation-incident edges first. A
    corpus with zero gold edges has no defined score and raises.
    """
    if len(predicted) != len(gold):
        raise ValueError(f"{len(predicted)} predicted trees vs {len(gold)} gold sentences")
    correct = 0
    total = 0
    for tree, sent in zip(predicted, gold):
        gold_e = gold_edges(sent, exclude_punct=exclude_punct)
        pred_e = set(tree.edges)
        if exclude_punct:
            punct = {t.index for t in sent.tokens if t.upos == "PUNCT"}
            pred_e = {e for e in pred_e if e[0] not in punct and e[1] not in punct}
        correct += len(gold_e & pred_e)
        total += len(gold_e)
    if total == 0:
        raise ValueError("UUAS is undefined: corpus has no gold edges")
    return 100.0 * correct / total


def predict_trees(
    params: ProbeParams, sentences: list[Sentence], eset: EmbeddingSet, layer: int
) -> tuple[list[Sentence], list[PredictedTree]]:
    """MSTs with strengths for every aligned sentence of length >= 2."""
    aligned = align(eset, sentences)
    kept = []
    trees = []
    for sent, vectors in aligned.pairs:
        if len(sent) < 2:
            continue
        dm = distance_matrix(params, vectors[layer].astype(np.float64))
        tree = extract_mst(dm)
        gold_d = tree_distances(sent).d
        tree.strengths = [
            strength(math.sqrt(w), int(gold_d[i - 1, j - 1]))
            for (i, j), w in zip(tree.edges, tree.weights)
        ]
        kept.append(sent)
        trees.append(tree)
    return kept, trees


def evaluate(
    params: ProbeParams,
    sentences: list[Sentence],
    eset: EmbeddingSet,
    layer: int,
    exclude_punct: bool = True,
) -> EvalReport:
    """Score a probe on a treebank split and keep per-sentence evidence."""
    kept, trees = predict_trees(params, sentences, eset, layer)
    records = []
    for sent, tree in zip(kept, trees):
        gold_all = sorted(gold_edges(sent, exclude_punct=False))
        gold_set = set(gold_all)
        predicted = [
            EdgeRecord(i=i, j=j, weight=w, strength=s, correct=(i, j) in gold_set)
            for (i, j), w, s in zip(tree.edges, tree.weights, tree.strengths)
        ]
        records.append(
            SentenceEval(sent_id=sent.sent_id, forms=sent.forms, gold=gold_all, predicted=predicted)
        )
    score = uuas(trees, kept, exclude_punct=exclude_punct)
    return EvalReport(
        uuas=score,
        exclude_punct=exclude_punct,
        kernel=params.kernel,
        layer=layer,
        rank=params.rank,
        rbf_mode=params.rbf_mode,
        sentences=records,
    )


@dataclass
class TreebankSplits:
    train: list[Sentence]
    dev: list[Sentence]
    test: list[Sentence]


@dataclass
class SweepRow:
    key: int
    uuas_dev: float
    uuas_test: float


def _run_sweep_entry(config, splits, embeddings, exclude_punct, run_dir):
    params, _ = train(config, splits.train, splits.dev, embeddings, embeddings, run_dir=run_dir)
    dev_kept, dev_trees = predict_trees(params, splits.dev, embeddings, config.layer)
    test_kept, test_trees = predict_trees(params, splits.test, embeddings, config.layer)
    return (
        uuas(dev_trees, dev_kept, exclude_punct=exclude_punct),
        uuas(test_trees, test_kept, exclude_punct=exclude_punct),
    )


def _sweep(configs, keys, splits, embeddings, exclude_punct, out_dir, key_name, threads):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_dirs = [out_dir / f"{key_name}_{key}" for key in keys]
    jobs = list(zip(configs, run_dirs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    lambda job: _run_sweep_entry(job[0], splits, embeddings, exclude_punct, job[1]),
                    jobs,
                )
            )
    else:
        results = [
            _run_sweep_entry(cfg, splits, embeddings, exclude_punct, rd) for cfg, rd in jobs
        ]
    rows = [SweepRow(key=k, uuas_dev=dev, uuas_test=test) for k, (dev, test) in zip(keys, results)]
    _write_sweep_outputs(rows, out_dir, key_name)
    return rows


def _write_sweep_outputs(rows: list[SweepRow], out_dir: Path, key_name: str) -> None:
    from .rendering import render_line_chart

    with open(out_dir / "sweep.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["sweep_key", "uuas_dev", "uuas_test"])
        for row in rows:
            writer.writerow([row.key, f"{row.uuas_dev:.6g}", f"{row.uuas_test:.6g}"])
    series = {
        "dev": [(float(r.key), r.uuas_dev) for r in rows],
        "test": [(float(r.key), r.uuas_test) for r in rows],
    }
    svg = render_line_chart(series, title=f"UUAS by {key_name}", x_label=key_name, y_label="UUAS")
    (out_dir / "sweep.svg").write_text(svg, encoding="utf-8")


def layer_sweep(
    config: TrainConfig,
    splits: TreebankSplits,
    embeddings: EmbeddingSet,
    out_dir,
    exclude_punct: bool = True,
    threads: int = 1,
) -> list[SweepRow]:
    """Train one probe per embedding layer and tabulate dev/test UUAS."""
    layers = list(range(embeddings.num_layers))
    configs = [replace(config, layer=layer) for layer in layers]
    return _sweep(configs, layers, splits, embeddings, exclude_punct, out_dir, "layer", threads)


def rank_sweep(
    config: TrainConfig,
    ranks: list[int],
    splits: TreebankSplits,
    embeddings: EmbeddingSet,
    out_dir,
    exclude_punct: bool = True,
    threads: int = 1,
) -> list[SweepRow]:
    """Train one probe per projection rank and tabulate dev/test UUAS."""
    if not ranks:
        raise ValueError("ranks must be non-empty")
    if any(int(r) != r or r < 1 for r in ranks):
        raise ValueError("every rank must be a positive integer")
    if len(set(ranks)) != len(ranks):
        raise ValueError("duplicate ranks in input")
    ranks = [int(r) for r in ranks]
    configs = [replace(config, rank=rank) for rank in ranks]
    return _sweep(configs, ranks, splits, embeddings, exclude_punct, out_dir, "rank", threads)
