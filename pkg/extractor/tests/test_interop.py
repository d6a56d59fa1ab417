"""The extractor's output must be consumable by the probe toolkit unchanged."""
import sys
from pathlib import Path

import numpy as np
import pytest

from embedding_extractor.cli import run_extraction
from embedding_extractor.extract import ExtractorConfig

PRIMARY_SRC = Path(__file__).resolve().parents[2] / "src"
if str(PRIMARY_SRC) not in sys.path:
    sys.path.insert(0, str(PRIMARY_SRC))

structprobe = pytest.importorskip("structprobe")

from structprobe.container import EmbeddingSet, SentenceEmbeddings, align, read_container, write_container  # noqa: E402
from structprobe.treebank import read_conllu  # noqa: E402

from conftest import StubEncoder  # noqa: E402


def test_probe_toolkit_reads_extractor_output(conllu_path, tmp_path, encoder):
    out = tmp_path / "emb.spb"
    run_extraction(encoder, ExtractorConfig(model="stub"), [conllu_path], out)

    eset = read_container(out)
    assert eset.model_name == "stub"
    assert eset.num_layers == encoder.num_layers
    assert eset.dim == encoder.dim
    assert eset.extra["include_special_tokens_in_pooling"] is False

    sentences = read_conllu(conllu_path)
    result = align(eset, sentences)
    assert result.missing == []
    for sent, vectors in result.pairs:
        assert vectors.shape == (encoder.num_layers, len(sent), encoder.dim)


def test_skipped_sentences_surface_as_missing_alignments(conllu_path, tmp_path):
    out = tmp_path / "emb.spb"
    run_extraction(StubEncoder(max_length=4), ExtractorConfig(model="stub"),
                   [conllu_path], out)
    eset = read_container(out)
    sentences = read_conllu(conllu_path)
    result = align(eset, sentences)
    assert result.missing  # the overlong sentences are reported, not dropped silently


def test_writers_agree_byte_for_byte(tmp_path):
    """Same logical content through either writer gives identical files."""
    rng = np.random.default_rng(0)
    vectors = [rng.normal(size=(2, t, 3)).astype(np.float32) for t in (2, 4)]

    from embedding_extractor.container import ContainerData, SentenceBlock, write

    theirs = tmp_path / "extractor.spb"
    write(
        ContainerData(
            model_name="m", num_layers=2, dim=3, contextual=True,
            sentences=[SentenceBlock("a", vectors[0]), SentenceBlock("b", vectors[1])],
            extra={"note": 1},
        ),
        theirs,
    )
    ours = tmp_path / "probe.spb"
    write_container(
        EmbeddingSet(
            model_name="m", num_layers=2, dim=3, contextual=True,
            sentences=[SentenceEmbeddings("a", vectors[0]), SentenceEmbeddings("b", vectors[1])],
            extra={"note": 1},
        ),
        ours,
    )
    assert theirs.read_bytes() == ours.read_bytes()
