import sys
import zlib
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from embedding_extractor.encoders import SequenceTooLongError, WordEncoding


class StubEncoder:
    """Deterministic fake model: BOS/EOS specials, context-shifted vectors.

    A position's vector is a fixed function of its subword id and the layer,
    plus a small offset that depends on the whole input sequence, so full
    sentences genuinely produce context-dependent states while single-word
    inputs are reproducible. Words split into chunks of up to 3 characters;
    "<untokenizable>" yields zero subwords.
    """

    BOS, EOS = 1, 2

    def __init__(self, num_layers=2, dim=4, max_length=None):
        self.num_layers = num_layers
        self.dim = dim
        self.max_length = max_length

    def tokenize_word(self, word):
        if word == "<untokenizable>":
            return []
        chunks = [word[i : i + 3] for i in range(0, len(word), 3)]
        return [zlib.crc32(c.encode()) % 9973 + 10 for c in chunks]

    def _base(self, token_id, layer):
        rng = np.random.default_rng(token_id * 1009 + layer)
        return rng.normal(size=self.dim)

    def encode_words(self, words):
        per_word = [self.tokenize_word(w) for w in words]
        flat = [tid for ids in per_word for tid in ids]
        with_special = [self.BOS, *flat, self.EOS]
        if self.max_length is not None and len(with_special) > self.max_length:
            raise SequenceTooLongError(
                f"{len(with_special)} tokens exceed the model maximum {self.max_length}"
            )
        ctx = 0.001 * float(sum(flat))
        hidden = np.empty((self.num_layers, len(with_special), self.dim), dtype=np.float32)
        for layer in range(self.num_layers):
            for pos, tid in enumerate(with_special):
                hidden[layer, pos] = self._base(tid, layer) + ctx
        rows = []
        cursor = 1  # row 0 is BOS
        for ids in per_word:
            rows.append(list(range(cursor, cursor + len(ids))))
            cursor += len(ids)
        return WordEncoding(
            hidden=hidden,
            word_rows=rows,
            special_rows=[0, len(with_special) - 1],
        )


@pytest.fixture
def encoder():
    return StubEncoder()


CONLLU = """\
# sent_id = ex-1
# text = The keyboard clicked
1\tThe\t_\tDET\t_\t_\t2\tdet\t_\t_
2\tkeyboard\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tclicked\t_\tVERB\t_\t_\t0\troot\t_\t_

# sent_id = ex-2
1\tIt\t_\tPRON\t_\t_\t2\tnsubj\t_\t_
2-3\tclicked\t_\t_\t_\t_\t_\t_\t_\t_
2\tclicked\t_\tVERB\t_\t_\t0\troot\t_\t_
3\tagain\t_\tADV\t_\t_\t2\tadvmod\t_\t_
"""


@pytest.fixture
def conllu_path(tmp_path):
    path = tmp_path / "mini.conllu"
    path.write_text(CONLLU, encoding="utf-8")
    return path
