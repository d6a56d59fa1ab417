import sys
from pathlib import Path

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

import pytest

from structprobe.synthetic import planted_corpus


MINI_CONLLU = """\
# sent_id = mini-1
# text = I saw it
1\tI\t_\tPRON\t_\t_\t2\tnsubj\t_\t_
2\tsaw\t_\tVERB\t_\t_\t0\troot\t_\t_
3\tit\t_\tPRON\t_\t_\t2\tobj\t_\t_

# sent_id = mini-2
1\tBirds\t_\tNOUN\t_\t_\t2\tnsubj\t_\t_
2\tsing\t_\tVERB\t_\t_\t0\troot\t_\t_
3\tloudly\t_\tADV\t_\t_\t2\tadvmod\t_\t_
4\t.\t_\tPUNCT\t_\t_\t2\tpunct\t_\t_

# sent_id = mini-3
1\tWait\t_\tVERB\t_\t_\t0\troot\t_\t_
"""


@pytest.fixture
def mini_conllu():
    return MINI_CONLLU


@pytest.fixture(scope="session")
def small_planted():
    """A small planted corpus shared by training/evaluation tests."""
    shared = dict(min_len=4, max_len=8, dim=12, signal_rank=7, rotation_seed=7)
    return {
        "train": planted_corpus(80, seed=11, id_prefix="tr", **shared),
        "dev": planted_corpus(20, seed=12, id_prefix="dev", **shared),
    }
