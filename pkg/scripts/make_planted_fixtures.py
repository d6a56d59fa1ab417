"""Generate a synthetic planted-solution dataset on disk.

Writes train/dev/test CoNLL-U files plus one embedding container whose
chosen layer admits an exact linear probe. Useful for exercising the CLI
end to end without any pretrained model.
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from structprobe.container import write_container
from structprobe.synthetic import merge_embedding_sets, planted_corpus
from structprobe.treebank import to_conllu


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--train-sentences", type=int, default=300)
    parser.add_argument("--dev-sentences", type=int, default=60)
    parser.add_argument("--test-sentences", type=int, default=60)
    parser.add_argument("--min-len", type=int, default=4)
    parser.add_argument("--max-len", type=int, default=12)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--num-layers", type=int, default=3)
    parser.add_argument("--planted-layer", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shared = dict(
        min_len=args.min_len,
        max_len=args.max_len,
        dim=args.dim,
        num_layers=args.num_layers,
        planted_layer=args.planted_layer,
        rotation_seed=args.seed,
    )
    splits = {
        "train": planted_corpus(args.train_sentences, seed=args.seed + 1, id_prefix="train", **shared),
        "dev": planted_corpus(args.dev_sentences, seed=args.seed + 2, id_prefix="dev", **shared),
        "test": planted_corpus(args.test_sentences, seed=args.seed + 3, id_prefix="test", **shared),
    }
    for name, corpus in splits.items():
        path = out / f"{name}.conllu"
        path.write_text(to_conllu(corpus.sentences), encoding="utf-8")
        print(f"wrote {path} ({len(corpus.sentences)} sentences)")
    merged = merge_embedding_sets(*(c.embeddings for c in splits.values()))
    write_container(merged, out / "embeddings.spb")
    print(f"wrote {out / 'embeddings.spb'} "
          f"(layers={merged.num_layers}, dim={merged.dim}, planted layer {args.planted_layer})")


if __name__ == "__main__":
    main()
