"""Command line: run a frozen model over treebanks and write the container."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .conllu import read_sentences
from .container import write
from .extract import ExtractionResult, ExtractorConfig, extract


def run_extraction(encoder, config: ExtractorConfig, treebank_paths, out_path) -> ExtractionResult:
    """Shared driver: read treebanks, extract, write container + skip log."""
    sentences = []
    for path in treebank_paths:
        sentences.extend(read_sentences(path))
    result = extract(encoder, sentences, config)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write(result.data, out_path)
    log_path = out_path.with_name(out_path.name + ".skipped.log")
    if result.skipped:
        log_path.write_text(
            "".join(f"{sid}\t{reason}\n" for sid, reason in result.skipped),
            encoding="utf-8",
        )
    elif log_path.exists():
        log_path.unlink()
    print(f"wrote {out_path}: {result.written} sentences, {len(result.skipped)} skipped")
    if result.skipped:
        print(f"skip log: {log_path}")
    return result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract-embeddings",
        description="Dump per-layer, subword-mean-pooled word embeddings to a container",
    )
    parser.add_argument("--treebank", required=True, nargs="+",
                        help="CoNLL-U file(s); sent_ids must be unique across them")
    parser.add_argument("--model", required=True,
                        help="Hugging Face model name or local path (frozen weights)")
    parser.add_argument("--out", required=True, help="output container path")
    parser.add_argument("--non-contextual", action="store_true",
                        help="forward each word in isolation instead of the full sentence")
    parser.add_argument("--include-special-tokens", action="store_true",
                        help="include special-token positions in every token's mean")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    for path in args.treebank:
        if not Path(path).is_file():
            print(f"usage error: no such treebank: {path}", file=sys.stderr)
            return 2

    from .encoders import TransformersEncoder

    try:
        encoder = TransformersEncoder(args.model, device=args.device)
    except Exception as err:  # missing extra, missing weights, bad model dir
        print(f"error: cannot load model {args.model!r}: {err}", file=sys.stderr)
        return 1

    config = ExtractorConfig(
        model=args.model,
        contextual=not args.non_contextual,
        include_special_tokens_in_pooling=args.include_special_tokens,
    )
    try:
        run_extraction(encoder, config, args.treebank, args.out)
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
