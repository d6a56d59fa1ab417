"""Command-line entry point: train, eval, viz, and sweep subcommands.

Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags, missing
input files). Every subcommand writes the effective merged configuration
(defaults < JSON config file < explicit flags) into its output directory.
STRUCTPROBE_THREADS caps sweep parallelism (default 1, fully sequential).
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import fields
from pathlib import Path

from .binfmt import FormatError
from .container import AlignmentError, read_container
from .evaluation import (
    DEFAULT_RANKS,
    EvalReport,
    TreebankSplits,
    evaluate,
    layer_sweep,
    rank_sweep,
)
from .probes import KERNELS, RBF_MODES, load_checkpoint, with_kernel
from .rendering import ArcDiagramSpec, render_arcs, render_line_chart
from .training import TrainConfig, TrainingDivergedError, train
from .treebank import ConlluError, read_conllu


class UsageError(Exception):
    pass


TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}

_CONFIG_KEYS = TRAIN_FIELDS | {"exclude_punct", "ranks", "mode"}


def _threads() -> int:
    raw = os.environ.get("STRUCTPROBE_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"STRUCTPROBE_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError("STRUCTPROBE_THREADS must be >= 1")
    return value


def _require_file(path, flag: str) -> Path:
    if path is None:
        raise UsageError(f"missing required flag {flag}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: no such file: {p}")
    return p


def _prepare_out(path, overwrite: bool) -> Path:
    if path is None:
        raise UsageError("missing required flag --out")
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise RuntimeError(f"output directory {out} is not empty; pass --overwrite to reuse it")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    p = _require_file(path, "--config")
    with open(p, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise UsageError("--config must hold a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _merge_train_config(args) -> tuple[TrainConfig, dict]:
    file_cfg = _load_config_file(getattr(args, "config", None))
    effective = {f.name: getattr(TrainConfig, f.name, f.default) for f in fields(TrainConfig)}
    effective.update({k: v for k, v in file_cfg.items() if k in TRAIN_FIELDS})
    for key in TRAIN_FIELDS:
        value = getattr(args, key, None)
        if value is not None:
            effective[key] = value
    try:
        config = TrainConfig(**effective)
    except ValueError as err:
        raise UsageError(str(err)) from None
    return config, effective


def _write_run_config(out: Path, subcommand: str, effective: dict, paths: dict) -> None:
    payload = {"subcommand": subcommand, **paths, **effective}
    with open(out / "run_config.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=str)
        f.write("\n")


def _exclude_punct(args, file_cfg: dict) -> bool:
    if getattr(args, "exclude_punct", None) is not None:
        return args.exclude_punct
    return bool(file_cfg.get("exclude_punct", True))


def cmd_train(args) -> int:
    train_path = _require_file(args.treebank_train, "--treebank-train")
    dev_path = _require_file(args.treebank_dev, "--treebank-dev")
    emb_path = _require_file(args.embeddings, "--embeddings")
    config, effective = _merge_train_config(args)
    out = _prepare_out(args.out, args.overwrite)
    train_sents = read_conllu(train_path)
    dev_sents = read_conllu(dev_path)
    eset = read_container(emb_path)
    _write_run_config(out, "train", effective, {
        "treebank_train": str(train_path),
        "treebank_dev": str(dev_path),
        "embeddings": str(emb_path),
    })
    _, report = train(config, train_sents, dev_sents, eset, eset, run_dir=out)
    print(f"trained {config.kernel} probe (rank {config.rank}, layer {config.layer}): "
          f"best dev loss {report.best_dev_loss:.6g} at epoch {report.best_epoch}")
    print(f"checkpoint: {report.checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    ckpt_path = _require_file(args.checkpoint, "--checkpoint")
    test_path = _require_file(args.treebank_test, "--treebank-test")
    emb_path = _require_file(args.embeddings, "--embeddings")
    file_cfg = _load_config_file(getattr(args, "config", None))
    exclude_punct = _exclude_punct(args, file_cfg)
    out = _prepare_out(args.out, args.overwrite)

    params, meta = load_checkpoint(ckpt_path)
    if args.kernel is not None or args.rbf_mode is not None:
        params = with_kernel(params, args.kernel or params.kernel, args.rbf_mode)
    layer = args.layer if args.layer is not None else int(meta.get("layer", 0))
    sentences = read_conllu(test_path)
    eset = read_container(emb_path)
    report = evaluate(params, sentences, eset, layer=layer, exclude_punct=exclude_punct)
    report.save(out / "eval.json")
    _write_run_config(out, "eval", {
        "kernel": params.kernel, "rbf_mode": params.rbf_mode, "layer": layer,
        "rank": params.rank, "exclude_punct": exclude_punct,
    }, {
        "checkpoint": str(ckpt_path),
        "treebank_test": str(test_path),
        "embeddings": str(emb_path),
    })
    print(f"UUAS: {report.uuas:.2f} ({params.kernel}, layer {layer}, rank {params.rank}, "
          f"exclude_punct={exclude_punct})")
    print(f"report: {out / 'eval.json'}")
    return 0


def _slug(sent_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", sent_id)


def cmd_viz(args) -> int:
    if args.report is None and args.sweep_csv is None:
        raise UsageError("nothing to render: pass --report and/or --sweep-csv")
    out = _prepare_out(args.out, args.overwrite)
    written = []
    if args.report is not None:
        report_path = _require_file(args.report, "--report")
        report = EvalReport.load(report_path)
        wanted = set(args.sent_id) if args.sent_id else None
        found = set()
        for record in report.sentences:
            if wanted is not None and record.sent_id not in wanted:
                continue
            found.add(record.sent_id)
            spec = ArcDiagramSpec(
                tokens=record.forms,
                gold_edges=[tuple(e) for e in record.gold],
                predicted_edges=[(e.i, e.j, e.strength) for e in record.predicted],
                title=f"{record.sent_id} ({report.kernel}, layer {report.layer})",
            )
            path = out / f"arc_{_slug(record.sent_id)}.svg"
            path.write_text(render_arcs(spec), encoding="utf-8")
            written.append(path)
        if wanted is not None and wanted - found:
            raise RuntimeError(f"sent_ids not present in report: {sorted(wanted - found)}")
    if args.sweep_csv is not None:
        csv_path = _require_file(args.sweep_csv, "--sweep-csv")
        series = _read_sweep_csv(csv_path)
        path = out / "sweep_chart.svg"
        path.write_text(
            render_line_chart(series, title="UUAS sweep", x_label="sweep key", y_label="UUAS"),
            encoding="utf-8",
        )
        written.append(path)
    _write_run_config(out, "viz", {}, {
        "report": str(args.report) if args.report else None,
        "sweep_csv": str(args.sweep_csv) if args.sweep_csv else None,
        "sent_id": args.sent_id or [],
    })
    for path in written:
        print(f"wrote {path}")
    return 0


def _read_sweep_csv(path) -> dict:
    import csv as _csv

    with open(path, encoding="utf-8", newline="") as f:
        rows = list(_csv.DictReader(f))
    if not rows:
        raise RuntimeError(f"{path} has no data rows")
    try:
        dev = [(float(r["sweep_key"]), float(r["uuas_dev"])) for r in rows]
        test = [(float(r["sweep_key"]), float(r["uuas_test"])) for r in rows]
    except (KeyError, TypeError, ValueError) as err:
        raise RuntimeError(f"{path} is not a sweep CSV (sweep_key,uuas_dev,uuas_test): {err}") from None
    return {"dev": dev, "test": test}


def cmd_sweep(args) -> int:
    train_path = _require_file(args.treebank_train, "--treebank-train")
    dev_path = _require_file(args.treebank_dev, "--treebank-dev")
    test_path = _require_file(args.treebank_test, "--treebank-test")
    emb_path = _require_file(args.embeddings, "--embeddings")
    config, effective = _merge_train_config(args)
    file_cfg = _load_config_file(getattr(args, "config", None))
    exclude_punct = _exclude_punct(args, file_cfg)
    threads = _threads()
    out = _prepare_out(args.out, args.overwrite)

    splits = TreebankSplits(
        train=read_conllu(train_path),
        dev=read_conllu(dev_path),
        test=read_conllu(test_path),
    )
    eset = read_container(emb_path)
    _write_run_config(out, "sweep", {**effective, "mode": args.mode,
                                     "exclude_punct": exclude_punct}, {
        "treebank_train": str(train_path),
        "treebank_dev": str(dev_path),
        "treebank_test": str(test_path),
        "embeddings": str(emb_path),
    })
    if args.mode == "layers":
        rows = layer_sweep(config, splits, eset, out, exclude_punct=exclude_punct,
                           threads=threads)
        key_name = "layer"
    else:
        if args.ranks is not None:
            try:
                ranks = [int(r) for r in args.ranks.split(",") if r.strip()]
            except ValueError:
                raise UsageError(f"--ranks must be comma-separated integers, got {args.ranks!r}") from None
        else:
            ranks = list(DEFAULT_RANKS)
        try:
            rows = rank_sweep(config, ranks, splits, eset, out,
                              exclude_punct=exclude_punct, threads=threads)
        except ValueError as err:
            raise UsageError(str(err)) from None
        key_name = "rank"
    print(f"{'sweep_key':>9}  {'uuas_dev':>8}  {'uuas_test':>9}")
    for row in rows:
        print(f"{row.key:>9}  {row.uuas_dev:>8.2f}  {row.uuas_test:>9.2f}")
    print(f"outputs: {out / 'sweep.csv'}, {out / 'sweep.svg'} ({key_name} mode)")
    return 0


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=KERNELS, default=None)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--layer", type=int, default=None)
    p.add_argument("--rbf-mode", dest="rbf_mode", choices=RBF_MODES, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
    p.add_argument("--initial-lr", dest="initial_lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.add_argument("--train-ab", dest="train_ab", action="store_true", default=None)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON config file; flags override it")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--overwrite", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="structprobe",
        description="Train and evaluate tree-distance probes over stored embeddings",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_train = sub.add_parser("train", help="train a probe and checkpoint the best model")
    p_train.add_argument("--treebank-train", dest="treebank_train")
    p_train.add_argument("--treebank-dev", dest="treebank_dev")
    p_train.add_argument("--embeddings")
    _add_train_flags(p_train)
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint with UUAS and edge strengths")
    p_eval.add_argument("--checkpoint")
    p_eval.add_argument("--treebank-test", dest="treebank_test")
    p_eval.add_argument("--embeddings")
    p_eval.add_argument("--layer", type=int, default=None,
                        help="defaults to the layer the checkpoint was trained on")
    p_eval.add_argument("--kernel", choices=KERNELS, default=None,
                        help="override the forward kernel (reference comparisons)")
    p_eval.add_argument("--rbf-mode", dest="rbf_mode", choices=RBF_MODES, default=None)
    p_eval.add_argument("--exclude-punct", dest="exclude_punct",
                        action=argparse.BooleanOptionalAction, default=None)
    _add_common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_viz = sub.add_parser("viz", help="render arc diagrams and sweep charts")
    p_viz.add_argument("--report", default=None, help="EvalReport JSON from `eval`")
    p_viz.add_argument("--sent-id", dest="sent_id", action="append", default=None)
    p_viz.add_argument("--sweep-csv", dest="sweep_csv", default=None)
    _add_common(p_viz)
    p_viz.set_defaults(func=cmd_viz)

    p_sweep = sub.add_parser("sweep", help="train a probe per layer or per rank")
    p_sweep.add_argument("--mode", choices=("layers", "ranks"), required=True)
    p_sweep.add_argument("--ranks", default=None,
                         help="comma-separated ranks (ranks mode); default "
                              + ",".join(str(r) for r in DEFAULT_RANKS))
    p_sweep.add_argument("--treebank-train", dest="treebank_train")
    p_sweep.add_argument("--treebank-dev", dest="treebank_dev")
    p_sweep.add_argument("--treebank-test", dest="treebank_test")
    p_sweep.add_argument("--embeddings")
    p_sweep.add_argument("--exclude-punct", dest="exclude_punct",
                         action=argparse.BooleanOptionalAction, default=None)
    _add_train_flags(p_sweep)
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except (ConlluError, FormatError, AlignmentError, TrainingDivergedError,
            ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
