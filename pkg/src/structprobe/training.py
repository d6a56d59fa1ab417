"""Probe optimization: Adam with plateau-based LR decay and early stopping.

Each epoch shuffles the training sentences (seeded), groups them into
batches, and applies one optimizer update per batch on the mean of the
per-sentence gradients (each sentence's loss is already normalized by its
squared length). Dev loss is evaluated once per epoch over the full dev set;
the checkpointed model is the one with the lowest observed dev loss.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .container import EmbeddingSet, align
from .probes import (
    LINEAR,
    RBF_ELEMENTWISE,
    SIGMOID,
    TRAINABLE_KERNELS,
    Gradients,
    ProbeParams,
    init_params,
    loss_and_gradient,
    save_checkpoint,
    sentence_loss,
)
from .treebank import Sentence, tree_distances

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_NAME = "probe.ckpt"


class TrainingDivergedError(RuntimeError):
    """A loss or gradient became non-finite; names the offending sentence."""


@dataclass
class TrainConfig:
    kernel: str = LINEAR
    rank: int = 128
    layer: int = 0
    c: float = 0.0
    p: int = 2
    sigma: float = 1.0
    a: float = 1.0
    b: float = 0.0
    rbf_mode: str = RBF_ELEMENTWISE
    train_ab: bool = False
    max_epochs: int = 200
    initial_lr: float = 0.001
    lr_decay_factor: float = 0.5
    plateau_patience: int = 1
    plateau_rel_improvement: float = 1e-4
    early_stop_after: int = 5  # LR decays before stopping
    batch_size: int = 20
    optimizer: str = "adam"  # "adam" or "sgd"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.lr_decay_factor < 1.0:
            raise ValueError("lr_decay_factor must be in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.kernel not in TRAINABLE_KERNELS:
            raise ValueError(
                f"kernel {self.kernel!r} is not trainable; choose one of {TRAINABLE_KERNELS}"
            )


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    dev_loss: float
    lr: float


@dataclass
class TrainReport:
    epochs: list[EpochStats]
    best_epoch: int
    best_dev_loss: float
    lr_decays: int
    stopped_early: bool
    wall_clock_sec: float
    checkpoint_path: str | None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def adam_state(params: np.ndarray) -> AdamState:
    return AdamState(params=params.copy(), m=np.zeros_like(params), v=np.zeros_like(params))


def adam_step(state: AdamState, gradient: np.ndarray, lr: float) -> AdamState:
    """One bias-corrected adaptive-moment update."""
    t = state.step + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * gradient
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * gradient * gradient
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    params = state.params - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return AdamState(params=params, m=m, v=v, step=t)


def _prepare(sentences: list[Sentence], eset: EmbeddingSet, layer: int):
    """Aligned (sent_id, layer vectors, gold distances) for trainable sentences."""
    aligned = align(eset, sentences)
    items = []
    for sent, vectors in aligned.pairs:
        if len(sent) < 2:
            continue  # no pairs, no signal
        items.append((sent.sent_id, vectors[layer].astype(np.float64), tree_distances(sent)))
    return items, aligned.missing


def _pack(params: ProbeParams, train_ab: bool) -> np.ndarray:
    theta = params.B.ravel()
    if train_ab:
        theta = np.concatenate([theta, [params.a, params.b]])
    return theta


def _unpack(theta: np.ndarray, params: ProbeParams, train_ab: bool) -> ProbeParams:
    k, n = params.B.shape
    B = theta[: k * n].reshape(k, n)
    if train_ab:
        return ProbeParams(B=B, kernel=params.kernel, c=params.c, p=params.p,
                           sigma=params.sigma, a=float(theta[-2]), b=float(theta[-1]),
                           rbf_mode=params.rbf_mode)
    return ProbeParams(B=B, kernel=params.kernel, c=params.c, p=params.p,
                       sigma=params.sigma, a=params.a, b=params.b, rbf_mode=params.rbf_mode)


def _pack_grad(grads: Gradients, train_ab: bool) -> np.ndarray:
    g = grads.B.ravel()
    if train_ab:
        g = np.concatenate([g, [grads.a or 0.0, grads.b or 0.0]])
    return g


def train(
    config: TrainConfig,
    train_sentences: list[Sentence],
    dev_sentences: list[Sentence],
    train_embeddings: EmbeddingSet,
    dev_embeddings: EmbeddingSet,
    run_dir: str | Path | None = None,
) -> tuple[ProbeParams, TrainReport]:
    """Optimize a probe; returns the params with the lowest observed dev loss.

    Deterministic given the seed (single-threaded sequential reduction).
    When run_dir is given, writes config.json, metrics.csv, probe.ckpt and
    report.json into it.
    """
    t0 = time.perf_counter()
    if config.layer >= train_embeddings.num_layers or config.layer < 0:
        raise ValueError(
            f"layer {config.layer} out of range for {train_embeddings.num_layers} layers"
        )
    train_items, _ = _prepare(train_sentences, train_embeddings, config.layer)
    dev_items, _ = _prepare(dev_sentences, dev_embeddings, config.layer)
    if not train_items:
        raise ValueError("no trainable sentences (need length >= 2 with embeddings)")
    if not dev_items:
        raise ValueError("no dev sentences (need length >= 2 with embeddings)")

    train_ab = config.train_ab and config.kernel == SIGMOID
    params = init_params(
        dim=train_embeddings.dim,
        rank=config.rank,
        kernel=config.kernel,
        seed=config.seed,
        c=config.c, p=config.p, sigma=config.sigma,
        a=config.a, b=config.b, rbf_mode=config.rbf_mode,
    )
    state = adam_state(_pack(params, train_ab))
    rng = np.random.default_rng(config.seed)
    lr = config.initial_lr

    best_dev = np.inf
    best_params = params
    best_epoch = 0
    plateau_ref = np.inf
    wait = 0
    decays = 0
    stopped_early = False
    epochs: list[EpochStats] = []

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_items))
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            grad_sum = None
            for idx in batch:
                sent_id, H, gold = train_items[idx]
                try:
                    loss, grads = loss_and_gradient(params, H, gold, wrt_ab=train_ab)
                except ArithmeticError as err:
                    raise TrainingDivergedError(
                        f"non-finite loss/gradient on sentence {sent_id!r} at epoch {epoch}"
                    ) from err
                loss_sum += loss
                g = _pack_grad(grads, train_ab)
                grad_sum = g if grad_sum is None else grad_sum + g
            mean_grad = grad_sum / len(batch)
            if config.optimizer == "adam":
                state = adam_step(state, mean_grad, lr)
            else:
                state = AdamState(params=state.params - lr * mean_grad,
                                  m=state.m, v=state.v, step=state.step + 1)
            params = _unpack(state.params, params, train_ab)

        train_loss = loss_sum / len(train_items)
        dev_loss = _mean_dev_loss(params, dev_items, epoch)
        epochs.append(EpochStats(epoch=epoch, train_loss=train_loss, dev_loss=dev_loss, lr=lr))

        if dev_loss < best_dev:
            best_dev = dev_loss
            best_params = _unpack(state.params.copy(), params, train_ab)
            best_epoch = epoch

        improved = dev_loss < plateau_ref * (1.0 - config.plateau_rel_improvement)
        if improved:
            plateau_ref = dev_loss
            wait = 0
        else:
            wait += 1
            if wait >= config.plateau_patience:
                lr *= config.lr_decay_factor
                decays += 1
                wait = 0
                if decays >= config.early_stop_after:
                    stopped_early = epoch < config.max_epochs
                    break

    checkpoint_path = None
    report = TrainReport(
        epochs=epochs,
        best_epoch=best_epoch,
        best_dev_loss=float(best_dev),
        lr_decays=decays,
        stopped_early=stopped_early,
        wall_clock_sec=time.perf_counter() - t0,
        checkpoint_path=None,
    )
    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_path = run_dir / CHECKPOINT_NAME
        save_checkpoint(
            best_params,
            checkpoint_path,
            meta={
                "best_epoch": best_epoch,
                "dev_loss": float(best_dev),
                "layer": config.layer,
                "seed": config.seed,
                "optimizer": config.optimizer,
                "epochs_run": len(epochs),
            },
        )
        report.checkpoint_path = str(checkpoint_path)
        with open(run_dir / "config.json", "w", encoding="utf-8") as f:
            json.dump(asdict(config), f, indent=2, sort_keys=True)
            f.write("\n")
        with open(run_dir / "metrics.csv", "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "train_loss", "dev_loss", "lr"])
            for e in epochs:
                writer.writerow([e.epoch, f"{e.train_loss:.10g}", f"{e.dev_loss:.10g}", f"{e.lr:.10g}"])
        with open(run_dir / "report.json", "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
    return best_params, report


def _mean_dev_loss(params: ProbeParams, dev_items, epoch: int) -> float:
    total = 0.0
    for sent_id, H, gold in dev_items:
        try:
            total += sentence_loss(params, H, gold)
        except ArithmeticError as err:
            raise TrainingDivergedError(
                f"non-finite dev loss on sentence {sent_id!r} at epoch {epoch}"
            ) from err
    return total / len(dev_items)
