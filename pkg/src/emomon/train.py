"""Native trainer for the linear baseline.

Weighted binary cross-entropy with a per-class multiplier on the positive
term, analytic gradients, bias-corrected Adam, one checkpoint per epoch and
best-checkpoint selection by mAP on the evaluation set. Training is
deterministic: parameters start at zero, shuffling comes only from the
seeded generator, and examples are canonicalized by tweet id first so the
result does not depend on dataset file order.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import metrics
from .classify import LinearModel, lookup_embedding, save_checkpoint, scores_matrix
from .errors import (
    ClassWithoutPositives,
    DimensionMismatch,
    EmptyDataset,
    EmptyEvaluation,
    LengthMismatch,
)
from .labeling import DatasetExample, N_EMOTIONS

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 3e-5
    epochs: int = 4
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    prob_clamp: float = 1e-7

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 < self.prob_clamp < 0.5):
            raise ValueError("prob_clamp must be in (0, 0.5)")


def class_weights(pos_counts: Sequence[int], n: int) -> np.ndarray:
    """Positive-term weight per class: (n - P_c) / P_c."""
    if n <= 0:
        raise ValueError("n must be > 0")
    counts = np.asarray(pos_counts, dtype=np.float64)
    if counts.shape != (N_EMOTIONS,):
        raise ValueError(f"expected {N_EMOTIONS} positive counts")
    if (counts < 1).any():
        missing = [i for i, c in enumerate(counts) if c < 1]
        raise ClassWithoutPositives(f"classes without positive examples: {missing}")
    return (n - counts) / counts


def wbce_loss(
    scores: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[Sequence[bool]] | np.ndarray,
    weights: Sequence[float] | np.ndarray,
    clamp: float = 1e-7,
) -> float:
    """Mean over N examples and 6 classes of the weighted BCE terms.

    term(i, c) = -( w_c * y_ic * ln p_ic + (1 - y_ic) * ln(1 - p_ic) ),
    with p clamped into [clamp, 1 - clamp] before the logs.
    """
    p = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0 or p.shape != y.shape:
        raise LengthMismatch(f"scores {p.shape} and labels {y.shape} must be equal non-empty (N, C)")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (p.shape[1],):
        raise LengthMismatch(f"expected {p.shape[1]} class weights, got {w.shape}")
    p = np.clip(p, clamp, 1.0 - clamp)
    terms = -(w * y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(terms.mean())


def wbce_gradient(
    model: LinearModel,
    vectors: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    clamp: float = 1e-7,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient of wbce_loss(classify_linear(...)) wrt (W, b).

    Where the clamp is active the loss is locally constant in the score, so
    those cells contribute zero gradient.
    """
    v = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != model.dim:
        raise DimensionMismatch(f"expected (N, {model.dim}) vectors, got {v.shape}")
    if y.shape != (v.shape[0], N_EMOTIONS) or v.shape[0] == 0:
        raise DimensionMismatch(f"expected ({v.shape[0]}, {N_EMOTIONS}) labels, got {y.shape}")
    w = np.asarray(weights, dtype=np.float64)
    p = scores_matrix(model, v)
    active = (p > clamp) & (p < 1.0 - clamp)
    dz = ((1.0 - y) * p - w * y * (1.0 - p)) * active
    dz /= y.size  # mean over N examples and 6 classes
    return dz.T @ v, dz.sum(axis=0)


@dataclass
class AdamState:
    m_w: np.ndarray
    v_w: np.ndarray
    m_b: np.ndarray
    v_b: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, dim: int) -> "AdamState":
        return cls(
            m_w=np.zeros((N_EMOTIONS, dim)),
            v_w=np.zeros((N_EMOTIONS, dim)),
            m_b=np.zeros(N_EMOTIONS),
            v_b=np.zeros(N_EMOTIONS),
            t=0,
        )


def adam_step(
    state: AdamState,
    grad: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    model: LinearModel,
) -> tuple[AdamState, LinearModel]:
    """One bias-corrected Adam update; returns new state and model."""
    g_w, g_b = grad
    t = state.t + 1
    m_w = cfg.beta1 * state.m_w + (1.0 - cfg.beta1) * g_w
    v_w = cfg.beta2 * state.v_w + (1.0 - cfg.beta2) * g_w**2
    m_b = cfg.beta1 * state.m_b + (1.0 - cfg.beta1) * g_b
    v_b = cfg.beta2 * state.v_b + (1.0 - cfg.beta2) * g_b**2
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    new_w = model.weights - cfg.learning_rate * (m_w / c1) / (np.sqrt(v_w / c2) + cfg.eps)
    new_b = model.bias - cfg.learning_rate * (m_b / c1) / (np.sqrt(v_b / c2) + cfg.eps)
    return (
        AdamState(m_w=m_w, v_w=v_w, m_b=m_b, v_b=v_b, t=t),
        LinearModel(weights=new_w, bias=new_b),
    )


@dataclass
class TrainResult:
    checkpoints: list[Path]
    best_epoch: int
    best_path: Path
    best_map: float
    log_rows: list[dict]


LOG_HEADER = ["epoch", "train_loss", "eval_map", "eval_f1", "eval_hamming"]


def train(
    dataset: Sequence[DatasetExample],
    embeddings: Mapping[str, np.ndarray],
    eval_gold: Sequence[tuple[str, Sequence[bool]]],
    cfg: TrainConfig,
    out_dir: str | Path,
) -> TrainResult:
    """Run the full checkpointed training loop.

    Every dataset and eval tweet id must resolve to an embedding. Writes one
    checkpoint per epoch plus ``training_log.csv`` and ``best.json`` into
    ``out_dir``; the best checkpoint is the one with the highest eval mAP,
    ties going to the earliest epoch.
    """
    if not dataset:
        raise EmptyDataset("training dataset is empty")
    if not eval_gold:
        raise EmptyEvaluation("evaluation set is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ordered = sorted(dataset, key=lambda ex: ex.tweet_id)
    vectors = np.stack([lookup_embedding(embeddings, ex.tweet_id) for ex in ordered])
    labels = np.asarray([ex.labels for ex in ordered], dtype=np.float64)
    eval_vectors = np.stack([lookup_embedding(embeddings, tid) for tid, _ in eval_gold])
    eval_labels = [tuple(bool(b) for b in lbls) for _, lbls in eval_gold]

    n = len(ordered)
    weights = class_weights(labels.sum(axis=0).astype(int), n)
    logger.info("training on %d examples, dim=%d, class weights=%s", n, vectors.shape[1], weights)

    rng = np.random.default_rng(cfg.seed)
    model = LinearModel.zeros(vectors.shape[1])
    state = AdamState.fresh(vectors.shape[1])

    checkpoints: list[Path] = []
    log_rows: list[dict] = []
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            v_batch, y_batch = vectors[idx], labels[idx]
            batch_losses.append(
                wbce_loss(scores_matrix(model, v_batch), y_batch, weights, cfg.prob_clamp)
            )
            grad = wbce_gradient(model, v_batch, y_batch, weights, cfg.prob_clamp)
            state, model = adam_step(state, grad, cfg, model)

        eval_scores = scores_matrix(model, eval_vectors)
        pairs = [
            metrics.EvalPair(tweet_id=tid, scores=tuple(row), gold=gold)
            for (tid, _), row, gold in zip(eval_gold, eval_scores.tolist(), eval_labels)
        ]
        row = {
            "epoch": epoch,
            "train_loss": float(np.mean(batch_losses)),
            "eval_map": metrics.mean_average_precision(pairs),
            "eval_f1": metrics.macro_f1(pairs),
            "eval_hamming": metrics.hamming_loss(pairs),
        }
        log_rows.append(row)
        path = out_dir / f"checkpoint_epoch{epoch}.json"
        save_checkpoint(model, epoch, path)
        checkpoints.append(path)
        logger.info(
            "epoch %d: train_loss=%.6f eval_map=%.4f eval_f1=%.4f eval_hamming=%.4f",
            epoch, row["train_loss"], row["eval_map"], row["eval_f1"], row["eval_hamming"],
        )

    best_idx = max(range(len(log_rows)), key=lambda i: (log_rows[i]["eval_map"], -i))
    best_epoch = log_rows[best_idx]["epoch"]
    best_map = log_rows[best_idx]["eval_map"]

    with open(out_dir / "training_log.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(log_rows)
    with open(out_dir / "best.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"best_epoch": best_epoch, "eval_map": best_map,
             "checkpoint": checkpoints[best_idx].name},
            fh, indent=2,
        )
        fh.write("\n")

    return TrainResult(
        checkpoints=checkpoints,
        best_epoch=best_epoch,
        best_path=checkpoints[best_idx],
        best_map=best_map,
        log_rows=log_rows,
    )
