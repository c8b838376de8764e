"""Multi-label evaluation metrics and the four-experiment harness.

Average precision uses the threshold-sweep definition: walking the distinct
score values in descending order, the prediction set at threshold s is
{i : score_i >= s}, and AP accumulates (R_k - R_{k-1}) * P_k with R_0 = 0.
Ties are handled by construction (one step per distinct value), so the
result is invariant under permutation of the items. This matters for the
lexicon backend, whose scores are all 0 or 1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import textprep
from .classify import (
    ExternalBackendConfig,
    LinearModel,
    classify_external,
    classify_lexicon,
    lookup_embedding,
    scores_matrix,
)
from .errors import (
    BackendUnreachable,
    EmptyEvaluation,
    MissingEmbedding,
    NoPositivesAnywhere,
)
from .labeling import EMOTIONS, EmotionLabels, Lexicon, N_EMOTIONS

EXPERIMENT_IDS = (1, 2, 3, 4)


@dataclass(frozen=True)
class EvalPair:
    """Scores and gold labels for one validation tweet."""

    tweet_id: str
    scores: tuple[float, ...]
    gold: EmotionLabels


@dataclass(frozen=True)
class GoldRow:
    tweet_id: str
    text: str
    labels: EmotionLabels


@dataclass
class MetricsReport:
    map: float
    hamming: float
    macro_f1: float
    per_class_ap: list[float | None]
    per_class_f1: list[float]
    n: int
    experiment_id: int

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "n": self.n,
            "map": self.map,
            "hamming": self.hamming,
            "macro_f1": self.macro_f1,
            "per_class_ap": dict(zip(EMOTIONS, self.per_class_ap)),
            "per_class_f1": dict(zip(EMOTIONS, self.per_class_f1)),
        }


def _to_arrays(pairs: Sequence[EvalPair]) -> tuple[np.ndarray, np.ndarray]:
    if not pairs:
        raise EmptyEvaluation("no evaluation pairs")
    scores = np.asarray([p.scores for p in pairs], dtype=np.float64)
    gold = np.asarray([p.gold for p in pairs], dtype=bool)
    if scores.shape != (len(pairs), N_EMOTIONS) or gold.shape != scores.shape:
        raise ValueError(f"pairs must be {N_EMOTIONS}-dimensional on both sides")
    return scores, gold


def average_precision(scores_c: Sequence[float], gold_c: Sequence[bool]) -> float | None:
    """Threshold-sweep AP for one class; None when the class has no positives."""
    s = np.asarray(scores_c, dtype=np.float64)
    g = np.asarray(gold_c, dtype=bool)
    if s.ndim != 1 or s.shape != g.shape or s.size == 0:
        raise ValueError("scores and gold must be equal-length non-empty vectors")
    total_pos = int(g.sum())
    if total_pos == 0:
        return None
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    g_sorted = g[order]
    # inclusive end index of each distinct-score group, descending
    ends = np.append(np.nonzero(np.diff(s_sorted))[0], s.size - 1)
    tp = np.cumsum(g_sorted)[ends]
    precision = tp / (ends + 1)
    recall = tp / total_pos
    recall_steps = np.diff(recall, prepend=0.0)
    return float(np.sum(recall_steps * precision))


def mean_average_precision(pairs: Sequence[EvalPair]) -> float:
    """Mean AP over classes that have at least one gold positive."""
    scores, gold = _to_arrays(pairs)
    aps = [average_precision(scores[:, c], gold[:, c]) for c in range(N_EMOTIONS)]
    present = [ap for ap in aps if ap is not None]
    if not present:
        raise NoPositivesAnywhere("every class is gold-negative; mAP undefined")
    return float(np.mean(present))


def hamming_loss(pairs: Sequence[EvalPair], tau: float = 0.5) -> float:
    """Fraction of label cells where threshold(scores) and gold disagree."""
    scores, gold = _to_arrays(pairs)
    pred = scores >= tau
    return float(np.mean(pred != gold))


def f1_per_class(pred: np.ndarray, gold: np.ndarray) -> np.ndarray:
    """F1 = 2TP / (2TP + FP + FN) per column; 0 where the denominator is 0."""
    pred = np.asarray(pred, dtype=bool)
    gold = np.asarray(gold, dtype=bool)
    tp = (pred & gold).sum(axis=0).astype(np.float64)
    fp = (pred & ~gold).sum(axis=0).astype(np.float64)
    fn = (~pred & gold).sum(axis=0).astype(np.float64)
    denom = 2.0 * tp + fp + fn
    return np.divide(2.0 * tp, denom, out=np.zeros_like(denom), where=denom > 0)


def macro_f1(pairs: Sequence[EvalPair], tau: float = 0.5) -> float:
    """Unweighted mean of per-class F1 over all six classes."""
    scores, gold = _to_arrays(pairs)
    return float(np.mean(f1_per_class(scores >= tau, gold)))


def compute_report(pairs: Sequence[EvalPair], experiment_id: int, tau: float = 0.5) -> MetricsReport:
    scores, gold = _to_arrays(pairs)
    aps = [average_precision(scores[:, c], gold[:, c]) for c in range(N_EMOTIONS)]
    return MetricsReport(
        map=mean_average_precision(pairs),
        hamming=hamming_loss(pairs, tau),
        macro_f1=macro_f1(pairs, tau),
        per_class_ap=aps,
        per_class_f1=[float(x) for x in f1_per_class(scores >= tau, gold)],
        n=len(pairs),
        experiment_id=experiment_id,
    )


def load_gold_csv(path: str | Path) -> list[GoldRow]:
    """Read the validation gold file: tweet_id,text,<six 0/1 label columns>."""
    expected = ["tweet_id", "text", *EMOTIONS]
    rows: list[GoldRow] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise ValueError(f"gold file {path} must have header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            labels = []
            for emotion in EMOTIONS:
                cell = (row[emotion] or "").strip()
                if cell not in ("0", "1"):
                    raise ValueError(f"{path}:{lineno}: label cell {cell!r} is not 0/1")
                labels.append(cell == "1")
            rows.append(GoldRow(tweet_id=row["tweet_id"], text=row["text"], labels=tuple(labels)))
    return rows


def _external_texts(gold: Sequence[GoldRow], lexicon: Lexicon, remove_lexicons: bool) -> list[str]:
    # both lexicon-removed and lexicon-kept variants are sent as the same
    # space-joined word form, so the experiments differ only in the removal
    texts = []
    for row in gold:
        words = textprep.split_words(textprep.normalize(row.text))
        if remove_lexicons:
            words = textprep.strip_lexicon_terms(words, lexicon.matcher)
        texts.append(" ".join(words))
    return texts


def run_experiment(
    experiment_id: int,
    gold: Sequence[GoldRow],
    lexicon: Lexicon,
    tau: float = 0.5,
    external: ExternalBackendConfig | None = None,
    model: LinearModel | None = None,
    embeddings: dict[str, np.ndarray] | None = None,
) -> MetricsReport:
    """Run one of the four validation experiments on identical gold labels.

    1: external model on normalized text with lexicon terms removed.
    2: the lexicon classifier itself.
    3: external model on normalized text with lexicon terms kept.
    4: native linear model over per-tweet embeddings (lexicon-removed
       preprocessing is baked into the embeddings upstream).
    """
    if experiment_id not in EXPERIMENT_IDS:
        raise ValueError(f"experiment_id must be one of {EXPERIMENT_IDS}")
    if not gold:
        raise EmptyEvaluation("gold set is empty")

    if experiment_id in (1, 3):
        if external is None:
            raise BackendUnreachable("experiments 1 and 3 need an external server")
        texts = _external_texts(gold, lexicon, remove_lexicons=(experiment_id == 1))
        score_rows = classify_external(external, texts)
    elif experiment_id == 2:
        score_rows = [
            classify_lexicon(textprep.split_words(textprep.normalize(row.text)), lexicon)
            for row in gold
        ]
    else:
        if model is None:
            raise ValueError("experiment 4 needs a trained model checkpoint")
        if embeddings is None:
            raise MissingEmbedding("experiment 4 needs an embeddings file")
        vectors = np.stack([lookup_embedding(embeddings, row.tweet_id) for row in gold])
        score_rows = scores_matrix(model, vectors).tolist()

    pairs = [
        EvalPair(tweet_id=row.tweet_id, scores=tuple(scores), gold=row.labels)
        for row, scores in zip(gold, score_rows)
    ]
    return compute_report(pairs, experiment_id, tau)


def write_report_json(
    report: MetricsReport,
    path: str | Path,
    tau: float,
    backend: str,
    lexicon_checksum: str,
) -> None:
    """Write the metrics report plus config provenance."""
    payload = report.to_dict()
    payload["config"] = {
        "tau": tau,
        "backend": backend,
        "lexicon_sha256": lexicon_checksum,
        "f1_zero_denominator": 0.0,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
