"""Plot rendering for the report-producing CLI paths.

Every figure lands next to the delimited output it illustrates: training
curves beside training_log.csv, per-class bars beside the report JSON,
daily emotion traces beside the series CSV. Rendering is headless (Agg).
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be fixed first)

from .labeling import EMOTIONS
from .metrics import MetricsReport
from .monitor import EmotionSeries

logger = logging.getLogger(__name__)

EMOTION_COLORS = {
    "joy": "tab:orange",
    "sadness": "tab:blue",
    "fear": "tab:purple",
    "anger": "tab:red",
    "surprise": "tab:green",
    "disgust": "tab:olive",
}


def plot_training_log(log_rows: Sequence[dict], out_path: str | Path) -> Path:
    """Loss curve plus evaluation metrics, one x-tick per epoch."""
    out_path = Path(out_path)
    epochs = [row["epoch"] for row in log_rows]
    fig, (ax_loss, ax_eval) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [row["train_loss"] for row in log_rows], marker="o", color="tab:red")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_loss.set_xticks(epochs)
    ax_eval.plot(epochs, [row["eval_map"] for row in log_rows], marker="o", label="mAP")
    ax_eval.plot(epochs, [row["eval_f1"] for row in log_rows], marker="s", label="macro F1")
    ax_eval.plot(epochs, [row["eval_hamming"] for row in log_rows], marker="^", label="Hamming")
    ax_eval.set_xlabel("epoch")
    ax_eval.set_ylabel("evaluation metric")
    ax_eval.set_xticks(epochs)
    ax_eval.set_ylim(-0.02, 1.02)
    ax_eval.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    logger.info("wrote %s", out_path)
    return out_path


def plot_report(report: MetricsReport, out_path: str | Path) -> Path:
    """Per-class AP and F1 bars; classes without an AP are shown empty."""
    out_path = Path(out_path)
    x = range(len(EMOTIONS))
    ap = [a if a is not None else 0.0 for a in report.per_class_ap]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    width = 0.38
    ax.bar([i - width / 2 for i in x], ap, width, label="AP", color="tab:blue")
    ax.bar([i + width / 2 for i in x], report.per_class_f1, width, label="F1", color="tab:orange")
    ax.set_xticks(list(x))
    ax.set_xticklabels(EMOTIONS, rotation=20)
    ax.set_ylim(0, 1.05)
    ax.set_title(
        f"experiment {report.experiment_id}: mAP {report.map:.3f}, "
        f"Hamming {report.hamming:.3f}, macro F1 {report.macro_f1:.3f} (n={report.n})"
    )
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    logger.info("wrote %s", out_path)
    return out_path


def plot_series(
    series: EmotionSeries,
    out_path: str | Path,
    emotions: Sequence[str] = EMOTIONS,
) -> Path:
    """Daily percentage traces for the requested emotions of one scope."""
    out_path = Path(out_path)
    dates = [p.date for p in series.points]
    fig, ax = plt.subplots(figsize=(9, 3.5))
    for name in emotions:
        idx = EMOTIONS.index(name)
        ax.plot(
            dates,
            [p.pct[idx] for p in series.points],
            marker=".",
            label=name,
            color=EMOTION_COLORS.get(name),
        )
    ax.set_xlabel("day")
    ax.set_ylabel("% of tweets")
    ax.set_title(f"daily emotions: {series.scope}")
    if emotions:
        ax.legend(fontsize="small", ncol=3)
    fig.autofmt_xdate(rotation=30)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    logger.info("wrote %s", out_path)
    return out_path
