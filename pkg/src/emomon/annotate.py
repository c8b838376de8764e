"""Survey-export toolchain.

Validates the CSV that the annotation survey produces, collapses benign
duplicate submissions, and turns agreed-on annotations into the gold
validation CSV that the evaluation harness consumes.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Mapping

from .errors import DuplicateAnnotation, IoFailure, MalformedRow, UnresolvedTweetId
from .ingest import CorpusStore
from .labeling import (
    EMOTIONS,
    AnnotationRecord,
    aggregate_annotations,
)

logger = logging.getLogger(__name__)

SURVEY_HEADER = ["tweet_id", "annotator_id"] + list(EMOTIONS)
GOLD_HEADER = ["tweet_id", "text"] + list(EMOTIONS)


def validate_survey_export(path: str | Path) -> list[AnnotationRecord]:
    """Parse a survey CSV into annotation records.

    Rows must carry binary cells under exactly the six canonical emotion
    columns. A row repeating an earlier (tweet_id, annotator_id) pair is
    dropped when the selections agree and rejected when they differ: a
    double submit is harmless, a changed answer is not interpretable.
    """
    records: dict[tuple[str, str], AnnotationRecord] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MalformedRow(f"{path}: empty file, expected a header") from None
            if header != SURVEY_HEADER:
                raise MalformedRow(
                    f"{path}: unexpected header {header}, expected {SURVEY_HEADER}"
                )
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(SURVEY_HEADER):
                    raise MalformedRow(
                        f"{path}:{lineno}: expected {len(SURVEY_HEADER)} cells, got {len(row)}"
                    )
                tweet_id, annotator_id = row[0].strip(), row[1].strip()
                if not tweet_id or not annotator_id:
                    raise MalformedRow(f"{path}:{lineno}: blank tweet_id or annotator_id")
                selected = []
                for name, cell in zip(EMOTIONS, row[2:]):
                    if cell not in ("0", "1"):
                        raise MalformedRow(
                            f"{path}:{lineno}: {name} cell must be 0 or 1, got {cell!r}"
                        )
                    selected.append(cell == "1")
                record = AnnotationRecord(
                    tweet_id=tweet_id,
                    annotator_id=annotator_id,
                    selected=tuple(selected),
                )
                key = (tweet_id, annotator_id)
                if key in records:
                    if records[key].selected != record.selected:
                        raise DuplicateAnnotation(
                            f"{path}:{lineno}: annotator {annotator_id!r} gave "
                            f"conflicting answers for tweet {tweet_id!r}"
                        )
                    continue
                records[key] = record
    except OSError as exc:
        raise IoFailure(f"cannot read survey export {path}: {exc}") from exc
    return list(records.values())


def texts_from_store(store: CorpusStore) -> dict[str, str]:
    """tweet_id -> raw text over every scope of a corpus store."""
    return {tweet.id: tweet.text for tweet in store.iter_tweets()}


def texts_from_csv(path: str | Path) -> dict[str, str]:
    """tweet_id -> text from a two-column CSV with header tweet_id,text."""
    texts: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MalformedRow(f"{path}: empty file, expected a header") from None
            if header != ["tweet_id", "text"]:
                raise MalformedRow(f"{path}: expected header tweet_id,text, got {header}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2 or not row[0].strip():
                    raise MalformedRow(f"{path}:{lineno}: expected tweet_id,text")
                texts[row[0].strip()] = row[1]
    except OSError as exc:
        raise IoFailure(f"cannot read texts CSV {path}: {exc}") from exc
    return texts


def emit_gold(
    records: list[AnnotationRecord],
    texts: Mapping[str, str],
    out_path: str | Path,
    min_agreement: int = 2,
) -> int:
    """Aggregate annotations and write the gold validation CSV.

    Rows are sorted by tweet_id so re-runs are byte-identical. Returns the
    number of gold rows written. All-negative rows are kept: the absence of
    agreed emotions is itself a validated answer.
    """
    agreed = aggregate_annotations(records, min_agreement=min_agreement)
    missing = sorted(tid for tid in agreed if tid not in texts)
    if missing:
        raise UnresolvedTweetId(f"no text for tweet ids: {missing}")
    try:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(GOLD_HEADER)
            for tweet_id in sorted(agreed):
                labels = agreed[tweet_id]
                writer.writerow(
                    [tweet_id, texts[tweet_id]] + [int(flag) for flag in labels]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write gold CSV {out_path}: {exc}") from exc
    logger.info("wrote %d gold rows to %s", len(agreed), out_path)
    return len(agreed)
