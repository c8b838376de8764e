"""Emotion label set, lexicons and weak labeling.

The canonical emotion order is fixed for every store, wire message and
metric in the package: joy, sadness, fear, anger, surprise, disgust
(indices 0..5). Labels are six-tuples of booleans in that order.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import textprep
from .errors import ConflictingDuplicate, EmptyDataset
from .textprep import LexiconMatcher, WordSequence

EMOTIONS: tuple[str, ...] = ("joy", "sadness", "fear", "anger", "surprise", "disgust")
EMOTION_INDEX: dict[str, int] = {name: i for i, name in enumerate(EMOTIONS)}
N_EMOTIONS = len(EMOTIONS)

EmotionLabels = tuple[bool, ...]

NO_LABELS: EmotionLabels = (False,) * N_EMOTIONS


def labels_from_names(names: Iterable[str]) -> EmotionLabels:
    """Build a label tuple from emotion names; unknown names raise ValueError."""
    out = [False] * N_EMOTIONS
    for name in names:
        if name not in EMOTION_INDEX:
            raise ValueError(f"unknown emotion {name!r}")
        out[EMOTION_INDEX[name]] = True
    return tuple(out)


def label_names(labels: Sequence[bool]) -> list[str]:
    """Canonical-order names of the active labels."""
    return [EMOTIONS[i] for i, on in enumerate(labels) if on]


@dataclass
class Lexicon:
    """Per-emotion term lists in normalized word form.

    Terms are tuples of words; multi-word terms match contiguously. The
    matcher index is built once at construction.
    """

    terms: dict[str, tuple[tuple[str, ...], ...]]
    matcher: LexiconMatcher = field(init=False, repr=False)

    def __post_init__(self) -> None:
        unknown = set(self.terms) - set(EMOTIONS)
        if unknown:
            raise ValueError(f"unknown emotions in lexicon: {sorted(unknown)}")
        # always carry all six emotions so match results are total
        self.terms = {e: tuple(self.terms.get(e, ())) for e in EMOTIONS}
        self.matcher = LexiconMatcher(self.terms)

    def checksum(self) -> str:
        """Stable sha256 over the canonical serialized term lists."""
        canon = json.dumps(
            {e: sorted(" ".join(t) for t in ts) for e, ts in self.terms.items()},
            sort_keys=True,
        )
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_lexicon(path: str | Path) -> Lexicon:
    """Read a lexicon CSV (header ``emotion,term``).

    Terms are normalized with the same pipeline as tweet text, which
    guarantees matchability; duplicates within an emotion collapse.
    """
    terms: dict[str, list[tuple[str, ...]]] = {e: [] for e in EMOTIONS}
    seen: set[tuple[str, tuple[str, ...]]] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["emotion", "term"]:
            raise ValueError(f"lexicon file {path} must have header 'emotion,term'")
        for row in reader:
            emotion = (row["emotion"] or "").strip()
            if emotion not in EMOTION_INDEX:
                raise ValueError(f"unknown emotion {emotion!r} in lexicon {path}")
            words = tuple(textprep.split_words(textprep.normalize(row["term"] or "")))
            if not words:
                raise ValueError(f"lexicon term {row['term']!r} is empty after normalization")
            key = (emotion, words)
            if key not in seen:
                seen.add(key)
                terms[emotion].append(words)
    return Lexicon(terms={e: tuple(ts) for e, ts in terms.items()})


def weak_label(words: Sequence[str], lexicon: Lexicon) -> EmotionLabels:
    """Label an emotion iff at least one of its lexicon terms occurs."""
    spans = lexicon.matcher.match(words)
    return tuple(bool(spans[e]) for e in EMOTIONS)


@dataclass(frozen=True)
class AnnotationRecord:
    tweet_id: str
    annotator_id: str
    selected: EmotionLabels  # all-false allowed


def aggregate_annotations(
    records: Iterable[AnnotationRecord], min_agreement: int = 2
) -> dict[str, EmotionLabels]:
    """Aggregate survey selections into per-tweet labels.

    A label is set iff at least ``min_agreement`` distinct annotators selected
    it. Identical duplicate records collapse; contradictory duplicates raise
    :class:`ConflictingDuplicate`. Tweets whose aggregate is all-false are
    retained with empty labels.
    """
    if min_agreement < 1:
        raise ValueError("min_agreement must be >= 1")
    by_key: dict[tuple[str, str], EmotionLabels] = {}
    for rec in records:
        key = (rec.tweet_id, rec.annotator_id)
        previous = by_key.get(key)
        if previous is not None and previous != tuple(rec.selected):
            raise ConflictingDuplicate(
                f"annotator {rec.annotator_id!r} gave two different answers for tweet {rec.tweet_id!r}"
            )
        by_key[key] = tuple(rec.selected)

    counts: dict[str, list[int]] = {}
    for (tweet_id, _), selected in by_key.items():
        acc = counts.setdefault(tweet_id, [0] * N_EMOTIONS)
        for i, on in enumerate(selected):
            if on:
                acc[i] += 1
    return {
        tweet_id: tuple(c >= min_agreement for c in acc) for tweet_id, acc in counts.items()
    }


@dataclass(frozen=True)
class DatasetExample:
    tweet_id: str
    words: tuple[str, ...]
    labels: EmotionLabels


def build_training_set(
    store, lexicon: Lexicon, remove_lexicons: bool
) -> tuple[list[DatasetExample], list[int]]:
    """Weak-label every stored tweet and materialize training examples.

    Tweets whose weak label is all-false carry no supervision signal and are
    excluded. When ``remove_lexicons`` is set, lexicon terms are stripped to
    a fixed point, so no example's words contain any lexicon term. Returns
    the examples plus per-class positive counts.

    ``store`` is any object with ``iter_tweets()`` yielding records with
    ``id`` and ``text`` attributes (the ingest corpus store qualifies).
    """
    examples: list[DatasetExample] = []
    pos_counts = [0] * N_EMOTIONS
    for tweet in store.iter_tweets():
        words = textprep.split_words(textprep.normalize(tweet.text))
        labels = weak_label(words, lexicon)
        if not any(labels):
            continue
        if remove_lexicons:
            words = textprep.strip_lexicon_terms(words, lexicon.matcher)
        examples.append(DatasetExample(tweet_id=tweet.id, words=tuple(words), labels=labels))
        for i, on in enumerate(labels):
            if on:
                pos_counts[i] += 1
    if not examples:
        raise EmptyDataset("no tweet matched any lexicon term")
    return examples, pos_counts


def save_dataset(examples: Iterable[DatasetExample], path: str | Path) -> None:
    """Write examples as ndjson: tweet_id, words (array), labels (array of 6 ints)."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "tweet_id": ex.tweet_id,
                        "words": list(ex.words),
                        "labels": [int(b) for b in ex.labels],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_dataset(path: str | Path) -> list[DatasetExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            labels = obj["labels"]
            if len(labels) != N_EMOTIONS:
                raise ValueError(f"dataset row for {obj.get('tweet_id')!r} has {len(labels)} labels")
            examples.append(
                DatasetExample(
                    tweet_id=str(obj["tweet_id"]),
                    words=tuple(obj["words"]),
                    labels=tuple(bool(v) for v in labels),
                )
            )
    return examples
