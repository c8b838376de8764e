"""Daily emotion time series.

Labeled tweets are folded into per-scope daily buckets: for every calendar
day (fixed UTC-5 offset, no daylight saving) the bucket records the total
number of tweets and, per emotion, how many tweets carried that label. A
tweet with several labels counts once toward each, so percentages may sum
past 100. Days with no tweets are omitted.

The on-disk store is one CSV per scope under series/<scope>.csv plus a
meta.json describing how the labels were produced. Query projections are
rendered through one canonical JSON encoder so the HTTP endpoint and the
offline CLI emit byte-identical bodies.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .classify import (
    ExternalBackendConfig,
    classify_external,
    classify_lexicon,
    classify_linear,
    load_checkpoint,
    load_embeddings,
    lookup_embedding,
    threshold,
)
from .errors import (
    ConfigError,
    InvalidRange,
    IoFailure,
    LengthMismatch,
    MalformedRow,
    UnknownScope,
)
from .ingest import RawTweet
from .labeling import EMOTIONS, EmotionLabels, Lexicon, N_EMOTIONS
from .textprep import normalize, split_words

logger = logging.getLogger(__name__)

UTC_OFFSET = dt.timedelta(hours=-5)

SERIES_HEADER = (
    ["date", "total"] + list(EMOTIONS) + [f"{name}_pct" for name in EMOTIONS]
)


@dataclass(frozen=True)
class SeriesPoint:
    date: dt.date
    counts: tuple[int, ...]
    total: int

    def __post_init__(self) -> None:
        if len(self.counts) != N_EMOTIONS:
            raise LengthMismatch(f"expected {N_EMOTIONS} counts, got {len(self.counts)}")
        if self.total < 0 or any(c < 0 or c > self.total for c in self.counts):
            raise ValueError(f"counts must lie in [0, total] on {self.date}")

    @property
    def pct(self) -> tuple[float, ...]:
        if self.total == 0:
            return (0.0,) * N_EMOTIONS
        return tuple(100.0 * c / self.total for c in self.counts)


@dataclass
class EmotionSeries:
    scope: str
    points: list[SeriesPoint] = field(default_factory=list)

    def __post_init__(self) -> None:
        dates = [p.date for p in self.points]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError("series points must be strictly increasing by date")


def local_day(created_at: dt.datetime) -> dt.date:
    """Calendar day of a UTC instant under the fixed UTC-5 offset."""
    return (created_at.astimezone(dt.timezone.utc) + UTC_OFFSET).date()


def aggregate_daily(
    labeled: Iterable[tuple[RawTweet, EmotionLabels]], scope: str
) -> EmotionSeries:
    """Fold (tweet, labels) pairs into the daily series for one scope."""
    buckets: dict[dt.date, list[int]] = {}
    for tweet, labels in labeled:
        if tweet.scope != scope:
            continue
        if len(labels) != N_EMOTIONS:
            raise LengthMismatch(
                f"tweet {tweet.id}: expected {N_EMOTIONS} labels, got {len(labels)}"
            )
        row = buckets.setdefault(local_day(tweet.created_at), [0] * (N_EMOTIONS + 1))
        row[0] += 1
        for i, flag in enumerate(labels):
            if flag:
                row[i + 1] += 1
    points = [
        SeriesPoint(date=day, counts=tuple(row[1:]), total=row[0])
        for day, row in sorted(buckets.items())
    ]
    return EmotionSeries(scope=scope, points=points)


# --- classifier backends for the labeling pass ---

@dataclass(frozen=True)
class BackendSpec:
    """Parsed classifier spec: lexicon | model:<checkpoint> | server:<url>."""

    kind: str
    arg: str | None = None

    def __str__(self) -> str:
        return self.kind if self.arg is None else f"{self.kind}:{self.arg}"


def parse_backend_spec(spec: str) -> BackendSpec:
    if spec == "lexicon":
        return BackendSpec(kind="lexicon")
    for prefix in ("model:", "server:"):
        if spec.startswith(prefix) and len(spec) > len(prefix):
            return BackendSpec(kind=prefix[:-1], arg=spec[len(prefix):])
    raise ConfigError(
        f"unknown classifier spec {spec!r}; expected lexicon, model:<checkpoint> or server:<url>"
    )


def label_tweets(
    tweets: Sequence[RawTweet],
    spec: BackendSpec,
    lexicon: Lexicon | None = None,
    embeddings: Mapping | None = None,
    tau: float = 0.5,
) -> list[tuple[RawTweet, EmotionLabels]]:
    """Classify every tweet with the chosen backend and threshold at tau.

    The server backend is retried once: monitoring is a batch pass where a
    transient failure is recoverable, unlike an evaluation run.
    """
    if spec.kind == "lexicon":
        if lexicon is None:
            raise ConfigError("lexicon backend requires a lexicon")
        return [
            (t, threshold(classify_lexicon(split_words(normalize(t.text)), lexicon), tau))
            for t in tweets
        ]
    if spec.kind == "model":
        model, _ = load_checkpoint(spec.arg)
        if embeddings is None:
            raise ConfigError("model backend requires an embeddings table")
        return [
            (t, threshold(classify_linear(model, lookup_embedding(embeddings, t.id)), tau))
            for t in tweets
        ]
    if spec.kind == "server":
        cfg = ExternalBackendConfig(endpoint=spec.arg)
        texts = [" ".join(split_words(normalize(t.text))) for t in tweets]
        rows = classify_external(cfg, texts, retries=1)
        return [(t, threshold(row, tau)) for t, row in zip(tweets, rows)]
    raise ConfigError(f"unknown backend kind {spec.kind!r}")


# --- persistence ---

def _format_pct(value: float) -> str:
    return repr(value)


def export_series_csv(series: EmotionSeries, path: str | Path) -> None:
    """Write the full series CSV; byte-identical for identical series."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SERIES_HEADER)
            for p in series.points:
                writer.writerow(
                    [p.date.isoformat(), p.total]
                    + list(p.counts)
                    + [_format_pct(v) for v in p.pct]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write series CSV {path}: {exc}") from exc


def load_series_csv(path: str | Path, scope: str) -> EmotionSeries:
    """Read a series CSV back, cross-checking stored percentages."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MalformedRow(f"{path}: empty file, expected a header") from None
            if header != SERIES_HEADER:
                raise MalformedRow(f"{path}: unexpected header {header}")
            points = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(SERIES_HEADER):
                    raise MalformedRow(f"{path}:{lineno}: expected {len(SERIES_HEADER)} cells")
                try:
                    day = dt.date.fromisoformat(row[0])
                    total = int(row[1])
                    counts = tuple(int(c) for c in row[2 : 2 + N_EMOTIONS])
                    stored_pct = [float(c) for c in row[2 + N_EMOTIONS :]]
                except ValueError as exc:
                    raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
                point = SeriesPoint(date=day, counts=counts, total=total)
                if any(abs(a - b) > 1e-9 for a, b in zip(stored_pct, point.pct)):
                    raise MalformedRow(f"{path}:{lineno}: percentages disagree with counts")
                points.append(point)
    except OSError as exc:
        raise IoFailure(f"cannot read series CSV {path}: {exc}") from exc
    return EmotionSeries(scope=scope, points=points)


class SeriesStore:
    """Read side of the series directory: series/<scope>.csv + meta.json."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.series_dir = self.root / "series"

    def scopes(self) -> list[str]:
        if not self.series_dir.is_dir():
            return []
        return sorted(p.stem for p in self.series_dir.glob("*.csv"))

    def load(self, scope: str) -> EmotionSeries:
        path = self.series_dir / f"{scope}.csv"
        if not path.is_file():
            raise UnknownScope(f"no series for scope {scope!r}")
        return load_series_csv(path, scope)

    def meta(self) -> dict:
        path = self.root / "meta.json"
        if not path.is_file():
            return {}
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)


def write_series_store(
    out_dir: str | Path,
    series_list: Sequence[EmotionSeries],
    classifier: str,
    tau: float,
    built_at: str | None = None,
) -> SeriesStore:
    """Write one CSV per scope plus meta.json describing the labeling pass."""
    out_dir = Path(out_dir)
    series_dir = out_dir / "series"
    try:
        series_dir.mkdir(parents=True, exist_ok=True)
        for series in series_list:
            export_series_csv(series, series_dir / f"{series.scope}.csv")
        meta = {"classifier": classifier, "tau": tau}
        if built_at is None:
            built_at = dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        meta["built_at"] = built_at
        with open(out_dir / "meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write series store {out_dir}: {exc}") from exc
    return SeriesStore(out_dir)


# --- queries and rendering ---

def _check_emotions(emotions: Sequence[str]) -> list[str]:
    unknown = [e for e in emotions if e not in EMOTIONS]
    if unknown:
        raise ValueError(f"unknown emotions: {unknown}")
    # canonical order regardless of how the request spelled it
    return [e for e in EMOTIONS if e in set(emotions)]

def series_query(
    store: SeriesStore,
    scope: str,
    emotions: Sequence[str],
    date_from: dt.date,
    date_to: dt.date,
) -> list[dict]:
    """Range query returning points projected to the requested emotions."""
    if date_from > date_to:
        raise InvalidRange(f"from {date_from} is after to {date_to}")
    wanted = _check_emotions(emotions)
    series = store.load(scope)
    out = []
    for p in series.points:
        if date_from <= p.date <= date_to:
            out.append(
                {
                    "date": p.date.isoformat(),
                    "total": p.total,
                    "counts": {e: p.counts[EMOTIONS.index(e)] for e in wanted},
                    "pct": {e: p.pct[EMOTIONS.index(e)] for e in wanted},
                }
            )
    return out


def canonical_json(obj) -> str:
    """The one JSON encoding used on every wire and CLI surface."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def render_series_json(projections: Sequence[dict]) -> str:
    return canonical_json(list(projections))


def render_series_csv(projections: Sequence[dict], emotions: Sequence[str]) -> str:
    """Projected query result as CSV (only the requested emotion columns)."""
    wanted = _check_emotions(emotions)
    lines = [
        ",".join(["date", "total"] + wanted + [f"{e}_pct" for e in wanted])
    ]
    for p in projections:
        cells = [p["date"], str(p["total"])]
        cells += [str(p["counts"][e]) for e in wanted]
        cells += [_format_pct(p["pct"][e]) for e in wanted]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
