"""Corpus ingestion: parse, pseudonymize, filter, deduplicate, persist.

The corpus store is a directory of partition files
``raw/<scope>/<yyyy-mm-dd>.ndjson`` (UTC calendar day of ``created_at``)
plus a ``manifest.json`` holding per-partition counts and a sorted id index.
Persisted records never contain the original author handle; only the salted
keyed hash survives ingestion.
"""

from __future__ import annotations

import hmac
import hashlib
import json
import logging
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from . import textprep
from .errors import EmptyText, MalformedRecord, StoreUnavailable

logger = logging.getLogger(__name__)

AUTHOR_KEY_HEX_CHARS = 16

# scope becomes a path component of the store; keep it to a safe charset
_SCOPE_RE = re.compile(r"^[A-Za-z0-9_@][A-Za-z0-9_@.\-]*$")


@dataclass(frozen=True)
class RawTweet:
    id: str
    created_at: datetime  # tz-aware UTC, seconds precision
    text: str
    author_key: str
    scope: str
    lang: str | None = None


@dataclass
class IngestReport:
    read: int = 0
    accepted: int = 0
    rejected_parse: int = 0
    rejected_filter: int = 0
    duplicates: int = 0


def pseudonymize(handle: str, salt: bytes) -> str:
    """Keyed SHA-256 of the handle, first 16 hex chars.

    Stable for a fixed salt; the salt lives in configuration and is never
    persisted next to the data.
    """
    return hmac.new(salt, handle.encode("utf-8"), hashlib.sha256).hexdigest()[:AUTHOR_KEY_HEX_CHARS]


def _parse_created_at(value: str) -> datetime:
    try:
        dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError as exc:
        raise MalformedRecord(f"bad created_at {value!r}") from exc
    if dt.tzinfo is None:
        raise MalformedRecord(f"created_at {value!r} has no UTC offset")
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_created_at(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_tweet_record(line: str, salt: bytes) -> RawTweet:
    """Parse one newline-delimited input record into a validated RawTweet.

    Required fields: id, created_at (RFC-3339 with offset), text, user,
    scope; optional lang. Unknown fields are ignored. The author handle is
    replaced by its pseudonym and never stored.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not an object")

    for name in ("id", "created_at", "text", "user", "scope"):
        if name not in obj:
            raise MalformedRecord(f"missing field {name!r}")
        if not isinstance(obj[name], str):
            raise MalformedRecord(f"field {name!r} is not a string")

    tweet_id = obj["id"].strip()
    if not tweet_id:
        raise MalformedRecord("empty id")
    scope = obj["scope"].strip()
    if not _SCOPE_RE.match(scope):
        raise MalformedRecord(f"unsafe scope {obj['scope']!r}")
    lang = obj.get("lang")
    if lang is not None and not isinstance(lang, str):
        raise MalformedRecord("field 'lang' is not a string")

    text = obj["text"]
    if not text.strip():
        raise EmptyText(f"tweet {tweet_id} has blank text")

    return RawTweet(
        id=tweet_id,
        created_at=_parse_created_at(obj["created_at"]),
        text=text,
        author_key=pseudonymize(obj["user"], salt),
        scope=scope,
        lang=lang.lower() if lang else None,
    )


def normalize_keywords(terms: Iterable[str]) -> tuple[str, ...]:
    """Normalize, validate and dedupe outbreak keywords (single words only)."""
    out: list[str] = []
    seen: set[str] = set()
    for raw in terms:
        norm = textprep.normalize(raw)
        if not norm:
            continue
        if " " in norm:
            raise ValueError(f"keyword {raw!r} is not a single word")
        if norm not in seen:
            seen.add(norm)
            out.append(norm)
    if not out:
        raise ValueError("keyword list is empty")
    return tuple(out)


def load_keywords(path: str | Path) -> tuple[str, ...]:
    """Read a keyword file: UTF-8, one keyword per line, '#' comments allowed."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    return normalize_keywords(lines)


def filter_by_keywords(tweet: RawTweet, keywords: Iterable[str]) -> bool:
    """True iff any normalized word token of the text equals a keyword.

    Matching is token-exact, not substring: 'anticoronavirus' does not match
    'coronavirus'.
    """
    keyword_set = keywords if isinstance(keywords, (set, frozenset)) else frozenset(keywords)
    words = textprep.split_words(textprep.normalize(tweet.text))
    return any(w in keyword_set for w in words)


def _tweet_to_json(tweet: RawTweet) -> str:
    obj = {
        "id": tweet.id,
        "created_at": format_created_at(tweet.created_at),
        "text": tweet.text,
        "author_key": tweet.author_key,
        "scope": tweet.scope,
    }
    if tweet.lang is not None:
        obj["lang"] = tweet.lang
    return json.dumps(obj, ensure_ascii=False)


def _tweet_from_json(line: str) -> RawTweet:
    obj = json.loads(line)
    return RawTweet(
        id=obj["id"],
        created_at=_parse_created_at(obj["created_at"]),
        text=obj["text"],
        author_key=obj["author_key"],
        scope=obj["scope"],
        lang=obj.get("lang"),
    )


class CorpusStore:
    """Partitioned ndjson store, single-writer / multiple-reader.

    The manifest is the id index; readers never scan partition files to
    answer membership questions.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreUnavailable(f"cannot create store at {self.root}: {exc}") from exc

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def _load_manifest(self) -> dict:
        if not self.manifest_path.exists():
            return {"partitions": {}}
        try:
            with open(self.manifest_path, encoding="utf-8") as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreUnavailable(f"cannot read manifest: {exc}") from exc

    def known_ids(self) -> set[str]:
        manifest = self._load_manifest()
        ids: set[str] = set()
        for entry in manifest["partitions"].values():
            ids.update(entry["ids"])
        return ids

    def scopes(self) -> list[str]:
        manifest = self._load_manifest()
        return sorted({key.split("/", 1)[0] for key in manifest["partitions"]})

    @staticmethod
    def _partition_key(tweet: RawTweet) -> str:
        return f"{tweet.scope}/{tweet.created_at.strftime('%Y-%m-%d')}"

    def append(self, tweets: Iterable[RawTweet]) -> int:
        """Append records and update the manifest. Caller is the single writer."""
        manifest = self._load_manifest()
        partitions = manifest["partitions"]
        written = 0
        by_partition: dict[str, list[RawTweet]] = {}
        for tweet in tweets:
            by_partition.setdefault(self._partition_key(tweet), []).append(tweet)
        try:
            for key in sorted(by_partition):
                path = self.root / "raw" / f"{key}.ndjson"
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "a", encoding="utf-8") as fh:
                    for tweet in by_partition[key]:
                        fh.write(_tweet_to_json(tweet) + "\n")
                        written += 1
                entry = partitions.setdefault(key, {"count": 0, "ids": []})
                entry["count"] += len(by_partition[key])
                entry["ids"] = sorted(set(entry["ids"]) | {t.id for t in by_partition[key]})
            with open(self.manifest_path, "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise StoreUnavailable(f"cannot write to store at {self.root}: {exc}") from exc
        return written

    def iter_tweets(self, scope: str | None = None) -> Iterator[RawTweet]:
        """Yield stored tweets in deterministic partition order."""
        manifest = self._load_manifest()
        for key in sorted(manifest["partitions"]):
            if scope is not None and key.split("/", 1)[0] != scope:
                continue
            path = self.root / "raw" / f"{key}.ndjson"
            try:
                with open(path, encoding="utf-8") as fh:
                    for line in fh:
                        if line.strip():
                            yield _tweet_from_json(line)
            except OSError as exc:
                raise StoreUnavailable(f"cannot read partition {key}: {exc}") from exc


def ingest_corpus(
    source: Iterable[str],
    keywords: Iterable[str],
    store: CorpusStore,
    salt: bytes,
) -> IngestReport:
    """Ingest newline-delimited records into the store.

    Per-record failures are counted, never raised: unparseable or blank-text
    records count as rejected_parse; off-topic records and records with a
    non-Spanish ``lang`` count as rejected_filter; already-stored ids count
    as duplicates. Re-running on the same source accepts zero records, which
    makes the operation idempotent. Blank source lines are skipped silently.
    """
    keyword_set = frozenset(normalize_keywords(keywords))
    report = IngestReport()
    seen_ids = store.known_ids()
    accepted: list[RawTweet] = []

    for line in source:
        if not line.strip():
            continue
        report.read += 1
        try:
            tweet = parse_tweet_record(line, salt)
        except (MalformedRecord, EmptyText):
            report.rejected_parse += 1
            continue
        if tweet.lang is not None and tweet.lang != "es":
            report.rejected_filter += 1
            continue
        if not filter_by_keywords(tweet, keyword_set):
            report.rejected_filter += 1
            continue
        if tweet.id in seen_ids:
            report.duplicates += 1
            continue
        seen_ids.add(tweet.id)
        accepted.append(tweet)
        report.accepted += 1

    if accepted:
        store.append(accepted)
    logger.info(
        "ingest: read=%d accepted=%d rejected_parse=%d rejected_filter=%d duplicates=%d",
        report.read, report.accepted, report.rejected_parse, report.rejected_filter,
        report.duplicates,
    )
    return report
