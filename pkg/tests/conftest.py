"""Shared fixtures: demo lexicon/vocab/keywords, tweet builders, corpus stores."""

import json
from pathlib import Path

import pytest

from emomon import ingest, labeling, textprep

DATA_DIR = Path(__file__).parent / "data"
SALT = b"test-salt"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def demo_lexicon():
    return labeling.load_lexicon(DATA_DIR / "lexicon_demo.csv")


@pytest.fixture(scope="session")
def demo_vocab():
    return textprep.load_vocab(DATA_DIR / "vocab_demo.txt")


@pytest.fixture(scope="session")
def demo_keywords():
    return ingest.load_keywords(DATA_DIR / "keywords_demo.txt")


def tweet_line(
    tweet_id: str,
    text: str,
    created: str = "2020-08-09T14:00:00Z",
    user: str = "ana",
    scope: str = "medellin",
    lang: str | None = None,
    **extra,
) -> str:
    """One ndjson input record in the ingestion format."""
    doc = {"id": tweet_id, "created_at": created, "text": text, "user": user, "scope": scope}
    if lang is not None:
        doc["lang"] = lang
    doc.update(extra)
    return json.dumps(doc, ensure_ascii=False)


# a small on-topic corpus: every text contains a tracked keyword and at
# least one demo-lexicon term, spread over two scopes and three UTC-5 days
CORPUS_LINES = [
    tweet_line("t01", "¡Qué alegría! fin de la cuarentena", created="2020-08-09T14:00:00Z"),
    tweet_line("t02", "El virus me da miedo", created="2020-08-09T16:30:00Z", user="ben"),
    tweet_line("t03", "Tristeza total por la cuarentena", created="2020-08-10T01:00:00Z"),
    tweet_line("t04", "la vacuna es una buena noticia", created="2020-08-10T12:00:00Z", user="eva"),
    tweet_line("t05", "rabia y asco por el contagio", created="2020-08-11T03:00:00Z"),
    tweet_line("t06", "sorpresa: la pandemia sigue", created="2020-08-11T09:00:00Z", user="ben"),
    tweet_line("t07", "el virus avanza sin pausa", created="2020-08-11T10:00:00Z"),
    tweet_line("t08", "miedo al covid en otra ciudad", created="2020-08-09T15:00:00Z", scope="bogota"),
]


@pytest.fixture
def corpus_store(tmp_path, demo_keywords):
    """A populated corpus store over CORPUS_LINES."""
    store = ingest.CorpusStore(tmp_path / "corpus")
    report = ingest.ingest_corpus(CORPUS_LINES, demo_keywords, store, SALT)
    assert report.accepted == len(CORPUS_LINES)
    return store
