"""Classifier backends behind one score contract.

Every backend produces six scores in [0, 1] in the canonical emotion order:
the lexicon rule (binary scores), the native linear model over sentence
embeddings, and an external model server reached over HTTP. Thresholding
turns scores into labels.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import requests

from .errors import (
    BackendUnreachable,
    DimensionMismatch,
    MissingEmbedding,
    ProtocolViolation,
)
from .labeling import EMOTIONS, EmotionLabels, Lexicon, N_EMOTIONS

logger = logging.getLogger(__name__)

EmotionScores = list[float]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # clipping at |z| = 60 keeps exp() in range without losing precision
    # anywhere the result is distinguishable from 0 or 1
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def classify_lexicon(words: Sequence[str], lexicon: Lexicon) -> EmotionScores:
    """Score 1.0 for every emotion with at least one lexicon match, else 0.0."""
    spans = lexicon.matcher.match(words)
    return [1.0 if spans[e] else 0.0 for e in EMOTIONS]


@dataclass
class LinearModel:
    """One-vs-rest logistic classifier: six independent sigmoid outputs."""

    weights: np.ndarray  # (6, D)
    bias: np.ndarray  # (6,)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != N_EMOTIONS:
            raise ValueError(f"weights must be ({N_EMOTIONS}, D), got {self.weights.shape}")
        if self.bias.shape != (N_EMOTIONS,):
            raise ValueError(f"bias must be ({N_EMOTIONS},), got {self.bias.shape}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("model parameters must be finite")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, dim: int) -> "LinearModel":
        return cls(weights=np.zeros((N_EMOTIONS, dim)), bias=np.zeros(N_EMOTIONS))


def classify_linear(model: LinearModel, v: Sequence[float] | np.ndarray) -> EmotionScores:
    """sigmoid(W v + b) per class."""
    vec = np.asarray(v, dtype=np.float64)
    if vec.shape != (model.dim,):
        raise DimensionMismatch(f"expected vector of dim {model.dim}, got shape {vec.shape}")
    return _sigmoid(model.weights @ vec + model.bias).tolist()


def scores_matrix(model: LinearModel, vectors: np.ndarray) -> np.ndarray:
    """Vectorized scores for a (N, D) batch; rows follow input order."""
    if vectors.ndim != 2 or vectors.shape[1] != model.dim:
        raise DimensionMismatch(f"expected (N, {model.dim}) vectors, got {vectors.shape}")
    return _sigmoid(vectors @ model.weights.T + model.bias)


def save_checkpoint(model: LinearModel, epoch: int, path: str | Path) -> None:
    """Write the JSON checkpoint: {"dim": D, "weights": [[...]], "bias": [...], "epoch": k}."""
    payload = {
        "dim": model.dim,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "epoch": epoch,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> tuple[LinearModel, int]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    model = LinearModel(weights=np.asarray(obj["weights"]), bias=np.asarray(obj["bias"]))
    if model.dim != obj["dim"]:
        raise ValueError(f"checkpoint {path} declares dim {obj['dim']} but weights have {model.dim}")
    return model, int(obj["epoch"])


def load_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    """Read an embeddings ndjson file ({"tweet_id": ..., "v": [...]}) keyed by id.

    All records must share one dimension and be finite.
    """
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            vec = np.asarray(obj["v"], dtype=np.float64)
            if dim is None:
                dim = vec.shape[0]
            if vec.shape != (dim,):
                raise ValueError(f"{path}:{lineno}: embedding dim {vec.shape} != {dim}")
            if not np.isfinite(vec).all():
                raise ValueError(f"{path}:{lineno}: non-finite embedding component")
            vectors[str(obj["tweet_id"])] = vec
    return vectors


def lookup_embedding(embeddings: dict[str, np.ndarray], tweet_id: str) -> np.ndarray:
    try:
        return embeddings[tweet_id]
    except KeyError:
        raise MissingEmbedding(f"no embedding for tweet {tweet_id!r}") from None


@dataclass
class ExternalBackendConfig:
    """Address and batching for the external inference server."""

    endpoint: str  # base URL, e.g. http://host:port
    timeout_ms: int = 10_000
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")


def _validate_scores_row(row, n_expected: int = N_EMOTIONS) -> EmotionScores:
    if not isinstance(row, list) or len(row) != n_expected:
        raise ProtocolViolation(f"score row must hold {n_expected} values, got {row!r}")
    out = []
    for value in row:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ProtocolViolation(f"non-numeric score {value!r}")
        value = float(value)
        if not math.isfinite(value) or not (0.0 <= value <= 1.0):
            raise ProtocolViolation(f"score {value!r} outside [0, 1]")
        out.append(value)
    return out


def classify_external(
    cfg: ExternalBackendConfig, texts: Sequence[str], retries: int = 0
) -> list[EmotionScores]:
    """Classify texts via the wire protocol, batched, order preserved.

    POST <endpoint>/classify with {"texts": [...]} and expect
    {"scores": [[6 floats], ...]} row-aligned with the request. ``retries``
    extra attempts are made per batch on connect/timeout failures
    (the monitoring path passes 1, evaluation stays fail-fast with 0).
    """
    url = cfg.endpoint.rstrip("/") + "/classify"
    timeout = cfg.timeout_ms / 1000.0
    results: list[EmotionScores] = []
    session = requests.Session()
    for start in range(0, len(texts), cfg.batch_size):
        batch = list(texts[start : start + cfg.batch_size])
        for attempt in range(retries + 1):
            try:
                response = session.post(url, json={"texts": batch}, timeout=timeout)
                break
            except (requests.ConnectionError, requests.Timeout) as exc:
                if attempt == retries:
                    raise BackendUnreachable(f"cannot reach {url}: {exc}") from exc
                logger.warning("retrying batch after connection failure: %s", exc)
        if response.status_code != 200:
            raise ProtocolViolation(f"server answered {response.status_code} for {url}")
        try:
            body = response.json()
        except ValueError as exc:
            raise ProtocolViolation(f"response body is not JSON: {exc}") from exc
        rows = body.get("scores") if isinstance(body, dict) else None
        if not isinstance(rows, list) or len(rows) != len(batch):
            raise ProtocolViolation(
                f"expected {len(batch)} score rows, got "
                f"{len(rows) if isinstance(rows, list) else body!r}"
            )
        results.extend(_validate_scores_row(row) for row in rows)
    return results


def threshold(scores: Sequence[float], tau: float = 0.5) -> EmotionLabels:
    """Label class c iff scores[c] >= tau (inclusive)."""
    if not (0.0 < tau < 1.0):
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    if len(scores) != N_EMOTIONS:
        raise ValueError(f"expected {N_EMOTIONS} scores, got {len(scores)}")
    return tuple(float(s) >= tau for s in scores)
