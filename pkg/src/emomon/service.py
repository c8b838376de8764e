"""HTTP JSON API over the classifier and the series store.

Read-only service: all state is loaded at startup (lexicon, config) or read
from the store on demand; nothing under the store directory is ever written.
Response bodies go through the same canonical JSON encoder as the offline
CLI so identical queries produce byte-identical bytes on either surface.

Endpoints:
    GET  /v1/health    -> {"status": "ok", "backend": ..., "store": ...}
    POST /v1/classify  {"text": ...} -> {"scores": [...], "labels": [...]}
    GET  /v1/series?scope=&emotions=&from=&to=
    GET  /v1/emotions  -> the six canonical emotion names
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path

from fastapi import FastAPI, Request, Response

from .classify import ExternalBackendConfig, classify_external, classify_lexicon, threshold
from .errors import (
    BackendUnreachable,
    ConfigError,
    InvalidRange,
    ProtocolViolation,
    UnknownScope,
)
from .labeling import EMOTIONS, Lexicon, label_names, load_lexicon
from .monitor import BackendSpec, SeriesStore, canonical_json, parse_backend_spec, series_query
from .textprep import normalize, split_words

logger = logging.getLogger(__name__)

ENV_PREFIX = "EMOMON_"


@dataclass
class ServiceConfig:
    store_dir: str
    backend: str = "lexicon"
    lexicon_path: str | None = None
    tau: float = 0.5
    host: str = "127.0.0.1"
    port: int = 8080
    max_text_bytes: int = 8192

    def __post_init__(self) -> None:
        if not (0.0 < self.tau < 1.0):
            raise ConfigError(f"tau must be in (0, 1), got {self.tau}")
        if self.max_text_bytes < 1:
            raise ConfigError("max_text_bytes must be >= 1")
        if not Path(self.store_dir).is_dir():
            raise ConfigError(f"store directory {self.store_dir!r} does not exist")
        spec = parse_backend_spec(self.backend)
        if spec.kind == "model":
            raise ConfigError(
                "the service cannot classify ad-hoc text with a model checkpoint: "
                "embeddings are keyed by tweet id; use lexicon or server:<url>"
            )
        if spec.kind == "lexicon" and self.lexicon_path is None:
            raise ConfigError("lexicon backend requires lexicon_path")


_FIELD_TYPES = {f.name: f.type for f in fields(ServiceConfig)}


def _coerce(name: str, raw: str):
    if name in ("port", "max_text_bytes"):
        return int(raw)
    if name == "tau":
        return float(raw)
    return raw


def load_config(path: str | Path | None = None, env: dict | None = None) -> ServiceConfig:
    """Build the config from a flat JSON document plus EMOMON_* overrides."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a flat JSON object")
        for key, value in doc.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
    env = os.environ if env is None else env
    for name in _FIELD_TYPES:
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is not None:
            try:
                values[name] = _coerce(name, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {ENV_PREFIX}{name.upper()}: {raw!r}") from exc
    if "store_dir" not in values:
        raise ConfigError("store_dir is required (config file or EMOMON_STORE_DIR)")
    try:
        return ServiceConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _json_response(obj, status_code: int = 200) -> Response:
    return Response(
        content=canonical_json(obj),
        status_code=status_code,
        media_type="application/json",
    )


def _error(status_code: int, message: str) -> Response:
    return _json_response({"error": message}, status_code)


def create_app(config: ServiceConfig) -> FastAPI:
    spec = parse_backend_spec(config.backend)
    lexicon: Lexicon | None = None
    if spec.kind == "lexicon":
        lexicon = load_lexicon(config.lexicon_path)
    store = SeriesStore(config.store_dir)

    app = FastAPI(title="emomon", docs_url=None, redoc_url=None, openapi_url=None)

    def _probe_backend() -> str | None:
        """None when healthy, otherwise a short failure description."""
        if spec.kind == "server":
            try:
                classify_external(ExternalBackendConfig(endpoint=spec.arg), ["ok"])
            except (BackendUnreachable, ProtocolViolation) as exc:
                return str(exc)
        return None

    def _score_text(text: str) -> list[float]:
        words = split_words(normalize(text))
        if spec.kind == "lexicon":
            return classify_lexicon(words, lexicon)
        return classify_external(
            ExternalBackendConfig(endpoint=spec.arg), [" ".join(words)]
        )[0]

    @app.get("/v1/health")
    def health() -> Response:
        if not Path(config.store_dir).is_dir():
            return _json_response(
                {"status": "unhealthy", "failing": "store"}, status_code=503
            )
        failure = _probe_backend()
        if failure is not None:
            return _json_response(
                {"status": "unhealthy", "failing": "backend", "detail": failure},
                status_code=503,
            )
        return _json_response(
            {"status": "ok", "backend": str(spec), "store": config.store_dir}
        )

    @app.post("/v1/classify")
    async def classify(request: Request) -> Response:
        body = await request.body()
        if len(body) > config.max_text_bytes:
            return _error(400, f"request body exceeds {config.max_text_bytes} bytes")
        try:
            doc = json.loads(body)
        except (ValueError, UnicodeDecodeError):
            return _error(400, "request body must be a JSON object")
        if not isinstance(doc, dict) or not isinstance(doc.get("text"), str):
            return _error(400, 'expected {"text": "..."}')
        text = doc["text"]
        if not text.strip():
            return _error(400, "text must be non-empty")
        try:
            scores = _score_text(text)
        except BackendUnreachable as exc:
            return _error(502, str(exc))
        except Exception:  # anything else is an internal failure, not a client error
            logger.exception("classification failed")
            return _error(500, "internal failure")
        labels = label_names(threshold(scores, config.tau))
        return _json_response({"scores": scores, "labels": labels})

    # 'from' is a Python keyword, so the handler reads the raw query
    # parameters instead of declaring them in its signature.
    @app.get("/v1/series")
    def series(request: Request) -> Response:
        params = request.query_params
        scope = params.get("scope")
        if not scope:
            return _error(400, "scope is required")
        raw_emotions = params.get("emotions")
        if raw_emotions is None:
            emotions = list(EMOTIONS)
        else:
            emotions = [e for e in raw_emotions.split(",") if e]
        try:
            date_from = dt.date.fromisoformat(params.get("from", ""))
            date_to = dt.date.fromisoformat(params.get("to", ""))
        except ValueError:
            return _error(400, "from and to must be ISO dates (YYYY-MM-DD)")
        try:
            projections = series_query(store, scope, emotions, date_from, date_to)
        except UnknownScope as exc:
            return _error(404, str(exc))
        except (InvalidRange, ValueError) as exc:
            return _error(400, str(exc))
        return _json_response(projections)

    @app.get("/v1/emotions")
    def emotions() -> Response:
        return _json_response(list(EMOTIONS))

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service under uvicorn until interrupted."""
    import uvicorn

    logger.info("serving on %s:%d (backend=%s)", config.host, config.port, config.backend)
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
