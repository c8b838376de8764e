"""Command line entry point.

One executable, seven subcommands covering the pipeline end to end:
ingest raw tweets into the corpus store, train the linear baseline,
evaluate a backend against gold labels, aggregate a labeled corpus into
daily series, query those series, build the gold file from survey exports,
and serve the HTTP API. Paths that produce reports also render matplotlib
figures next to their CSV/JSON outputs unless --no-figures is given.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import os
import sys
from pathlib import Path

from . import annotate, ingest, labeling, metrics, monitor
from . import train as train_mod
from .classify import ExternalBackendConfig, load_checkpoint, load_embeddings
from .errors import ConfigError, EmomonError
from .service import load_config, serve

logger = logging.getLogger(__name__)


def cmd_ingest(args: argparse.Namespace) -> int:
    salt = os.environ.get(args.salt_env)
    if not salt:
        raise ConfigError(f"environment variable {args.salt_env} is not set")
    keywords = ingest.load_keywords(args.keywords)
    store = ingest.CorpusStore(args.store)
    if args.input == "-":
        report = ingest.ingest_corpus(sys.stdin, keywords, store, salt.encode("utf-8"))
    else:
        with open(args.input, "r", encoding="utf-8") as fh:
            report = ingest.ingest_corpus(fh, keywords, store, salt.encode("utf-8"))
    print(
        f"read={report.read} accepted={report.accepted} "
        f"rejected_parse={report.rejected_parse} rejected_filter={report.rejected_filter} "
        f"duplicates={report.duplicates}"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    dataset = labeling.load_dataset(args.dataset)
    embeddings = load_embeddings(args.embeddings)
    gold = metrics.load_gold_csv(args.eval)
    eval_gold = [(row.tweet_id, row.labels) for row in gold]
    cfg = train_mod.TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed
    )
    result = train_mod.train(dataset, embeddings, eval_gold, cfg, args.out)
    if not args.no_figures:
        from . import figures

        figures.plot_training_log(result.log_rows, Path(args.out) / "training_log.png")
    print(
        f"best epoch {result.best_epoch} of {cfg.epochs} "
        f"(eval mAP {result.best_map:.4f}) -> {result.best_path}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    gold = metrics.load_gold_csv(args.gold)
    lexicon = labeling.load_lexicon(args.lexicon)
    external = model = embeddings = None
    if args.experiment in (1, 3):
        if not args.server:
            raise ConfigError(f"experiment {args.experiment} requires --server")
        external = ExternalBackendConfig(endpoint=args.server)
        backend = f"server:{args.server}"
    elif args.experiment == 2:
        backend = "lexicon"
    else:
        if not args.model or not args.embeddings:
            raise ConfigError("experiment 4 requires --model and --embeddings")
        model, _ = load_checkpoint(args.model)
        embeddings = load_embeddings(args.embeddings)
        backend = f"model:{args.model}"
    report = metrics.run_experiment(
        args.experiment, gold, lexicon, tau=args.tau,
        external=external, model=model, embeddings=embeddings,
    )
    metrics.write_report_json(
        report, args.out, tau=args.tau, backend=backend, lexicon_checksum=lexicon.checksum()
    )
    if not args.no_figures:
        from . import figures

        figures.plot_report(report, Path(args.out).with_suffix(".png"))
    print(
        f"experiment {report.experiment_id}: map={report.map:.4f} "
        f"hamming={report.hamming:.4f} macro_f1={report.macro_f1:.4f} n={report.n}"
    )
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    spec = monitor.parse_backend_spec(args.classifier)
    lexicon = embeddings = None
    if spec.kind == "lexicon":
        if not args.lexicon:
            raise ConfigError("classifier 'lexicon' requires --lexicon")
        lexicon = labeling.load_lexicon(args.lexicon)
    elif spec.kind == "model":
        if not args.embeddings:
            raise ConfigError("classifier 'model:...' requires --embeddings")
        embeddings = load_embeddings(args.embeddings)
    store = ingest.CorpusStore(args.store)
    tweets = list(store.iter_tweets(args.scope))
    labeled = monitor.label_tweets(
        tweets, spec, lexicon=lexicon, embeddings=embeddings, tau=args.tau
    )
    series = monitor.aggregate_daily(labeled, args.scope)
    monitor.write_series_store(args.out, [series], classifier=str(spec), tau=args.tau)
    if not args.no_figures:
        from . import figures

        figures.plot_series(series, Path(args.out) / "series" / f"{args.scope}.png")
    print(
        f"scope {args.scope}: {len(series.points)} days, "
        f"{sum(p.total for p in series.points)} tweets -> {args.out}"
    )
    return 0


def cmd_series(args: argparse.Namespace) -> int:
    store = monitor.SeriesStore(args.store)
    if args.emotions is None:
        emotions = list(labeling.EMOTIONS)
    else:
        emotions = [e for e in args.emotions.split(",") if e]
    try:
        projections = monitor.series_query(
            store, args.scope, emotions, args.date_from, args.date_to
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.format == "json":
        sys.stdout.write(monitor.render_series_json(projections) + "\n")
    else:
        sys.stdout.write(monitor.render_series_csv(projections, emotions))
    return 0


def cmd_gold(args: argparse.Namespace) -> int:
    records = annotate.validate_survey_export(args.survey)
    if Path(args.texts).is_dir():
        texts = annotate.texts_from_store(ingest.CorpusStore(args.texts))
    else:
        texts = annotate.texts_from_csv(args.texts)
    count = annotate.emit_gold(records, texts, args.out, min_agreement=args.min_agreement)
    print(f"wrote {count} gold rows -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    serve(load_config(args.config))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emomon",
        description="Tweet emotion monitor: ingest, weak-label, train, evaluate, serve.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="filter and store raw tweet records")
    p.add_argument("--input", required=True, help="ndjson file, or - for stdin")
    p.add_argument("--keywords", required=True, help="keyword file, one word per line")
    p.add_argument("--store", required=True, help="corpus store directory")
    p.add_argument("--salt-env", required=True,
                   help="name of the environment variable holding the pseudonym salt")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train the linear baseline on a weak-labeled dataset")
    p.add_argument("--dataset", required=True, help="training set ndjson")
    p.add_argument("--embeddings", required=True, help="per-tweet embedding ndjson")
    p.add_argument("--eval", required=True, help="gold validation CSV")
    p.add_argument("--out", required=True, help="output directory for checkpoints and logs")
    p.add_argument("--lr", type=float, default=3e-5)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run one validation experiment")
    p.add_argument("--experiment", type=int, choices=metrics.EXPERIMENT_IDS, required=True)
    p.add_argument("--gold", required=True, help="gold validation CSV")
    p.add_argument("--lexicon", required=True, help="lexicon CSV")
    p.add_argument("--server", help="inference server URL (experiments 1 and 3)")
    p.add_argument("--model", help="model checkpoint JSON (experiment 4)")
    p.add_argument("--embeddings", help="embedding ndjson (experiment 4)")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("aggregate", help="label a stored corpus and build daily series")
    p.add_argument("--store", required=True, help="corpus store directory")
    p.add_argument("--scope", required=True)
    p.add_argument("--classifier", required=True,
                   help="lexicon | model:<checkpoint> | server:<url>")
    p.add_argument("--lexicon", help="lexicon CSV (lexicon classifier)")
    p.add_argument("--embeddings", help="embedding ndjson (model classifier)")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--out", required=True, help="series store directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("series", help="query a series store")
    p.add_argument("--store", required=True, help="series store directory")
    p.add_argument("--scope", required=True)
    p.add_argument("--from", dest="date_from", type=dt.date.fromisoformat, required=True)
    p.add_argument("--to", dest="date_to", type=dt.date.fromisoformat, required=True)
    p.add_argument("--emotions", help="comma-separated subset; default all six")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("gold", help="turn survey annotations into the gold validation CSV")
    p.add_argument("--survey", required=True, help="survey export CSV")
    p.add_argument("--texts", required=True, help="corpus store directory or tweet_id,text CSV")
    p.add_argument("--min-agreement", type=int, default=2)
    p.add_argument("--out", required=True, help="gold CSV path")
    p.set_defaults(func=cmd_gold)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--config", help="flat JSON config file; EMOMON_* variables override")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except EmomonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
