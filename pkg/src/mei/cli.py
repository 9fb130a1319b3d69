"""Command-line entry point: ``mei <subcommand>``.

Data goes to stdout (or ``--out``); diagnostics go to stderr. Exit status is
0 on success, 1 on data errors and 2 on usage errors.

Every subcommand accepts ``--config FILE``, a flat ``key = value`` file whose
keys are the long option names of that subcommand (dashes or underscores).
Command-line flags override the file.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analysis, assign, derive, id_engine, metrics
from .corpus import CorpusError, Span, document_from_json, load_corpus, parse_conll
from .derive import MeiDocument, mei_from_json, mei_to_json
from .llm.client import ClientError

log = logging.getLogger("mei")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# config files

def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(action: argparse.Action, key: str, value: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        low = value.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")
        flag = low in ("true", "1", "yes")
        return flag if isinstance(action, argparse._StoreTrueAction) else not flag
    if isinstance(action, argparse._AppendAction):
        return [v.strip() for v in value.split(",") if v.strip()]
    try:
        result = action.type(value) if action.type else value
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config key {key!r}: bad value {value!r}") from exc
    if action.choices is not None and result not in action.choices:
        raise UsageError(f"config key {key!r} must be one of {sorted(action.choices)}")
    return result


def apply_config(sub: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions if a.option_strings and a.dest not in ("help", "config")}
    unknown = sorted(set(values) - set(actions))
    if unknown:
        raise UsageError("unknown config keys: " + ", ".join(unknown))
    sub.set_defaults(**{k: _coerce(actions[k], k, v) for k, v in values.items()})


# ---------------------------------------------------------------------------
# I/O helpers

def _lines(path: str):
    if path == "-":
        yield from enumerate(sys.stdin, start=1)
        return
    try:
        with open(path, encoding="utf-8") as fh:
            yield from enumerate(fh, start=1)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None


def _records(path: str):
    for n, line in _lines(path):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{n}: invalid JSON ({exc.msg})") from exc


def read_mei(path: str) -> list[MeiDocument]:
    docs = [mei_from_json(obj) for obj in _records(path)]
    if not docs:
        raise UsageError(f"{path}: empty corpus")
    return docs


def read_annotated(path: str, fmt: str):
    if fmt == "conll":
        if path == "-":
            docs = parse_conll(sys.stdin.read())
        else:
            if not Path(path).exists():
                raise DataError(f"no such file: {path}")
            docs = load_corpus(path, "conll")
    else:
        docs = [document_from_json(obj) for obj in _records(path)]
    return docs


def read_pred(path: str) -> list[metrics.PredictionSet]:
    try:
        return [metrics.prediction_from_json(obj) for obj in _records(path)]
    except metrics.DuplicateSpan as exc:
        raise DataError(str(exc)) from exc


def emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def jsonl(records) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def predictions_text(preds) -> str:
    return jsonl(metrics.prediction_to_json(p) for p in preds)


def _warn(messages) -> None:
    for m in messages:
        print(f"warning: {m}", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands

def _parse_overrides(items) -> dict[str, dict[int, str]]:
    out: dict[str, dict[int, str]] = {}
    for item in items or []:
        head, sep, phrase = item.partition("=")
        doc_id, sep2, rank = head.rpartition(":")
        if not sep or not sep2 or not rank.isdigit() or not phrase:
            raise UsageError(f"--phrase expects DOC_ID:RANK=PHRASE, got {item!r}")
        out.setdefault(doc_id, {})[int(rank)] = phrase
    return out


def cmd_derive(args) -> int:
    overrides = _parse_overrides(args.phrase)
    corpus = []
    for path in args.inputs:
        corpus.extend(read_annotated(path, args.format))
    if not corpus:
        raise UsageError("empty corpus")
    out = []
    for doc in corpus:
        try:
            out.append(derive.select_major_entities(doc, args.k, args.min_count, overrides.get(doc.doc_id)))
        except derive.NoQualifyingEntities as exc:
            _warn([f"{exc}; document skipped"])
    if args.stats:
        stats = derive.dataset_stats(out, args.distance_unit).as_dict()
        emit(json.dumps(stats, indent=2) + "\n", args.out)
    else:
        emit(jsonl(mei_to_json(d) for d in out), args.out)
    return EXIT_OK


def _report_text(report: metrics.Report, fmt: str) -> str:
    return report.to_tsv() if fmt == "tsv" else json.dumps(report.to_json(), indent=2) + "\n"


def cmd_evaluate(args) -> int:
    golds = read_mei(args.gold)
    preds = read_pred(args.pred) if args.pred else [metrics.gold_as_prediction(g) for g in golds]
    try:
        pairs = metrics.pair_corpus(golds, preds)
        for g, p in pairs:
            metrics.check_labels(g, p)
    except (ValueError, metrics.UnknownEntity) as exc:
        raise DataError(str(exc).strip("'\"")) from exc
    report = metrics.evaluate(pairs)
    emit(_report_text(report, args.report_format), args.out)
    if args.figure:
        from .plotting import plot_entity_f1
        plot_entity_f1(report, args.figure)
    return EXIT_OK


def cmd_map(args) -> int:
    golds = read_mei(args.gold)
    systems = {d.doc_id: d for d in read_annotated(args.clusters, args.format)}
    provider = assign.HashEmbeddingProvider(args.dim) if args.mode == "cosine" else None
    preds = []
    for g in golds:
        sys_doc = systems.get(g.doc_id)
        if sys_doc is None:
            _warn([f"{g.doc_id}: no system clusters; empty prediction"])
            preds.append(metrics.PredictionSet(g.doc_id))
            continue
        if tuple(sys_doc.tokens) != tuple(g.tokens):
            raise DataError(f"{g.doc_id}: system clusters were produced on different tokens")
        preds.append(assign.map_clusters(g, sys_doc.clusters, args.mode, provider))
    emit(predictions_text(preds), args.out)
    return EXIT_OK


def _read_candidates(path: str) -> dict[str, list]:
    """Candidate spans per document, in the prediction schema (labels ignored)."""
    out = {}
    for obj in _records(path):
        pred = metrics.prediction_from_json(obj)
        out[pred.doc_id] = [s for s, _ in pred.assignments]
    return out


def _scorer(args):
    if args.scorer == "mlp":
        if not args.weights:
            raise UsageError("--scorer mlp needs --weights")
        return id_engine.MlpScorer.load(args.weights)
    return id_engine.SCORERS[args.scorer]()


def cmd_run_engine(args) -> int:
    golds = read_mei(args.gold)
    if args.encoder == "file":
        if not args.vectors:
            raise UsageError("--encoder file needs --vectors")
        encoder = id_engine.FileSpanEncoder.from_jsonl(args.vectors)
    else:
        encoder = id_engine.HashSpanEncoder(args.dim)
    scorer = _scorer(args)
    candidates = _read_candidates(args.candidates) if args.candidates else None
    preds = []
    for g in golds:
        spans = candidates.get(g.doc_id, []) if candidates is not None else \
            [s for s, _ in g.gold] + list(g.other_mentions)
        preds.append(id_engine.run_engine(g, spans, encoder, args.mode, scorer, args.threshold))
    emit(predictions_text(preds), args.out)
    return EXIT_OK


def cmd_llm(args) -> int:
    from .llm import client as llm_client
    from .llm.pipeline import run_corpus

    golds = read_mei(args.gold)
    if args.fixtures in ("record", "replay") and not args.cassette:
        raise UsageError(f"--fixtures {args.fixtures} needs --cassette")
    live = None
    if args.fixtures != "replay":
        live = llm_client.HttpChatClient.from_env(endpoint=args.endpoint, model=args.model,
                                                  token_budget=args.token_budget)
    if args.fixtures == "off":
        client = live
    else:
        try:
            client = llm_client.CassetteClient(args.cassette, args.fixtures, inner=live)
        except FileNotFoundError as exc:
            raise DataError(str(exc)) from exc
    h2s_mode = "llm" if args.h2s == "llm" else "provider"
    results = run_corpus(golds, client, args.prompt, h2s_mode, max_parallel=args.max_parallel)
    preds = [p for p, _ in results]
    for _, diag in results:
        _warn(diag)
    emit(predictions_text(preds), args.out)
    if args.report:
        report = metrics.evaluate(metrics.pair_corpus(golds, preds))
        emit(_report_text(report, args.report_format), args.report)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if not args.errors and args.varying_k is None:
        raise UsageError("analyze needs --errors and/or --varying-k K")
    chunks = []
    if args.errors:
        if not args.gold or not args.pred:
            raise UsageError("--errors needs --gold and --pred")
        golds = read_mei(args.gold)
        try:
            pairs = metrics.pair_corpus(golds, read_pred(args.pred))
            per_doc = [(g.doc_id, analysis.classify_errors(g, p)) for g, p in pairs]
        except (ValueError, analysis.UnknownEntityLabel) as exc:
            raise DataError(str(exc)) from exc
        if args.report_format == "tsv":
            chunks.append(analysis.errors_to_tsv(per_doc))
        else:
            chunks.append(analysis.dump_json(analysis.errors_to_json(per_doc)))
        if args.figure:
            from .plotting import plot_error_counts
            total = analysis.ErrorCounts()
            for _, c in per_doc:
                total += c
            plot_error_counts(total, args.figure)
    if args.varying_k is not None:
        if not args.corpus:
            raise UsageError("--varying-k needs --corpus")
        if args.varying_k < 1:
            raise UsageError("--varying-k must be >= 1")
        docs = read_annotated(args.corpus, args.format)
        if not docs:
            raise UsageError("empty corpus")
        predictor = _predictor(args)
        reports = []
        for doc in docs:
            try:
                reports.append(analysis.varying_k_report(doc, predictor, args.varying_k, args.min_count))
            except derive.NoQualifyingEntities as exc:
                _warn([f"{exc}; document skipped"])
        if args.report_format == "tsv":
            chunks.extend(f"# {r.doc_id}\n{r.to_tsv()}" for r in reports)
        else:
            chunks.append(analysis.dump_json([r.to_json() for r in reports]))
        if args.figure and reports:
            from .plotting import plot_varying_k
            target = Path(args.figure)
            for r in reports:
                path = target if len(reports) == 1 else target.with_name(f"{target.stem}.{r.doc_id}{target.suffix}")
                plot_varying_k(r, path)
    emit("".join(chunks), args.out)
    return EXIT_OK


def _predictor(args):
    if args.predictor == "oracle":
        return metrics.gold_as_prediction
    encoder = id_engine.HashSpanEncoder(args.dim)
    scorer = id_engine.SCORERS["dot"]()

    def predict(doc):
        spans = [s for s, _ in doc.gold] + list(doc.other_mentions)
        return id_engine.run_engine(doc, spans, encoder, "hybrid", scorer)
    return predict


# ---------------------------------------------------------------------------
# parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--out", help="write data here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mei", description="Major entity identification toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    subs.required = True

    p = subs.add_parser("derive", help="select major entities and write MEI jsonlines")
    _common(p)
    p.add_argument("inputs", nargs="+", help="corpus files ('-' for stdin)")
    p.add_argument("--format", choices=("conll", "jsonl"), default="conll")
    p.add_argument("--k", type=int, default=derive.DEFAULT_K)
    p.add_argument("--min-count", type=int, default=derive.DEFAULT_MIN_COUNT)
    p.add_argument("--phrase", action="append", metavar="DOC_ID:RANK=PHRASE",
                   help="override the designative phrase of one entity")
    p.add_argument("--stats", action="store_true", help="print corpus statistics instead of documents")
    p.add_argument("--distance-unit", choices=("mentions", "tokens"), default="mentions")
    p.set_defaults(func=cmd_derive)

    p = subs.add_parser("evaluate", help="score predictions against MEI gold")
    _common(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", help="prediction jsonlines; omitted means gold-as-prediction")
    p.add_argument("--report-format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--figure", help="write a per-entity F1 bar chart here")
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("map", help="map coreference clusters to major entities")
    _common(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--clusters", required=True, help="system clusters over the same tokens")
    p.add_argument("--format", choices=("conll", "jsonl"), default="jsonl")
    p.add_argument("--mode", choices=("fuzzy", "cosine"), default="fuzzy")
    p.add_argument("--dim", type=int, default=64, help="hash embedding size for cosine mode")
    p.set_defaults(func=cmd_map)

    p = subs.add_parser("run-engine", help="label candidate mentions with the memory engine")
    _common(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--mode", choices=("static", "hybrid"), default="hybrid")
    p.add_argument("--encoder", choices=("hash", "file"), default="hash")
    p.add_argument("--vectors", help="precomputed vectors for --encoder file")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--scorer", choices=("dot", "cosine", "mlp"), default="dot")
    p.add_argument("--weights", help=".npz weights for --scorer mlp")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--candidates", help="prediction-schema jsonlines with null labels; default is gold plus other mentions")
    p.set_defaults(func=cmd_run_engine)

    p = subs.add_parser("llm", help="prompt a chat model for major entity mentions")
    _common(p)
    p.add_argument("--gold", required=True, help="MEI jsonlines providing documents and entities")
    p.add_argument("--prompt", choices=("two-stage", "single", "linking"), default="two-stage")
    p.add_argument("--model", default="gpt-4-1106-preview")
    p.add_argument("--endpoint", default="https://api.openai.com/v1/chat/completions")
    p.add_argument("--h2s", choices=("llm", "heads-only"), default="llm")
    p.add_argument("--fixtures", choices=("record", "replay", "off"), default="off")
    p.add_argument("--cassette", help="fixture jsonlines for record/replay")
    p.add_argument("--max-parallel", type=int, default=1)
    p.add_argument("--token-budget", type=int)
    p.add_argument("--report", help="also write a metric report here")
    p.add_argument("--report-format", choices=("tsv", "json"), default="tsv")
    p.set_defaults(func=cmd_llm)

    p = subs.add_parser("analyze", help="error breakdown and varying-k reports")
    _common(p)
    p.add_argument("--errors", action="store_true")
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--varying-k", type=int, metavar="K")
    p.add_argument("--corpus", help="annotated corpus for --varying-k")
    p.add_argument("--format", choices=("conll", "jsonl"), default="jsonl")
    p.add_argument("--min-count", type=int, default=derive.DEFAULT_MIN_COUNT)
    p.add_argument("--predictor", choices=("oracle", "engine"), default="oracle")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--report-format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--figure", help="write a chart here")
    p.set_defaults(func=cmd_analyze)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.config:
            apply_config(_subparser(parser, args.command), read_config(args.config))
            args = parser.parse_args(argv)
        if getattr(args, "max_parallel", 1) < 1:
            raise UsageError("--max-parallel must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"mei: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CorpusError, KeyError, ValueError, OSError, ClientError) as exc:
        print(f"mei: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
