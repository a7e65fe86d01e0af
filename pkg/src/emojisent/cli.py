"""Command-line entry point: ``emojisent <subcommand> ...``.

Data goes to files or stdout, logs to stderr.  Exit status is 0 on
success, 1 for bad input and 2 when the annotation service fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import annotator as ann
from .aggregation import AggregationConfig, Strategy, analyze_text
from .evaluation import (
    DEFAULT_BUCKET_EDGES,
    compare_representations,
    comparison_csv,
    evaluate_strategy,
    fmt_fraction,
    read_dataset,
    write_report,
)
from .lexicon import (
    LexiconError,
    build_representation_dataset,
    import_esr,
    load_lexicon,
    read_entries,
    write_entries,
    write_lexicon,
)
from .segmenter import format_tokens, key_to_hex, segment
from .util import atomic_write_text

log = logging.getLogger("emojisent")

EXIT_OK, EXIT_INPUT, EXIT_TRANSPORT = 0, 1, 2

# Built-in defaults; a --config JSON file overrides these, flags override both.
DEFAULTS: dict[str, Any] = {
    "strategy": "bsa",
    "weights": None,
    "theta": 0,
    "qualify_min": 2,
    "buckets": ",".join(map(str, DEFAULT_BUCKET_EDGES)),
    "transport": "live",
    "model": ann.DEFAULT_MODEL,
    "endpoint": ann.DEFAULT_ENDPOINT,
    "api_key_env": ann.DEFAULT_API_KEY_ENV,
    "max_in_flight": 4,
    "retries": 3,
    "backoff": 1.0,
    "combo": ann.BEST_COMBO.slug,
    "min_occurrences": 5,
}


class InputError(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in str(text).split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _strategy(text: str) -> str:
    try:
        return Strategy(text.lower()).value
    except ValueError:
        choices = "|".join(s.value for s in Strategy)
        raise argparse.ArgumentTypeError(f"unknown strategy {text!r} (choose {choices})") from None


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors, which would read as a transport failure
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="emojisent", description="Emoji-only sentiment analysis toolkit.")
    p.add_argument("--config", help="JSON file of option defaults (flags win)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    # -v is accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    def add(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    def strategy_opts(sp):
        sp.add_argument("--lexicon", required=True, help="lexicon file (tab-separated)")
        sp.add_argument("--strategy", type=_strategy, default=None,
                        help="bsa|dpm|majority|first|consec|repeat|last|all")
        sp.add_argument("--weights", type=_int_list, default=None,
                        help="w_pos,w_neu,w_neg override, e.g. --weights=2,1,-2")
        sp.add_argument("--theta", type=int, default=None)
        sp.add_argument("--qualify-min", dest="qualify_min", type=int, default=None)

    def transport_opts(sp):
        sp.add_argument("--transport", choices=["live", "mock", "cache-only"], default=None)
        sp.add_argument("--fixtures", help="JSONL request->reply fixtures for --transport mock")
        sp.add_argument("--cache", help="annotation cache file (append-only)")
        sp.add_argument("--model", default=None)
        sp.add_argument("--endpoint", default=None)
        sp.add_argument("--api-key-env", dest="api_key_env", default=None,
                        help="name of the environment variable holding the API key")
        sp.add_argument("--max-in-flight", dest="max_in_flight", type=int, default=None)
        sp.add_argument("--retries", type=int, default=None)
        sp.add_argument("--backoff", type=float, default=None)

    sp = add("segment", help="list the emoji tokens of a text")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("text", nargs="?")
    src.add_argument("--file")

    sp = add("import-esr", help="convert the ESR v1.0 CSV into a lexicon")
    sp.add_argument("csv", nargs="?", help="ESR CSV (default: bundled copy)")
    sp.add_argument("-o", "--out", required=True)
    sp.add_argument("--min-occurrences", dest="min_occurrences", type=int, default=None)
    sp.add_argument("--scores", choices=["counts", "fractions"], default="counts")

    sp = add("build-dataset", help="join Unicode names, descriptions and pixels")
    sp.add_argument("--unicode", required=True, help="emoji-test.txt style file")
    sp.add_argument("--descriptions")
    sp.add_argument("--pixels")
    sp.add_argument("-o", "--out", required=True, help="entries JSONL")
    sp.add_argument("--summary", help="write completeness summary here instead of stdout")

    sp = add("annotate", help="label emojis with the LLM")
    sp.add_argument("--entries", required=True, help="entries JSONL from build-dataset")
    sp.add_argument("--combo", default=None, help="e.g. pixel+icon+description")
    sp.add_argument("-o", "--out", required=True, help="lexicon file to write")
    sp.add_argument("--records", help="also write annotation records JSONL here")
    transport_opts(sp)

    sp = add("label-texts", help="produce ground-truth labels for a dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("-o", "--out", required=True)
    sp.add_argument("--translated", action="store_true", help="label translated_text into translated_truth")
    transport_opts(sp)

    sp = add("analyze", help="emoji sentiment of one text")
    sp.add_argument("text")
    strategy_opts(sp)

    sp = add("evaluate", help="score a strategy on a labelled dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out-dir", dest="out_dir", required=True)
    sp.add_argument("--translated", action="store_true")
    sp.add_argument("--buckets", default=None, help="bucket start counts after 1, e.g. 2,4,6")
    strategy_opts(sp)

    sp = add("compare", help="match counts of each representation combo vs a reference")
    sp.add_argument("--annotations", required=True, nargs="+", help="annotation record JSONL files")
    sp.add_argument("--reference", required=True, help="reference lexicon (e.g. from import-esr)")
    sp.add_argument("-o", "--out", help="CSV path (default stdout)")
    return p


def _opt(args: argparse.Namespace, config: dict, name: str) -> Any:
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return DEFAULTS[name]


def _agg_config(args, config) -> AggregationConfig:
    strategy = _strategy(str(_opt(args, config, "strategy")))
    overrides = {"theta": int(_opt(args, config, "theta")), "qualify_min": int(_opt(args, config, "qualify_min"))}
    weights = _opt(args, config, "weights")
    if weights is not None:
        if isinstance(weights, str):
            weights = _int_list(weights)
        if len(weights) != 3:
            raise InputError("--weights needs exactly three integers")
        overrides.update(w_pos=weights[0], w_neu=weights[1], w_neg=weights[2])
    try:
        return AggregationConfig.for_strategy(strategy, **overrides)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _transport(args, config) -> ann.Transport:
    kind = _opt(args, config, "transport")
    if kind == "mock":
        fixtures = args.fixtures or config.get("fixtures")
        if not fixtures:
            raise InputError("--transport mock needs --fixtures")
        return ann.MockTransport.from_file(fixtures)
    if kind == "cache-only":
        return ann.CacheOnlyTransport()
    return ann.ChatCompletionsTransport(
        endpoint=_opt(args, config, "endpoint"), api_key_env=_opt(args, config, "api_key_env")
    )


def _write_or_print(text: str, path: Optional[str]) -> None:
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def cmd_segment(args, config) -> int:
    text = Path(args.file).read_text(encoding="utf-8") if args.file else args.text
    sys.stdout.write(format_tokens(segment(text)))
    return EXIT_OK


def cmd_import_esr(args, config) -> int:
    lexicon = import_esr(args.csv, min_occurrences=int(_opt(args, config, "min_occurrences")), scores=args.scores)
    write_lexicon(lexicon, args.out)
    log.info("wrote %d entries to %s", len(lexicon), args.out)
    return EXIT_OK


def cmd_build_dataset(args, config) -> int:
    entries, summary = build_representation_dataset(args.unicode, args.descriptions, args.pixels)
    write_entries(entries, args.out)
    _write_or_print(summary.to_json(), args.summary)
    return EXIT_OK


def _annotation_kwargs(args, config) -> dict:
    return {
        "model_id": _opt(args, config, "model"),
        "attempts": int(_opt(args, config, "retries")),
        "backoff": float(_opt(args, config, "backoff")),
    }


def cmd_annotate(args, config) -> int:
    combo = ann.RepresentationCombo.parse(_opt(args, config, "combo"))
    entries = read_entries(args.entries)
    cache = ann.AnnotationCache(args.cache)
    records = ann.annotate_many(
        entries, combo, _transport(args, config), cache,
        max_in_flight=int(_opt(args, config, "max_in_flight")),
        **_annotation_kwargs(args, config),
    )
    lexicon = ann.records_to_lexicon(records, source=f"{_opt(args, config, 'model')} annotations, {combo.label}")
    if args.records:
        atomic_write_text(args.records, ann.format_records(records))
    write_lexicon(lexicon, args.out)
    log.info("annotated %d emojis (%d from cache)", len(records), sum(r.cached for r in records))
    return EXIT_OK


def cmd_label_texts(args, config) -> int:
    rows, errors = read_dataset(args.dataset)
    if errors:
        raise InputError(f"{args.dataset}: {len(errors)} malformed rows (first at line {errors[0].line})")
    cache = ann.AnnotationCache(args.cache)
    transport = _transport(args, config)
    kwargs = _annotation_kwargs(args, config)
    out_lines = []
    with open(args.dataset, encoding="utf-8") as f:
        raw_rows = [json.loads(line) for line in f if line.strip()]
    for row, obj in zip(rows, raw_rows):
        text = row.translated_text if args.translated else row.text
        if text is None:
            out_lines.append(obj)
            continue
        label = ann.annotate_text_ground_truth(text, transport, cache, text_id=row.id, **kwargs)
        obj = dict(obj)
        obj["translated_truth" if args.translated else "truth"] = label.value
        out_lines.append(obj)
    atomic_write_text(args.out, "".join(json.dumps(o, ensure_ascii=False) + "\n" for o in out_lines))
    return EXIT_OK


def cmd_analyze(args, config) -> int:
    cfg = _agg_config(args, config)
    lexicon = load_lexicon(args.lexicon)
    outcome, seq = analyze_text(args.text, lexicon, cfg)
    record = outcome.to_json()
    record["emojis"] = [{"key": key_to_hex(k), "sentiment": s.value} for k, s in seq.tokens]
    record["unknown"] = seq.unknown_count
    sys.stdout.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_evaluate(args, config) -> int:
    cfg = _agg_config(args, config)
    edges = _int_list(str(_opt(args, config, "buckets")))
    lexicon = load_lexicon(args.lexicon)
    rows, errors = read_dataset(args.dataset)
    if not rows:
        raise InputError(f"{args.dataset}: no usable rows")
    try:
        report = evaluate_strategy(rows, lexicon, cfg, translated=args.translated, bucket_edges=edges, skipped=errors)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    write_report(report, args.out_dir)
    acc = fmt_fraction(report.accuracy) if report.evaluated else "undefined"
    log.info("%s: accuracy %s over %d rows", cfg.strategy.value, acc, report.evaluated)
    return EXIT_OK


def cmd_compare(args, config) -> int:
    records = []
    for path in args.annotations:
        records.extend(ann.read_records(path))
    reference = load_lexicon(args.reference)
    results = compare_representations(records, reference)
    _write_or_print(comparison_csv(results), args.out)
    return EXIT_OK


COMMANDS = {
    "segment": cmd_segment,
    "import-esr": cmd_import_esr,
    "build-dataset": cmd_build_dataset,
    "annotate": cmd_annotate,
    "label-texts": cmd_label_texts,
    "analyze": cmd_analyze,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = {}
        if args.config:
            with open(args.config, encoding="utf-8") as f:
                config = json.load(f)
            if not isinstance(config, dict):
                raise InputError(f"{args.config}: config must be a JSON object")
            config = {k.replace("-", "_"): v for k, v in config.items()}
        return COMMANDS[args.command](args, config)
    except (ann.TransportError, ann.SentimentParseError) as exc:
        log.error("%s", exc)
        return EXIT_TRANSPORT
    except (
        InputError, LexiconError, ann.MissingRepresentationError, argparse.ArgumentTypeError, OSError, ValueError
    ) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
