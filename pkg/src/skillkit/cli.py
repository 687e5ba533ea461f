"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from skillkit.client import ConfigError, EndpointConfig, FixtureError, GenerationRecord, ReplayBackend, generate_batch
from skillkit.corpus import BioFormatError, BioLayout, Corpus, load_corpus, stats, to_gliner
from skillkit.evaluator import FailureRecord, render_report, score
from skillkit.aligner import prediction_from_record
from skillkit.pipeline import (
    DataError,
    align_stage,
    aligned_rows,
    dumps_line,
    failures_of,
    parse_stage,
    read_jsonl,
    write_jsonl,
)
from skillkit.promptgen import PromptExample, Style, generate

log = logging.getLogger("skillkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config file; flags override it")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="repair", action="store_false", default=None,
                      help="reject malformed generations (default)")
    mode.add_argument("--repair", dest="repair", action="store_true", default=None,
                      help="attempt bracket repair of malformed JSON generations")
    p.add_argument("--style", choices=[s.value for s in Style])
    p.add_argument("--replay", type=Path, help="fixture of recorded responses instead of an endpoint")
    p.add_argument("--fallback", help="replay response for ids missing from the fixture")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--gold", type=Path, help="gold corpus (CoNLL, or .json/.jsonl release format)")
    p.add_argument("--split", choices=["train", "validation", "test"])
    p.add_argument("--columns", help="CoNLL layout, e.g. token=0,skill=1,knowledge=2")
    p.add_argument("--lenient", action="store_true", default=None,
                   help="accept I- tags that do not continue a span")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="skillkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    conv = sub.add_parser("convert", parents=[common], help="write training data in one format")
    conv.add_argument("--format", dest="target", choices=["sft", "gliner", "extract", "ner"],
                      help="output format (defaults to --style)")
    conv.add_argument("--fields", choices=["native", "instruction"], default="native",
                      help="'instruction' writes {instruction, input, output} rows")

    sub.add_parser("gen-prompts", parents=[common], help="write inference prompts")
    gen = sub.add_parser("generate", parents=[common], help="run prompts through the model")
    gen.add_argument("--prompts", type=Path)
    sub.add_parser("run", parents=[common], help="prompts, inference, parsing, alignment and scoring")
    par = sub.add_parser("parse", parents=[common], help="parse stored generations")
    par.add_argument("--generations", type=Path)
    ali = sub.add_parser("align", parents=[common], help="align parsed entities to token spans")
    ali.add_argument("--parsed", type=Path)
    sco = sub.add_parser("score", parents=[common], help="score aligned predictions against gold")
    sco.add_argument("--aligned", type=Path)
    sco.add_argument("--failures", type=Path)
    sco.add_argument("--format", dest="report_format", choices=["text", "json"], default="text")
    st = sub.add_parser("stats", parents=[common], help="entity counts per corpus file")
    st.add_argument("corpora", nargs="*", type=Path)
    st.add_argument("--format", dest="report_format", choices=["text", "json"], default="text")
    return parser


_DEFAULTS: dict[str, Any] = {
    "repair": False,
    "style": "sft",
    "out": Path("out"),
    "lenient": False,
}


def _settle(args: argparse.Namespace) -> dict[str, Any]:
    """Merge flags over the config file over defaults."""
    config: dict[str, Any] = {}
    if args.config is not None:
        if not args.config.is_file():
            raise UsageError(f"config file {args.config} not found")
        try:
            config = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
    settings = dict(_DEFAULTS)
    for key, value in config.items():
        settings[key] = Path(value) if key in ("out", "gold", "replay") and value is not None else value
    for key, value in vars(args).items():
        if value is not None:
            settings[key] = value
    return settings


def _corpus(settings: dict[str, Any]) -> Corpus:
    gold = settings.get("gold")
    if gold is None:
        raise UsageError("--gold is required")
    gold = Path(gold)
    if not gold.is_file():
        raise UsageError(f"corpus {gold} not found")
    try:
        layout = BioLayout.parse(settings["columns"]) if settings.get("columns") else None
    except ValueError as exc:
        raise UsageError(f"--columns: {exc}") from None
    return load_corpus(gold, split=settings.get("split"), layout=layout, strict=not settings["lenient"])


def _input(settings: dict[str, Any], key: str, default_name: str) -> Path:
    path = Path(settings.get(key) or Path(settings["out"]) / default_name)
    if not path.is_file():
        raise UsageError(f"{key} file {path} not found")
    return path


def _outdir(settings: dict[str, Any]) -> Path:
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_convert(settings: dict[str, Any]) -> int:
    corpus = _corpus(settings)
    target = settings.get("target") or settings["style"]
    out = _outdir(settings) / f"{corpus.split}.{target}.jsonl"
    if target == "gliner":
        rows = [to_gliner(s) for s in corpus]
    else:
        examples = generate(corpus.sentences, Style(target), include_target=True)
        if settings["fields"] == "instruction":
            rows = [ex.to_instruction() for ex in examples]
        else:
            rows = [ex.to_record() for ex in examples]
    n = write_jsonl(out, rows)
    log.info("wrote %d %s records to %s", n, target, out)
    return EXIT_OK


def cmd_gen_prompts(settings: dict[str, Any]) -> int:
    corpus = _corpus(settings)
    prompts = generate(corpus.sentences, Style(settings["style"]), include_target=False)
    write_jsonl(_outdir(settings) / "prompts.jsonl", [p.to_record() for p in prompts])
    return EXIT_OK


def _generate(settings: dict[str, Any], prompts: list[PromptExample]) -> list[GenerationRecord]:
    if settings.get("replay") is not None:
        replay = Path(settings["replay"])
        if not replay.is_file():
            raise UsageError(f"replay fixture {replay} not found")
        return ReplayBackend.load(replay, settings.get("fallback")).generate_batch(prompts)
    endpoint = settings.get("endpoint")
    if not endpoint:
        raise UsageError("need --replay or an 'endpoint' section in --config")
    try:
        config = EndpointConfig.from_dict(endpoint)
    except TypeError as exc:
        raise UsageError(f"endpoint config: {exc}") from None
    return generate_batch(prompts, config)


def cmd_generate(settings: dict[str, Any]) -> int:
    prompts = [PromptExample.from_record(r) for r in read_jsonl(_input(settings, "prompts", "prompts.jsonl"))]
    records = _generate(settings, prompts)
    write_jsonl(_outdir(settings) / "generations.jsonl", [r.as_json() for r in records])
    return EXIT_OK


def _write_parsed(settings: dict[str, Any], rows: list[dict]) -> None:
    out = _outdir(settings)
    write_jsonl(out / "parsed.jsonl", rows)
    write_jsonl(out / "failures.jsonl", [f.as_json() for f in failures_of(rows)])


def cmd_parse(settings: dict[str, Any]) -> int:
    corpus = _corpus(settings)
    gens = [GenerationRecord.from_json(r) for r in read_jsonl(_input(settings, "generations", "generations.jsonl"))]
    _write_parsed(settings, parse_stage(corpus, gens, repair=settings["repair"]))
    return EXIT_OK


def cmd_align(settings: dict[str, Any]) -> int:
    corpus = _corpus(settings)
    parsed = list(read_jsonl(_input(settings, "parsed", "parsed.jsonl")))
    preds = align_stage(corpus, parsed)
    write_jsonl(_outdir(settings) / "aligned.jsonl", aligned_rows(corpus, preds))
    return EXIT_OK


def _report(settings: dict[str, Any], corpus: Corpus, preds, failures) -> int:
    report = score(corpus, preds, failures)
    out = _outdir(settings)
    (out / "report.json").write_text(render_report(report, "json"), encoding="utf-8")
    text = render_report(report, "text")
    (out / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(render_report(report, settings.get("report_format", "text")))
    return EXIT_OK


def cmd_score(settings: dict[str, Any]) -> int:
    corpus = _corpus(settings)
    preds = [prediction_from_record(r) for r in read_jsonl(_input(settings, "aligned", "aligned.jsonl"))]
    failures: list[FailureRecord] = []
    fpath = Path(settings.get("failures") or Path(settings["out"]) / "failures.jsonl")
    if settings.get("failures") is not None or fpath.is_file():
        failures = [FailureRecord.from_json(r) for r in read_jsonl(_input(settings, "failures", "failures.jsonl"))]
    return _report(settings, corpus, preds, failures)


def cmd_run(settings: dict[str, Any]) -> int:
    corpus = _corpus(settings)
    out = _outdir(settings)
    prompts = generate(corpus.sentences, Style(settings["style"]), include_target=False)
    write_jsonl(out / "prompts.jsonl", [p.to_record() for p in prompts])
    records = _generate(settings, prompts)
    write_jsonl(out / "generations.jsonl", [r.as_json() for r in records])
    parsed = parse_stage(corpus, records, repair=settings["repair"])
    _write_parsed(settings, parsed)
    preds = align_stage(corpus, parsed)
    write_jsonl(out / "aligned.jsonl", aligned_rows(corpus, preds))
    return _report(settings, corpus, preds, failures_of(parsed))


def cmd_stats(settings: dict[str, Any]) -> int:
    paths = list(settings.get("corpora") or [])
    if settings.get("gold") is not None:
        paths.insert(0, Path(settings["gold"]))
    if not paths:
        raise UsageError("give corpus files or --gold")
    rows = []
    for path in paths:
        rows.append(stats(_corpus({**settings, "gold": path})).as_dict())
    if settings.get("report_format") == "json":
        sys.stdout.write("".join(dumps_line(r) for r in rows))
        return EXIT_OK
    sys.stdout.write(f"{'split':<12}{'sentences':>10}{'Knowledge':>11}{'Skill':>8}\n")
    for r in rows:
        sys.stdout.write(f"{r['split']:<12}{r['sentences']:>10}{r['Knowledge']:>11}{r['Skill']:>8}\n")
    return EXIT_OK


COMMANDS = {
    "convert": cmd_convert,
    "gen-prompts": cmd_gen_prompts,
    "generate": cmd_generate,
    "run": cmd_run,
    "parse": cmd_parse,
    "align": cmd_align,
    "score": cmd_score,
    "stats": cmd_stats,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = _settle(args)
        return COMMANDS[args.command](settings)
    except (UsageError, ConfigError) as exc:
        print(f"skillkit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BioFormatError, FixtureError, DataError, ValueError, KeyError) as exc:
        print(f"skillkit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"skillkit: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
