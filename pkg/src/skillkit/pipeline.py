"""Pipeline stages over persisted line-delimited JSON intermediates.

Each stage is a pure function of its input records, so a stage re-run from
files on disk reproduces the one-shot run byte for byte.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

from skillkit.aligner import AlignedPrediction, align, align_extract_style, aligned_record, merge, positioned
from skillkit.client import GenerationRecord, Status
from skillkit.corpus import Corpus, EntitySpan, EntityType
from skillkit.evaluator import FailureRecord
from skillkit.parser import Candidate, Failed, RawGeneration, parse
from skillkit.promptgen import ContextedEntity, Style

GENERATION_FAILED = "GenerationFailed"


class DataError(ValueError):
    """Malformed intermediate file or records inconsistent with the corpus."""


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield rec


def dumps_line(rec: Any) -> str:
    return json.dumps(rec, ensure_ascii=False) + "\n"


def write_jsonl(path: str | Path, records: Iterable[Any]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps_line(rec))
            n += 1
    return n


def _entity_json(e: Any) -> dict:
    if isinstance(e, ContextedEntity):
        return {"type": e.type.key, "skill_span": e.skill_span, "context": e.context}
    if isinstance(e, Candidate):
        return {"type": e.type.key, "surface": e.surface}
    return {"type": e.type.key, "start": e.start, "end": e.end}


def _entity_from(style: Style, rec: Mapping) -> Any:
    etype = EntityType.parse(rec["type"])
    if style is Style.SKILL_LLM:
        return ContextedEntity(etype, rec["skill_span"], rec["context"])
    if style is Style.EXTRACT:
        return Candidate(etype, rec["surface"])
    return EntitySpan(etype, rec["start"], rec["end"])


def parse_stage(
    corpus: Corpus, generations: Iterable[GenerationRecord], repair: bool = False
) -> list[dict]:
    """Parsed-record rows ``{id, sentence_id, style, type, status, reason?,
    detail?, entities, repairs?}``. Failed calls become failed rows."""
    sentences = corpus.by_id()
    rows = []
    for g in generations:
        if g.sentence_id not in sentences:
            raise DataError(f"generation {g.id!r} refers to unknown sentence {g.sentence_id!r}")
        row: dict[str, Any] = {"id": g.id, "sentence_id": g.sentence_id, "style": g.style, "type": g.type}
        if g.status is not Status.OK:
            row.update(status="failed", reason=GENERATION_FAILED, detail=g.status.value, entities=[])
            rows.append(row)
            continue
        style = Style(g.style)
        etype = EntityType.parse(g.type) if g.type else None
        outcome = parse(RawGeneration(g.sentence_id, style, g.response, etype), sentences[g.sentence_id], repair)
        if isinstance(outcome, Failed):
            row.update(status="failed", reason=outcome.reason.value, detail=outcome.detail, entities=[])
        else:
            row.update(status="parsed", entities=[_entity_json(e) for e in outcome.entities])
            if outcome.repairs:
                row["repairs"] = [e.as_json() for e in outcome.repairs]
        rows.append(row)
    return rows


def failures_of(parsed: Iterable[Mapping]) -> list[FailureRecord]:
    return [
        FailureRecord(
            r["sentence_id"],
            EntityType.parse(r["type"]) if r.get("type") else None,
            r.get("reason", ""),
            r.get("detail", ""),
        )
        for r in parsed
        if r["status"] == "failed"
    ]


def align_stage(corpus: Corpus, parsed: Iterable[Mapping]) -> list[AlignedPrediction]:
    """One prediction per sentence that has parsed rows, in corpus order."""
    sentences = corpus.by_id()
    grouped: dict[str, list[Mapping]] = defaultdict(list)
    for r in parsed:
        if r["sentence_id"] not in sentences:
            raise DataError(f"parsed row {r['id']!r} refers to unknown sentence {r['sentence_id']!r}")
        grouped[r["sentence_id"]].append(r)
    preds = []
    for sent in corpus.sentences:
        rows = grouped.get(sent.id)
        if not rows:
            continue
        parts = []
        for r in rows:
            if r["status"] != "parsed":
                continue
            style = Style(r["style"])
            ents = [_entity_from(style, e) for e in r["entities"]]
            if style is Style.SKILL_LLM:
                parts.append(align(sent, ents))
            elif style is Style.EXTRACT:
                parts.append(align_extract_style(sent, ents))
            else:
                parts.append(positioned(sent, ents))
        preds.append(merge(sent.id, parts))
    return preds


def aligned_rows(corpus: Corpus, preds: Sequence[AlignedPrediction]) -> list[dict]:
    sentences = corpus.by_id()
    return [aligned_record(sentences[p.sentence_id], p) for p in preds]
