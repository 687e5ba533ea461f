"""Strict span-level precision, recall and F1."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from skillkit.aligner import AlignedPrediction
from skillkit.corpus import Corpus, EntityType


@dataclass(frozen=True)
class FailureRecord:
    """A generation that could not be parsed. ``type`` is None when the
    generation covered every entity type."""

    sentence_id: str
    type: EntityType | None = None
    reason: str = ""
    detail: str = ""

    def as_json(self) -> dict:
        return {
            "id": self.sentence_id,
            "type": self.type.key if self.type else None,
            "reason": self.reason,
            "detail": self.detail,
        }

    @classmethod
    def from_json(cls, rec: Mapping) -> "FailureRecord":
        t = rec.get("type")
        return cls(rec["id"], EntityType.parse(t) if t else None, rec.get("reason", ""), rec.get("detail", ""))


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_json(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class EvalReport:
    per_type: Mapping[EntityType, Counts]
    parse_failures: int = 0
    alignment_hallucinations: int = 0
    sentences_scored: int = 0

    @property
    def total(self) -> Counts:
        """Micro average: counts pooled over entity types."""
        return sum(self.per_type.values(), Counts())

    @property
    def macro(self) -> dict[str, float]:
        rows = [self.per_type[t] for t in EntityType]
        return {
            "precision": sum(c.precision for c in rows) / len(rows),
            "recall": sum(c.recall for c in rows) / len(rows),
            "f1": sum(c.f1 for c in rows) / len(rows),
        }

    def as_json(self) -> dict:
        return {
            "per_type": {t.label: self.per_type[t].as_json() for t in EntityType},
            "total": self.total.as_json(),
            "macro": self.macro,
            "parse_failures": self.parse_failures,
            "alignment_hallucinations": self.alignment_hallucinations,
            "sentences_scored": self.sentences_scored,
        }


def score(
    gold: Corpus,
    predictions: Iterable[AlignedPrediction],
    failures: Iterable[FailureRecord] = (),
) -> EvalReport:
    """Exact (type, start, end) one-to-one matching. Alignment
    hallucinations count as false positives of their type; a failed
    generation contributes no predictions for the types it covered."""
    sentences = gold.by_id()
    preds: dict[str, AlignedPrediction] = {}
    for p in predictions:
        if p.sentence_id not in sentences:
            raise ValueError(f"prediction for unknown sentence {p.sentence_id!r}")
        if p.sentence_id in preds:
            raise ValueError(f"duplicate prediction record for sentence {p.sentence_id!r}")
        preds[p.sentence_id] = p
    failures = list(failures)
    failed: dict[str, set[EntityType]] = {}
    for f in failures:
        if f.sentence_id not in sentences:
            raise ValueError(f"parse failure for unknown sentence {f.sentence_id!r}")
        failed.setdefault(f.sentence_id, set()).update([f.type] if f.type else EntityType)

    per_type = {t: Counts() for t in EntityType}
    n_halluc = 0
    for sid, sent in sentences.items():
        pred = preds.get(sid)
        dead = failed.get(sid, set())
        for t in EntityType:
            gold_spans = Counter(s for s in sent.gold if s.type is t)
            n_gold = sum(gold_spans.values())
            if pred is None or t in dead:
                per_type[t] += Counts(fn=n_gold)
                continue
            pred_spans = Counter(s for s in pred.resolved if s.type is t)
            halluc = sum(h.type is t for h in pred.hallucinations)
            n_halluc += halluc
            tp = sum((gold_spans & pred_spans).values())
            per_type[t] += Counts(tp, sum(pred_spans.values()) - tp + halluc, n_gold - tp)
    return EvalReport(per_type, len(failures), n_halluc, len(sentences))


def _pct(x: float) -> str:
    return f"{100 * x:.1f}%"


def render_report(report: EvalReport, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.as_json(), indent=2) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    cols = [report.per_type[EntityType.SKILL], report.per_type[EntityType.KNOWLEDGE], report.total]
    header = ["", "Skill Span F1", "Knowledge Span F1", "Total Span F1"]
    rows = [
        ["F1", *(_pct(c.f1) for c in cols)],
        ["Precision", *(_pct(c.precision) for c in cols)],
        ["Recall", *(_pct(c.recall) for c in cols)],
        ["TP", *(str(c.tp) for c in cols)],
        ["FP", *(str(c.fp) for c in cols)],
        ["FN", *(str(c.fn) for c in cols)],
    ]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = [
        "  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths)))
        for r in [header, *rows]
    ]
    lines.append("")
    lines.append(f"sentences scored:         {report.sentences_scored}")
    lines.append(f"parse failures:           {report.parse_failures}")
    lines.append(f"alignment hallucinations: {report.alignment_hallucinations}")
    return "\n".join(lines) + "\n"
