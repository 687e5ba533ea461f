"""Anchor generated entities to token spans of their source sentence.

Matching is exact and at whitespace-token granularity against the
sentinel-wrapped sentence, so an entity at the sentence boundary still has a
neighbour on both sides.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from skillkit.corpus import EntitySpan, EntityType, Sentence
from skillkit.parser import Candidate
from skillkit.promptgen import ContextedEntity, wrap_sentinels


class AlignFailure(enum.Enum):
    SPAN_NOT_FOUND = "SpanNotFound"
    CONTEXT_MISMATCH = "ContextMismatch"
    AMBIGUOUS_UNBROKEN = "AmbiguousUnbroken"


@dataclass(frozen=True)
class Hallucination:
    type: EntityType
    skill_span: str
    context: str | None
    reason: AlignFailure

    def as_json(self) -> dict:
        return {
            "type": self.type.key,
            "skill_span": self.skill_span,
            "context": self.context,
            "reason": self.reason.value,
        }


@dataclass(frozen=True)
class AlignedPrediction:
    sentence_id: str
    resolved: tuple[EntitySpan, ...] = ()
    hallucinations: tuple[Hallucination, ...] = ()
    # entities resolved through a context missing one neighbour
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def predicted_count(self, etype: EntityType) -> int:
        return sum(s.type is etype for s in self.resolved) + sum(
            h.type is etype for h in self.hallucinations
        )


def occurrences(wrapped: Sequence[str], needle: Sequence[str]) -> list[int]:
    """Original-coordinate starts of ``needle`` inside the sentence proper
    (never overlapping the sentinels)."""
    n, k = len(wrapped) - 2, len(needle)
    if k == 0:
        return []
    return [i for i in range(n - k + 1) if list(wrapped[i + 1:i + 1 + k]) == list(needle)]


def _context_fits(wrapped: Sequence[str], start: int, k: int, ctx: Sequence[str]) -> bool:
    """Whether ``ctx`` is the full one-token neighbourhood of the occurrence
    at original position ``start`` (wrapped ``start + 1``)."""
    return list(wrapped[start:start + k + 2]) == list(ctx)


def _partial_fits(wrapped: Sequence[str], start: int, k: int, ctx: Sequence[str]) -> bool:
    if len(ctx) == k:
        return list(wrapped[start + 1:start + 1 + k]) == list(ctx)
    if len(ctx) == k + 1:
        return list(wrapped[start:start + k + 1]) == list(ctx) or list(
            wrapped[start + 1:start + k + 2]
        ) == list(ctx)
    return False


def align(sentence: Sentence, entities: Iterable[ContextedEntity]) -> AlignedPrediction:
    """Resolve each entity to the occurrence of its surface whose wrapped
    neighbourhood equals its context.

    Several surviving occurrences go to the leftmost one not already claimed
    by an earlier entity of the same type; when every survivor is claimed
    the entity is reported as ``AmbiguousUnbroken``. A single survivor is
    taken even if claimed, so the duplicate reaches the scorer as a false
    positive. A context missing one neighbour is accepted only when it
    singles out exactly one occurrence.
    """
    wrapped = wrap_sentinels(sentence)
    resolved: list[EntitySpan] = []
    missed: list[Hallucination] = []
    notes: list[str] = []
    claimed: set[EntitySpan] = set()
    for idx, ent in enumerate(entities):
        needle = ent.skill_span.split()
        ctx = ent.context.split()
        k = len(needle)
        occ = occurrences(wrapped, needle)
        if not occ:
            missed.append(Hallucination(ent.type, ent.skill_span, ent.context, AlignFailure.SPAN_NOT_FOUND))
            continue
        survivors = [i for i in occ if _context_fits(wrapped, i, k, ctx)]
        if not survivors and len(ctx) < k + 2:
            partial = [i for i in occ if _partial_fits(wrapped, i, k, ctx)]
            if len(partial) == 1:
                survivors = partial
                notes.append(f"entity {idx}: context {ent.context!r} lacks a neighbour")
        if not survivors:
            missed.append(Hallucination(ent.type, ent.skill_span, ent.context, AlignFailure.CONTEXT_MISMATCH))
            continue
        spans = [EntitySpan(ent.type, i, i + k) for i in survivors]
        if len(spans) == 1:
            chosen = spans[0]
        else:
            free = [s for s in spans if s not in claimed]
            if not free:
                missed.append(
                    Hallucination(ent.type, ent.skill_span, ent.context, AlignFailure.AMBIGUOUS_UNBROKEN)
                )
                continue
            chosen = free[0]
        claimed.add(chosen)
        resolved.append(chosen)
    return AlignedPrediction(sentence.id, tuple(resolved), tuple(missed), tuple(notes))


def align_extract_style(sentence: Sentence, candidates: Iterable[Candidate]) -> AlignedPrediction:
    """Context-free alignment: each candidate takes the leftmost occurrence
    of its surface not claimed by an earlier candidate of the same type."""
    wrapped = wrap_sentinels(sentence)
    resolved: list[EntitySpan] = []
    missed: list[Hallucination] = []
    claimed: set[EntitySpan] = set()
    for cand in candidates:
        needle = cand.surface.split()
        spans = [EntitySpan(cand.type, i, i + len(needle)) for i in occurrences(wrapped, needle)]
        free = [s for s in spans if s not in claimed]
        if free:
            claimed.add(free[0])
            resolved.append(free[0])
        else:
            reason = AlignFailure.AMBIGUOUS_UNBROKEN if spans else AlignFailure.SPAN_NOT_FOUND
            missed.append(Hallucination(cand.type, cand.surface, None, reason))
    return AlignedPrediction(sentence.id, tuple(resolved), tuple(missed))


def positioned(sentence: Sentence, spans: Iterable[EntitySpan]) -> AlignedPrediction:
    """Wrap spans that already carry positions (tagged-sentence output)."""
    return AlignedPrediction(sentence.id, tuple(spans))


def merge(sentence_id: str, parts: Iterable[AlignedPrediction]) -> AlignedPrediction:
    """Combine per-type predictions of one sentence."""
    resolved: list[EntitySpan] = []
    missed: list[Hallucination] = []
    notes: list[str] = []
    for p in parts:
        resolved.extend(p.resolved)
        missed.extend(p.hallucinations)
        notes.extend(p.diagnostics)
    return AlignedPrediction(sentence_id, tuple(resolved), tuple(missed), tuple(notes))


def aligned_record(sentence: Sentence, pred: AlignedPrediction) -> dict:
    """Line-delimited JSON row: text, tokens and resolved spans."""
    return {
        "id": sentence.id,
        "text": sentence.text,
        "tokens": list(sentence.tokens),
        "spans": [{"type": s.type.key, "start": s.start, "end": s.end} for s in pred.resolved],
        "hallucinations": [h.as_json() for h in pred.hallucinations],
        "diagnostics": list(pred.diagnostics),
    }


def prediction_from_record(rec: dict) -> AlignedPrediction:
    return AlignedPrediction(
        sentence_id=rec["id"],
        resolved=tuple(EntitySpan(EntityType.parse(s["type"]), s["start"], s["end"]) for s in rec["spans"]),
        hallucinations=tuple(
            Hallucination(EntityType.parse(h["type"]), h["skill_span"], h.get("context"), AlignFailure(h["reason"]))
            for h in rec.get("hallucinations", [])
        ),
        diagnostics=tuple(rec.get("diagnostics", [])),
    )
