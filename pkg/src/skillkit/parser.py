"""Decode raw model generations into candidate entities.

Every ``parse_*`` function is total: it returns :class:`Parsed` or
:class:`Failed` and never raises on model output.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass
from typing import NamedTuple, Union

from skillkit.corpus import EntitySpan, EntityType, Sentence
from skillkit.promptgen import NER_CLOSE, NER_OPEN, ContextedEntity, Style

log = logging.getLogger(__name__)


class FailReason(enum.Enum):
    MALFORMED_JSON = "MalformedJson"
    WRONG_SCHEMA = "WrongSchema"
    TRUNCATED = "Truncated"
    TAG_MISMATCH = "TagMismatch"


@dataclass(frozen=True)
class RawGeneration:
    sentence_id: str
    style: Style
    text: str
    entity_type: EntityType | None = None


class Candidate(NamedTuple):
    type: EntityType
    surface: str


@dataclass(frozen=True)
class Edit:
    """One character-level repair: at ``offset`` of the original text,
    ``removed`` was replaced by ``inserted``."""

    offset: int
    removed: str
    inserted: str

    def as_json(self) -> dict:
        return {"offset": self.offset, "removed": self.removed, "inserted": self.inserted}


Entity = Union[ContextedEntity, Candidate, EntitySpan]


@dataclass(frozen=True)
class Parsed:
    entities: tuple[Entity, ...]
    repairs: tuple[Edit, ...] = ()

    ok = True


@dataclass(frozen=True)
class Failed:
    reason: FailReason
    detail: str

    ok = False


ParseOutcome = Union[Parsed, Failed]

_OPEN_FOR = {"}": "{", "]": "["}
_CLOSE_FOR = {"{": "}", "[": "]"}
_CLOSERS = "}])"


class _SchemaError(ValueError):
    pass


def _no_duplicate_keys(pairs: list[tuple[str, object]]) -> dict:
    obj = {}
    for k, v in pairs:
        if k in obj:
            raise _SchemaError(f"duplicate key {k!r}")
        obj[k] = v
    return obj


def _entities_from(obj: object) -> list[ContextedEntity]:
    if not isinstance(obj, dict):
        raise _SchemaError(f"top level is {type(obj).__name__}, not an object")
    expected = {t.key for t in EntityType}
    if set(obj) != expected:
        raise _SchemaError(f"keys {sorted(obj)} != {sorted(expected)}")
    entities = []
    for etype in EntityType:
        items = obj[etype.key]
        if not isinstance(items, list):
            raise _SchemaError(f"{etype.key} is not a list")
        for item in items:
            if not isinstance(item, dict) or set(item) != {"skill_span", "context"}:
                raise _SchemaError(f"{etype.key} item {item!r} lacks exactly skill_span/context")
            span, ctx = item["skill_span"], item["context"]
            if not isinstance(span, str) or not isinstance(ctx, str):
                raise _SchemaError(f"{etype.key} item {item!r} has non-string values")
            if not span.split():
                raise _SchemaError(f"{etype.key} item has an empty skill_span")
            entities.append(ContextedEntity(etype, span, ctx))
    return entities


def _decode(text: str) -> object:
    return json.loads(text, object_pairs_hook=_no_duplicate_keys)


def _classify(text: str, err: json.JSONDecodeError) -> FailReason:
    """Truncated when the text is a clean prefix of a JSON value that runs
    out mid-string or with brackets still open; malformed otherwise."""
    stack: list[str] = []
    in_str = esc = False
    for ch in text:
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch in "{[":
            stack.append(ch)
        elif ch in _CLOSERS:
            if not stack or _OPEN_FOR.get(ch) != stack[-1]:
                return FailReason.MALFORMED_JSON
            stack.pop()
    at_end = err.msg.startswith("Unterminated string") or err.pos >= len(text.rstrip())
    if (in_str or stack) and at_end:
        return FailReason.TRUNCATED
    return FailReason.MALFORMED_JSON


def _rebalance(text: str, start: int, mismatched: str) -> tuple[str, list[Edit]] | None:
    """Walk from the first ``{`` fixing mismatched closers (``")"`` counts as
    one) by substitution or deletion, and cut everything after the brace that
    closes the first ``{``. None when the brackets never balance."""
    edits = [Edit(0, text[:start], "")] if start else []
    out: list[str] = []
    stack: list[str] = []
    in_str = esc = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_str:
            out.append(ch)
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch in "{[":
            stack.append(ch)
        elif ch in _CLOSERS:
            want = _CLOSE_FOR[stack[-1]]
            if ch != want:
                if mismatched == "delete":
                    edits.append(Edit(i, ch, ""))
                    continue
                edits.append(Edit(i, ch, want))
                ch = want
            stack.pop()
            if not stack:
                out.append(ch)
                if i + 1 < len(text):
                    edits.append(Edit(i + 1, text[i + 1:], ""))
                return "".join(out), edits
        out.append(ch)
    return None


def _repair_candidates(text: str) -> list[tuple[str, list[Edit]]]:
    start, stop = text.find("{"), text.rfind("}")
    if start < 0:
        return []
    cands = []
    if stop > start:
        trim = [Edit(0, text[:start], "")] if start else []
        if stop + 1 < len(text):
            trim.append(Edit(stop + 1, text[stop + 1:], ""))
        cands.append((text[start:stop + 1], trim))
    for mode in ("substitute", "delete"):
        fixed = _rebalance(text, start, mode)
        if fixed is not None:
            cands.append(fixed)
    return cands


def _dedupe(entities: list) -> list:
    seen: set = set()
    out = []
    for e in entities:
        if e not in seen:
            seen.add(e)
            out.append(e)
    return out


def parse_skill_llm(gen: RawGeneration, repair: bool = False, dedupe: bool = False) -> ParseOutcome:
    """Decode a fine-tuned-style generation.

    Strict mode demands exactly ``{"SKILL": [...], "KNOWLEDGE": [...]}`` with
    ``{"skill_span", "context"}`` string items. Repair mode additionally tries
    three fixes of the raw text: trimming to the outermost braces, and a
    bracket walk that either substitutes or deletes mismatched closers and
    drops trailing text after the top-level object closes. The repair is
    accepted only if the schema-valid results agree on a single object.
    """
    text = gen.text
    try:
        entities = _entities_from(_decode(text))
    except json.JSONDecodeError as exc:
        failure = Failed(_classify(text, exc), f"{exc.msg} at char {exc.pos}")
    except _SchemaError as exc:
        failure = Failed(FailReason.WRONG_SCHEMA, str(exc))
    except RecursionError:
        failure = Failed(FailReason.MALFORMED_JSON, "nesting too deep")
    else:
        return Parsed(tuple(_dedupe(entities) if dedupe else entities))

    if not repair:
        return failure

    valid: dict[tuple, list[Edit]] = {}
    for fixed, edits in _repair_candidates(text):
        try:
            found = tuple(_entities_from(_decode(fixed)))
        except (ValueError, RecursionError):
            continue
        valid.setdefault(found, edits)
    if len(valid) != 1:
        if len(valid) > 1:
            return Failed(failure.reason, f"{failure.detail}; {len(valid)} conflicting repairs")
        return failure
    (found, edits), = valid.items()
    for e in edits:
        log.debug("repair %s: offset %d %r -> %r", gen.sentence_id, e.offset, e.removed, e.inserted)
    entities = list(found)
    return Parsed(tuple(_dedupe(entities) if dedupe else entities), tuple(edits))


_LIST_MARKER = re.compile(r"^(?:[-*•]|\d+[.)])\s+")


def parse_extract_style(gen: RawGeneration, etype: EntityType) -> ParseOutcome:
    """One candidate per non-empty line, list markers removed."""
    cands = []
    for line in gen.text.splitlines():
        line = line.strip()
        line = _LIST_MARKER.sub("", line).strip()
        if line in ("-", "*", "•"):
            continue
        if line:
            cands.append(Candidate(etype, line))
    return Parsed(tuple(cands))


def parse_ner_style(gen: RawGeneration, etype: EntityType, original: Sentence) -> ParseOutcome:
    """Recover positioned spans from an ``@@...##`` tagged copy of the sentence.

    Tags are recognised at token edges only: ``@@`` opening a token (or
    standing alone) and ``##`` closing one. The untagged tokens must equal
    the original sentence.
    """
    tokens: list[str] = []
    spans: list[EntitySpan] = []
    open_at: int | None = None
    for raw in gen.text.split():
        core = raw
        opens = core.startswith(NER_OPEN)
        if opens:
            core = core[len(NER_OPEN):]
        closes = core.endswith(NER_CLOSE)
        if closes:
            core = core[:-len(NER_CLOSE)]
        if opens:
            if open_at is not None:
                return Failed(FailReason.TAG_MISMATCH, f"nested {NER_OPEN} at token {len(tokens)}")
            open_at = len(tokens)
        if core:
            tokens.append(core)
        if closes:
            if open_at is None:
                return Failed(FailReason.TAG_MISMATCH, f"{NER_CLOSE} without {NER_OPEN} at token {len(tokens)}")
            if open_at == len(tokens):
                return Failed(FailReason.TAG_MISMATCH, f"empty tagged segment at token {open_at}")
            spans.append(EntitySpan(etype, open_at, len(tokens)))
            open_at = None
    if open_at is not None:
        return Failed(FailReason.TAG_MISMATCH, f"unclosed {NER_OPEN} at token {open_at}")
    if tuple(tokens) != original.tokens:
        return Failed(FailReason.TAG_MISMATCH, "untagged text differs from the input sentence")
    return Parsed(tuple(spans))


def parse(gen: RawGeneration, original: Sentence, repair: bool = False) -> ParseOutcome:
    """Dispatch on ``gen.style``."""
    if gen.style is Style.SKILL_LLM:
        return parse_skill_llm(gen, repair=repair)
    if gen.entity_type is None:
        return Failed(FailReason.WRONG_SCHEMA, f"{gen.style.value} generation without entity type")
    if gen.style is Style.EXTRACT:
        return parse_extract_style(gen, gen.entity_type)
    return parse_ner_style(gen, gen.entity_type, original)
