"""Training examples and inference prompts for the three prompt styles.

The fine-tuned style wraps every sentence in ``**`` sentinels and asks for a
JSON object listing each entity with a one-token context on either side, so
that generations can be anchored back to exact token positions.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from skillkit.corpus import EntitySpan, EntityType, Sentence

SENTINEL = "**"
NER_OPEN = "@@"
NER_CLOSE = "##"

SKILL_LLM_SYSTEM = (
    "You are a helpful information extraction system. Your job is to extract "
    "skill entities and knowledge entities from the given sentence."
)
EXTRACT_SYSTEM = (
    "You are an expert human resource manager.\n"
    "You need to analyse skills required in job offers. You are given a sentence "
    "from a job posting. Extract all the {type_phrase} that are required from the "
    "candidate as list, with one skill per line."
)
NER_SYSTEM = (
    "You are given a sentence from a job posting.\n"
    "Highlight all the {type_phrase} that are required from the candidate, by "
    "surrounding them with tags '@@' and '##'. If there are no such element in the "
    "sentence, replicate the sentence identically."
)
TYPE_PHRASES = {
    EntityType.SKILL: "skills",
    EntityType.KNOWLEDGE: "knowledge components",
}


class Style(enum.Enum):
    SKILL_LLM = "sft"
    EXTRACT = "extract"
    NER = "ner"

    @property
    def per_type(self) -> bool:
        return self is not Style.SKILL_LLM


@dataclass(frozen=True)
class ContextedEntity:
    type: EntityType
    skill_span: str
    context: str

    def as_json(self) -> dict[str, str]:
        return {"skill_span": self.skill_span, "context": self.context}


@dataclass(frozen=True)
class PromptExample:
    style: Style
    system: str
    query: str
    sentence_id: str
    target: str | None = None
    entity_type: EntityType | None = None

    @property
    def request_id(self) -> str:
        """Identifier of one model call. Per-type styles issue one call per
        entity type, so their ids carry the type key."""
        if self.entity_type is None:
            return self.sentence_id
        return f"{self.sentence_id}#{self.entity_type.key}"

    def to_record(self) -> dict:
        rec = {
            "id": self.request_id,
            "sentence_id": self.sentence_id,
            "style": self.style.value,
            "type": self.entity_type.key if self.entity_type else None,
            "system": self.system,
            "query": self.query,
        }
        if self.target is not None:
            rec["target"] = self.target
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "PromptExample":
        etype = rec.get("type")
        return cls(
            style=Style(rec["style"]),
            system=rec["system"],
            query=rec["query"],
            sentence_id=rec["sentence_id"],
            target=rec.get("target"),
            entity_type=EntityType.parse(etype) if etype else None,
        )

    def to_instruction(self, fields: Mapping[str, str] | None = None) -> dict:
        """Fine-tuning harness record; ``fields`` maps ``system``/``query``/
        ``target`` to output key names (alpaca-style by default)."""
        fields = fields or {"system": "instruction", "query": "input", "target": "output"}
        values = {"system": self.system, "query": self.query, "target": self.target or ""}
        return {fields[k]: values[k] for k in ("system", "query", "target") if k in fields}


def split_request_id(request_id: str) -> tuple[str, EntityType | None]:
    sid, sep, key = request_id.rpartition("#")
    if sep:
        try:
            return sid, EntityType.parse(key)
        except ValueError:
            pass
    return request_id, None


def _tokens(sentence: Sentence | Sequence[str]) -> tuple[str, ...]:
    return sentence.tokens if isinstance(sentence, Sentence) else tuple(sentence)


def wrap_sentinels(sentence: Sentence | Sequence[str]) -> list[str]:
    return [SENTINEL, *_tokens(sentence), SENTINEL]


def extract_context(wrapped: Sequence[str], span: EntitySpan) -> ContextedEntity:
    """Surface of ``span`` (original coordinates) plus its one-token
    neighbourhood in the wrapped sequence."""
    if span.end > len(wrapped) - 2:
        raise ValueError(f"span {span} outside a {len(wrapped) - 2}-token sentence")
    return ContextedEntity(
        type=span.type,
        skill_span=" ".join(wrapped[span.start + 1:span.end + 1]),
        context=" ".join(wrapped[span.start:span.end + 2]),
    )


def contexted_gold(sentence: Sentence) -> list[ContextedEntity]:
    wrapped = wrap_sentinels(sentence)
    return [extract_context(wrapped, span) for span in sentence.gold]


def dump_target(entities: Sequence[ContextedEntity]) -> str:
    obj = {
        t.key: [e.as_json() for e in entities if e.type is t]
        for t in (EntityType.SKILL, EntityType.KNOWLEDGE)
    }
    return json.dumps(obj, ensure_ascii=False)


def gen_skill_llm(sentence: Sentence, include_target: bool = True) -> PromptExample:
    wrapped = wrap_sentinels(sentence)
    target = None
    if include_target:
        # gold is sorted by start, so each type list is left-to-right
        target = dump_target([extract_context(wrapped, s) for s in sentence.gold])
    return PromptExample(
        style=Style.SKILL_LLM,
        system=SKILL_LLM_SYSTEM,
        query=" ".join(wrapped),
        sentence_id=sentence.id,
        target=target,
    )


def gen_extract_style(
    sentence: Sentence, etype: EntityType, include_target: bool = True
) -> PromptExample:
    target = None
    if include_target:
        target = "\n".join(sentence.surface(s) for s in sentence.spans_of(etype))
    return PromptExample(
        style=Style.EXTRACT,
        system=EXTRACT_SYSTEM.format(type_phrase=TYPE_PHRASES[etype]),
        query=sentence.text,
        sentence_id=sentence.id,
        target=target,
        entity_type=etype,
    )


def tag_sentence(tokens: Sequence[str], spans: Sequence[EntitySpan]) -> str:
    out = list(tokens)
    for span in spans:
        out[span.start] = NER_OPEN + out[span.start]
        out[span.end - 1] = out[span.end - 1] + NER_CLOSE
    return " ".join(out)


def gen_ner_style(
    sentence: Sentence, etype: EntityType, include_target: bool = True
) -> PromptExample:
    target = tag_sentence(sentence.tokens, sentence.spans_of(etype)) if include_target else None
    return PromptExample(
        style=Style.NER,
        system=NER_SYSTEM.format(type_phrase=TYPE_PHRASES[etype]),
        query=sentence.text,
        sentence_id=sentence.id,
        target=target,
        entity_type=etype,
    )


def generate(
    sentences: Sequence[Sentence], style: Style, include_target: bool = True
) -> list[PromptExample]:
    """All examples of one style, in corpus order (per-type styles emit the
    skill prompt before the knowledge prompt of each sentence)."""
    if style is Style.SKILL_LLM:
        return [gen_skill_llm(s, include_target) for s in sentences]
    gen = gen_extract_style if style is Style.EXTRACT else gen_ner_style
    return [gen(s, t, include_target) for s in sentences for t in EntityType]
