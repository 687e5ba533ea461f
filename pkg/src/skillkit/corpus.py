"""Data model and BIO/GLiNER conversion for skill-extraction corpora."""

from __future__ import annotations

import enum
import io
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

SPLITS = ("train", "validation", "test")

_ID_COMMENT = re.compile(r"^# id = (\S.*)$")


class EntityType(enum.Enum):
    SKILL = "SKILL"
    KNOWLEDGE = "KNOWLEDGE"

    @property
    def key(self) -> str:
        """Upper-case form used as JSON key in generation targets."""
        return self.value

    @property
    def label(self) -> str:
        """Title-case form used as GLiNER label and BIO tag suffix."""
        return self.value.capitalize()

    @classmethod
    def parse(cls, text: str) -> "EntityType":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown entity type: {text!r}") from None

    @property
    def rank(self) -> int:
        return _TYPE_ORDER[self]


_TYPE_ORDER = {t: i for i, t in enumerate(EntityType)}


@dataclass(frozen=True)
class EntitySpan:
    """Typed half-open token range ``[start, end)``."""

    type: EntityType
    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def sort_key(self) -> tuple[int, int, int]:
        return (self.start, self.end, self.type.rank)


def _check_token(tok: str) -> None:
    if not tok or any(ch.isspace() for ch in tok):
        raise ValueError(f"invalid token {tok!r}: must be non-empty and whitespace-free")


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[str, ...]
    gold: tuple[EntitySpan, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")
        for tok in self.tokens:
            _check_token(tok)
        # canonical gold order keeps equality independent of annotation order
        gold = tuple(sorted(self.gold, key=EntitySpan.sort_key))
        object.__setattr__(self, "gold", gold)
        n = len(self.tokens)
        last_end: dict[EntityType, int] = {}
        for span in gold:
            if span.end > n:
                raise ValueError(f"sentence {self.id!r}: span {span} exceeds {n} tokens")
            if span.start < last_end.get(span.type, 0):
                raise ValueError(f"sentence {self.id!r}: overlapping {span.type.label} spans")
            last_end[span.type] = span.end

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def surface(self, span: EntitySpan) -> str:
        return " ".join(self.tokens[span.start:span.end])

    def spans_of(self, etype: EntityType) -> list[EntitySpan]:
        return [s for s in self.gold if s.type is etype]


@dataclass(frozen=True)
class Corpus:
    split: str
    sentences: tuple[Sentence, ...] = ()

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        object.__setattr__(self, "sentences", tuple(self.sentences))
        seen: set[str] = set()
        for s in self.sentences:
            if s.id in seen:
                raise ValueError(f"duplicate sentence id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def by_id(self) -> dict[str, Sentence]:
        return {s.id: s for s in self.sentences}


class BioFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class BioLayout:
    """Column positions of a CoNLL-style file: one token column plus one
    BIO tag column per entity type."""

    token: int = 0
    columns: Mapping[EntityType, int] = field(
        default_factory=lambda: {EntityType.SKILL: 1, EntityType.KNOWLEDGE: 2}
    )

    def __post_init__(self) -> None:
        used = [self.token, *self.columns.values()]
        if len(set(used)) != len(used) or min(used) < 0:
            raise ValueError(f"invalid column layout {used}")

    @property
    def width(self) -> int:
        return max(self.token, *self.columns.values()) + 1

    @classmethod
    def parse(cls, text: str) -> "BioLayout":
        """Parse ``"token=0,skill=1,knowledge=2"``."""
        token = 0
        columns: dict[EntityType, int] = {}
        for part in text.split(","):
            name, _, idx = part.partition("=")
            if not idx.strip().isdigit():
                raise ValueError(f"bad layout entry {part!r}")
            if name.strip().lower() == "token":
                token = int(idx)
            else:
                columns[EntityType.parse(name)] = int(idx)
        if not columns:
            raise ValueError("layout names no tag columns")
        return cls(token=token, columns=columns)


def _tags_to_spans(
    tags: Sequence[tuple[int, str]], etype: EntityType, strict: bool
) -> list[EntitySpan]:
    """Maximal B/I runs of one tag column. ``tags`` pairs each tag with its
    source line number for diagnostics."""
    spans = []
    start = None
    for i, (lineno, tag) in enumerate(tags):
        prefix, _, suffix = tag.partition("-")
        if tag == "O":
            prefix = "O"
        elif prefix not in ("B", "I") or (suffix and _suffix_type(suffix, lineno) is not etype):
            raise BioFormatError(f"invalid {etype.label} tag {tag!r}", lineno)
        if prefix != "I" and start is not None:
            spans.append(EntitySpan(etype, start, i))
            start = None
        if prefix == "B":
            start = i
        elif prefix == "I" and start is None:
            if strict:
                raise BioFormatError(f"{tag!r} without preceding B-/I-{etype.label}", lineno)
            start = i
    if start is not None:
        spans.append(EntitySpan(etype, start, len(tags)))
    return spans


def _suffix_type(suffix: str, lineno: int) -> EntityType:
    try:
        return EntityType.parse(suffix)
    except ValueError:
        raise BioFormatError(f"unknown entity type in tag suffix {suffix!r}", lineno) from None


def _lines(source: str | IO[str]) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def read_bio(
    source: str | IO[str],
    layout: BioLayout | None = None,
    *,
    split: str = "test",
    strict: bool = True,
) -> Corpus:
    """Read a CoNLL-style corpus: one token per line with one BIO column per
    entity type, blank lines between sentences.

    A ``# id = ...`` comment before a sentence sets its id; otherwise ids are
    ``"<split>:<index>"``. Tags may be typed (``B-Skill``) or bare (``B``),
    the column decides the type. In strict mode an ``I`` tag that does not
    continue a run is an error; lenient mode starts a new span there.
    """
    layout = layout or BioLayout()
    sentences: list[Sentence] = []
    rows: list[tuple[int, list[str]]] = []
    pending_id: str | None = None
    first_line = 0

    def flush() -> None:
        nonlocal rows, pending_id
        if not rows:
            return
        tokens = [parts[layout.token] for _, parts in rows]
        gold: list[EntitySpan] = []
        for etype, col in layout.columns.items():
            gold.extend(_tags_to_spans([(n, p[col]) for n, p in rows], etype, strict))
        sid = pending_id if pending_id is not None else f"{split}:{len(sentences)}"
        try:
            sentences.append(Sentence(sid, tuple(tokens), tuple(gold)))
        except ValueError as exc:
            raise BioFormatError(str(exc), first_line) from None
        rows, pending_id = [], None

    for lineno, raw in enumerate(_lines(source), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if not rows:
            m = _ID_COMMENT.match(line)
            if m:
                pending_id = m.group(1)
                continue
            if line.startswith("-DOCSTART-"):
                continue
            first_line = lineno
        parts = line.split()
        if len(parts) != layout.width:
            raise BioFormatError(
                f"expected {layout.width} columns, found {len(parts)}: {line!r}", lineno
            )
        rows.append((lineno, parts))
    flush()
    try:
        return Corpus(split, tuple(sentences))
    except ValueError as exc:
        raise BioFormatError(str(exc)) from None


def spans_to_tags(n_tokens: int, spans: Iterable[EntitySpan], etype: EntityType) -> list[str]:
    tags = ["O"] * n_tokens
    for span in spans:
        if span.type is not etype:
            continue
        tags[span.start] = f"B-{etype.label}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{etype.label}"
    return tags


def write_bio(corpus: Corpus, layout: BioLayout | None = None) -> str:
    """Serialize ``corpus`` so that ``read_bio`` restores it exactly."""
    layout = layout or BioLayout()
    out: list[str] = []
    for i, sent in enumerate(corpus.sentences):
        if sent.id != f"{corpus.split}:{i}":
            out.append(f"# id = {sent.id}\n")
        columns = {layout.token: list(sent.tokens)}
        for etype, col in layout.columns.items():
            columns[col] = spans_to_tags(len(sent.tokens), sent.gold, etype)
        for k in range(len(sent.tokens)):
            out.append("\t".join(columns[c][k] for c in range(layout.width)) + "\n")
        out.append("\n")
    return "".join(out)


def read_skillspan_json(source: str | IO[str], *, split: str = "test", strict: bool = True) -> Corpus:
    """Read the line-delimited JSON release shape: one object per sentence
    with ``tokens``, ``tags_skill`` and ``tags_knowledge`` (and optionally
    ``idx``)."""
    sentences = []
    for lineno, raw in enumerate(_lines(source), 1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
            tokens = rec["tokens"]
            tag_cols = {
                EntityType.SKILL: rec["tags_skill"],
                EntityType.KNOWLEDGE: rec["tags_knowledge"],
            }
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise BioFormatError(f"bad record: {exc}", lineno) from None
        gold = []
        for etype, tags in tag_cols.items():
            if len(tags) != len(tokens):
                raise BioFormatError(f"{len(tags)} {etype.label} tags for {len(tokens)} tokens", lineno)
            gold.extend(_tags_to_spans([(lineno, t) for t in tags], etype, strict))
        sid = str(rec["idx"]) if "idx" in rec else f"{split}:{len(sentences)}"
        try:
            sentences.append(Sentence(sid, tuple(tokens), tuple(gold)))
        except ValueError as exc:
            raise BioFormatError(str(exc), lineno) from None
    try:
        return Corpus(split, tuple(sentences))
    except ValueError as exc:
        raise BioFormatError(str(exc)) from None


def load_corpus(
    path: str | Path,
    *,
    split: str | None = None,
    layout: BioLayout | None = None,
    strict: bool = True,
) -> Corpus:
    """Load a corpus file, choosing the reader by extension (``.json`` /
    ``.jsonl`` for the JSON release shape, anything else as CoNLL). The
    split defaults to whichever split name appears in the file name."""
    path = Path(path)
    if split is None:
        split = next((s for s in SPLITS if s in path.name.lower()), None)
        if split is None:
            split = "validation" if "dev" in path.name.lower() else "test"
    with open(path, encoding="utf-8", newline="") as fh:
        if path.suffix.lower() in (".json", ".jsonl"):
            return read_skillspan_json(fh, split=split, strict=strict)
        return read_bio(fh, layout, split=split, strict=strict)


def to_gliner(sentence: Sentence) -> dict:
    """GLiNER training record; ``ner`` end indices are inclusive."""
    return {
        "tokenized_text": list(sentence.tokens),
        "ner": [[s.start, s.end - 1, s.type.label] for s in sentence.gold],
    }


@dataclass(frozen=True)
class CorpusStats:
    split: str
    sentences: int
    entities: Mapping[EntityType, int]

    def as_dict(self) -> dict:
        return {
            "split": self.split,
            "sentences": self.sentences,
            **{t.label: self.entities.get(t, 0) for t in EntityType},
        }


def stats(corpus: Corpus) -> CorpusStats:
    counts = Counter(span.type for s in corpus.sentences for span in s.gold)
    return CorpusStats(
        split=corpus.split,
        sentences=len(corpus.sentences),
        entities={t: counts.get(t, 0) for t in EntityType},
    )
