"""Seeded synthetic corpora for property and acceptance tests."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from skillkit.corpus import Corpus, EntitySpan, EntityType, Sentence

QA_TOKENS = (
    "You will be working in an end-to-end cross-functional team being responsible "
    "for implementing and promoting all QA relevant topics on team level ."
).split()
OFFICE_TOKENS = "The job requires work in the office and the ability to operate office equipment".split()

VOCAB = (
    "a the and or of to in for with on team work skills office data QA CI/CD AWS "
    "Python Java SQL cloud design build manage test deploy lead support customer "
    "quality agile scrum , . ( ) - experience knowledge strong good communication "
    "written verbal project code review systems"
).split()


def qa_sentence(sid: str = "test:0") -> Sentence:
    return Sentence(
        sid,
        tuple(QA_TOKENS),
        (EntitySpan(EntityType.SKILL, 12, 19), EntitySpan(EntityType.KNOWLEDGE, 16, 17)),
    )


def random_spans(rng: random.Random, n: int, etype: EntityType, rate: float = 0.2) -> list[EntitySpan]:
    spans, i = [], 0
    while i < n:
        if rng.random() < rate:
            length = rng.randint(1, min(5, n - i))
            spans.append(EntitySpan(etype, i, i + length))
            i += length + rng.choice([0, 0, 1, 2])
        else:
            i += 1
    return spans


def random_sentence(rng: random.Random, sid: str, vocab=VOCAB, max_len: int = 25, repeat: bool = True) -> Sentence:
    """Random tokens and per-type non-overlapping spans; with ``repeat`` one
    gold surface is copied elsewhere so the sentence holds a decoy."""
    n = rng.randint(1, max_len)
    tokens = [rng.choice(vocab) for _ in range(n)]
    gold = [s for t in EntityType for s in random_spans(rng, n, t)]
    if repeat and gold:
        src = rng.choice(gold)
        k = src.end - src.start
        if k < n:
            at = rng.randint(0, n - k)
            tokens[at:at + k] = tokens[src.start:src.end]
    return Sentence(sid, tuple(tokens), tuple(gold))


def random_corpus(seed: int, size: int, split: str = "test", **kw) -> Corpus:
    rng = random.Random(seed)
    return Corpus(split, tuple(random_sentence(rng, f"{split}:{i}", **kw) for i in range(size)))


def window_ambiguous(sentence: Sentence) -> bool:
    """Whether some gold entity's wrapped (span + neighbours) window also
    occurs at a position that is not gold for that type; context anchoring
    cannot tell such occurrences apart."""
    wrapped = ["**", *sentence.tokens, "**"]
    n = len(sentence.tokens)
    gold = {(s.type, s.start, s.end) for s in sentence.gold}
    for s in sentence.gold:
        k = s.end - s.start
        window = wrapped[s.start:s.end + 2]
        for i in range(n - k + 1):
            if (s.type, i, i + k) not in gold and wrapped[i:i + k + 2] == window:
                return True
    return False


# hypothesis strategies ------------------------------------------------------

tokens_st = st.text(
    alphabet=st.characters(blacklist_categories=("Zs", "Zl", "Zp", "Cc", "Cs"), blacklist_characters="\x85 ᠎﻿"),
    min_size=1,
    max_size=6,
).filter(lambda t: t.split() == [t])
plain_tokens_st = tokens_st.filter(lambda t: not (t.startswith("@@") or t.endswith("##")))


@st.composite
def sentences(draw, sid: str = "s", token_st=tokens_st, max_len: int = 15) -> Sentence:
    toks = draw(st.lists(token_st, min_size=1, max_size=max_len))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = random.Random(seed)
    gold = [s for t in EntityType for s in random_spans(rng, len(toks), t, rate=0.3)]
    return Sentence(sid, tuple(toks), tuple(gold))


@st.composite
def corpora(draw, max_size: int = 5) -> Corpus:
    split = draw(st.sampled_from(["train", "validation", "test"]))
    n = draw(st.integers(0, max_size))
    sents = []
    for i in range(n):
        s = draw(sentences(sid=f"{split}:{i}"))
        if draw(st.booleans()):
            s = Sentence(f"doc{i}-{draw(st.integers(0, 99))}", s.tokens, s.gold)
        sents.append(s)
    ids = [s.id for s in sents]
    if len(set(ids)) != len(ids):
        sents = [Sentence(f"{split}:{i}", s.tokens, s.gold) for i, s in enumerate(sents)]
    return Corpus(split, tuple(sents))


# verbatim reference texts ---------------------------------------------------

SFT_SYSTEM = (
    "You are a helpful information extraction system. Your job is to extract skill "
    "entities and knowledge entities from the given sentence."
)
SFT_QUERY = (
    "** You will be working in an end-to-end cross-functional team being responsible "
    "for implementing and promoting all QA relevant topics on team level . **"
)
SFT_RESPONSE = """{"SKILL": [
  {"skill_span": "implementing and promoting all QA relevant topics",
   "context": "for implementing and promoting all QA relevant topics on"}
 ],
 "KNOWLEDGE": [
  {"skill_span": "QA",
   "context": "all QA relevant"}
 ]
}"""
TAGGED_KNOWLEDGE = (
    "You will be working in an end-to-end cross-functional team being responsible for "
    "implementing and promoting all @@QA## relevant topics on team level ."
)
TAGGED_SKILL = (
    "You will be working in an end-to-end cross-functional team being responsible for "
    "@@implementing and promoting all QA relevant topics## topics on team level ."
)
MALFORMED = """{"SKILL":
  [{"skill_span": "Result oriented",
    "context": "** Result oriented and"),
   {"skill_span": "work constructively towards reaching goals",
    "context": "and work constructively towards reaching goals ."}],
 "KNOWLEDGE": []}}"""
MALFORMED_TOKENS = "Result oriented and work constructively towards reaching goals .".split()


def squeeze_json(text: str) -> str:
    """Drop whitespace outside JSON strings."""
    out, in_str, esc = [], False, False
    for ch in text:
        if in_str:
            out.append(ch)
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
            out.append(ch)
        elif not ch.isspace():
            out.append(ch)
    return "".join(out)
