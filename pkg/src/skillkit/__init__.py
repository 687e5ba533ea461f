"""Skill/knowledge span extraction toolkit: corpus conversion, prompt
generation, generation parsing, context alignment and strict span scoring."""

from skillkit.corpus import (
    BioFormatError,
    BioLayout,
    Corpus,
    EntitySpan,
    EntityType,
    Sentence,
    load_corpus,
    read_bio,
    stats,
    to_gliner,
    write_bio,
)
from skillkit.promptgen import (
    ContextedEntity,
    PromptExample,
    Style,
    extract_context,
    gen_extract_style,
    gen_ner_style,
    gen_skill_llm,
    wrap_sentinels,
)
from skillkit.parser import (
    Failed,
    FailReason,
    Parsed,
    RawGeneration,
    parse_extract_style,
    parse_ner_style,
    parse_skill_llm,
)
from skillkit.aligner import AlignedPrediction, Hallucination, align, align_extract_style
from skillkit.evaluator import EvalReport, FailureRecord, render_report, score

__version__ = "0.1.0"

__all__ = [
    "AlignedPrediction",
    "BioFormatError",
    "BioLayout",
    "ContextedEntity",
    "Corpus",
    "EntitySpan",
    "EntityType",
    "EvalReport",
    "FailReason",
    "Failed",
    "FailureRecord",
    "Hallucination",
    "Parsed",
    "PromptExample",
    "RawGeneration",
    "Sentence",
    "Style",
    "align",
    "align_extract_style",
    "extract_context",
    "gen_extract_style",
    "gen_ner_style",
    "gen_skill_llm",
    "load_corpus",
    "parse_extract_style",
    "parse_ner_style",
    "parse_skill_llm",
    "read_bio",
    "render_report",
    "score",
    "stats",
    "to_gliner",
    "wrap_sentinels",
    "write_bio",
]
