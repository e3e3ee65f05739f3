"""ehrqa: dataset generation, span extraction, and evaluation for
extractive question answering over annotated clinical-style text."""

from .config import PipelineConfig
from .core import (
    AnnotatedDocument,
    Dependency,
    Entity,
    RelationClass,
    Sentence,
    Span,
    TypeRegistry,
    load_documents,
    merge_adjacent_spans,
    project_span,
    split_sentences,
)
from .metrics import EvalItem, EvalReport, evaluate_items
from .postprocess import ExtractionRecord, FinalAnswer, extract_document, merge_answers, to_yes_no
from .preprocess import (
    Answer,
    DatasetSplit,
    QAExample,
    assemble_dataset,
    emit_squad,
    parse_squad,
    split_dataset,
)
from .reader import (
    NoiseSpec,
    ReaderInput,
    ReaderOutput,
    VerificationScores,
    VerifierConfig,
    compute_scores,
    decode_span,
    noisy_oracle_read,
    oracle_read,
    remote_read,
)
from .templates import (
    QuestionDraft,
    QuestionTemplate,
    TemplateRegistry,
    generate_ner_questions,
    generate_relation_questions,
    instantiate,
    relation_class_of,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedDocument",
    "Answer",
    "DatasetSplit",
    "Dependency",
    "Entity",
    "EvalItem",
    "EvalReport",
    "ExtractionRecord",
    "FinalAnswer",
    "NoiseSpec",
    "PipelineConfig",
    "QAExample",
    "QuestionDraft",
    "QuestionTemplate",
    "ReaderInput",
    "ReaderOutput",
    "RelationClass",
    "Sentence",
    "Span",
    "TemplateRegistry",
    "TypeRegistry",
    "VerificationScores",
    "VerifierConfig",
    "assemble_dataset",
    "compute_scores",
    "decode_span",
    "emit_squad",
    "evaluate_items",
    "extract_document",
    "generate_ner_questions",
    "generate_relation_questions",
    "instantiate",
    "load_documents",
    "merge_adjacent_spans",
    "merge_answers",
    "noisy_oracle_read",
    "oracle_read",
    "parse_squad",
    "project_span",
    "relation_class_of",
    "remote_read",
    "split_dataset",
    "split_sentences",
    "to_yes_no",
]
