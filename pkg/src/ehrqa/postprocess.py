"""Answer merging, yes/no mapping, and the two-stage comprehensive
extraction that drives a reader backend over whole documents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .core import AnnotatedDocument, Sentence, Span, merge_adjacent_spans, sentence_containing, split_sentences
from .errors import (
    ConfigError,
    OracleMisuseError,
    PartialResultError,
    PipelineError,
    ProtocolError,
    TransportError,
)
from .reader import ReaderBackend, ReaderInput, decode_span, extraction_qid
from .templates import (
    NER,
    QUERY_RIGHT,
    TemplateRegistry,
    generate_ner_questions,
    generate_relation_questions,
    instantiate,
)

DEFAULT_SEPARATOR = "，"


@dataclass(frozen=True)
class AnswerPart:
    """One sentence-level piece of a final answer, in document coordinates."""

    sentence_index: int
    span: Span
    text: str


@dataclass(frozen=True)
class FinalAnswer:
    """The merged, possibly discontinuous answer to one question."""

    question: str
    doc_id: str
    answerable: bool
    text: str
    parts: tuple[AnswerPart, ...]

    def __post_init__(self):
        if self.answerable != bool(self.parts):
            raise PipelineError("answerable must mirror a non-empty part list")


@dataclass(frozen=True)
class ExtractionRecord:
    """One extracted key/value pair; empty answers are never recorded."""

    doc_id: str
    key: str
    value: FinalAnswer
    group: str | None = None

    def __post_init__(self):
        if not self.value.answerable:
            raise PipelineError("extraction records must carry answerable values")

    def to_json(self) -> dict:
        record = {
            "doc_id": self.doc_id,
            "key": self.key,
            "answer": self.value.text,
            "parts": [
                {
                    "sentence_index": p.sentence_index,
                    "start": p.span.start,
                    "end": p.span.end,
                    "text": p.text,
                }
                for p in self.value.parts
            ],
        }
        if self.group is not None:
            record["group"] = self.group
        return record


def merge_answers(
    per_sentence: list[tuple[int, tuple[Span, str] | None]],
    sentences: list[Sentence] | None = None,
    separator: str = DEFAULT_SEPARATOR,
    question: str = "",
    doc_id: str = "",
) -> FinalAnswer:
    """Concatenate per-sentence answers in sentence order with the separator.

    Input spans are sentence-local; when the sentence list is provided the
    recorded parts are rebased to document coordinates.  All-empty input
    yields an unanswerable result with empty text.
    """
    parts: list[AnswerPart] = []
    for index, payload in sorted(per_sentence, key=lambda item: item[0]):
        if payload is None:
            continue
        span, text = payload
        if sentences is not None:
            span = span.shift(sentences[index].span.start)
        parts.append(AnswerPart(sentence_index=index, span=span, text=text))
    return FinalAnswer(
        question=question,
        doc_id=doc_id,
        answerable=bool(parts),
        text=separator.join(p.text for p in parts),
        parts=tuple(parts),
    )


YES = "yes"
NO = "no"
UNANSWERABLE = "unanswerable"


def to_yes_no(ans: FinalAnswer, negation_lexicon: frozenset[str] | set[str]) -> str:
    """Map an extracted answer to yes/no/unanswerable: "no" when any
    negation word occurs in the answer text (raw substring match, no word
    segmentation), "yes" otherwise."""
    if not negation_lexicon:
        raise ConfigError("yes/no mapping requires a non-empty negation lexicon")
    if not ans.answerable:
        return UNANSWERABLE
    if any(word in ans.text for word in negation_lexicon):
        return NO
    return YES


# --- two-stage comprehensive extraction -------------------------------------


def _ask(
    question: str,
    doc_id: str,
    sentences: list[Sentence],
    backend: ReaderBackend,
    config,
) -> FinalAnswer:
    """Split -> read -> decode -> merge for one question over one document."""
    inputs = [
        ReaderInput(
            qid=extraction_qid(doc_id, s.span, question),
            question=question,
            context=s.text,
        )
        for s in sentences
    ]
    outputs = backend.read_batch(inputs)
    per_sentence: list[tuple[int, tuple[Span, str] | None]] = []
    for sent, out in zip(sentences, outputs):
        span = decode_span(out, config.verifier)
        if span is None:
            per_sentence.append((sent.index, None))
        else:
            per_sentence.append((sent.index, (span, span.slice(sent.text))))
    return merge_answers(
        per_sentence,
        sentences=sentences,
        separator=config.separator,
        question=question,
        doc_id=doc_id,
    )


def _selected_templates(registry: TemplateRegistry, doc_kind: str, config) -> TemplateRegistry | None:
    kind_map = config.doc_kind_map
    if not kind_map:
        return registry
    if doc_kind not in kind_map:
        return None
    ids = kind_map[doc_kind].get("templates")
    return registry.subset(ids) if ids else registry


def extract_document(
    doc_text: str,
    doc_kind: str,
    doc_id: str,
    registry: TemplateRegistry,
    types,
    backend: ReaderBackend,
    config,
    diagnostics: list[str] | None = None,
) -> list[ExtractionRecord]:
    """Comprehensive extraction over one document.

    Stage 1 runs the NER-like questions (per-sentence reads, merged) and
    keeps their non-empty results as records; stage 2 instantiates every
    applicable relation template with the stage-1 entities (plus any
    configured fed-in fill words); stage 3 runs those questions the same
    way.  Empty answers are dismissed.  Records are sorted by (key,
    document position).  Reader failures surface as PartialResultError
    carrying the records completed so far.
    """
    selected = _selected_templates(registry, doc_kind, config)
    if selected is None:
        if diagnostics is not None:
            diagnostics.append(f"doc {doc_id!r}: no templates registered for kind {doc_kind!r}")
        return []
    if config.enable_splitting:
        sentences = split_sentences(doc_text, config.sentence_delimiters)
    else:
        sentences = split_sentences(doc_text, frozenset())
    if not sentences:
        return []

    records: list[ExtractionRecord] = []
    current_qid = ""

    def guarded_ask(question: str) -> FinalAnswer:
        nonlocal current_qid
        current_qid = extraction_qid(doc_id, sentences[0].span, question)
        return _ask(question, doc_id, sentences, backend, config)

    try:
        # stage 1: direct NER-like questions; their answers double as records
        stage1_entities: list[tuple[str, str, Span]] = []  # (type, text, span)
        for entity_type in sorted(types.ner_queryable_types):
            for template in selected.ner_for(entity_type):
                answer = guarded_ask(template.pattern)
                if not answer.answerable:
                    continue
                records.append(
                    ExtractionRecord(
                        doc_id=doc_id, key=template.pattern, value=answer, group=entity_type
                    )
                )
                stage1_entities.extend(
                    (entity_type, part.text, part.span) for part in answer.parts
                )

        # stage 2: instantiate relation templates from entities + fed-in words
        fills: list[tuple[str, str]] = [(t, text) for t, text, _ in stage1_entities]
        kind_cfg = config.doc_kind_map.get(doc_kind, {}) if config.doc_kind_map else {}
        for fill_type, words in sorted(kind_cfg.get("fill_words", {}).items()):
            fills.extend((fill_type, w) for w in words)

        questions: list[tuple[str, str]] = []  # (question, relation class)
        seen: set[str] = set()
        for template in selected.templates:
            if template.direction == NER:
                continue
            left_type, _, right_type = template.relation_class.partition("-")
            fill_side = left_type if template.direction == QUERY_RIGHT else right_type
            for fill_type, fill_text in fills:
                if fill_type != fill_side:
                    continue
                question = instantiate(template, fill_text)
                if question in seen:
                    continue
                seen.add(question)
                questions.append((question, template.relation_class))

        # stage 3: run every instantiated question; dismiss empty answers
        for question, class_name in questions:
            answer = guarded_ask(question)
            if answer.answerable:
                records.append(
                    ExtractionRecord(doc_id=doc_id, key=question, value=answer, group=class_name)
                )
    except (TransportError, ProtocolError, OracleMisuseError) as exc:
        raise PartialResultError(f"reader failed: {exc}", records, current_qid) from exc

    records.sort(key=lambda r: (r.key, r.value.parts[0].span.start))
    return records


def build_gold_records(
    doc: AnnotatedDocument,
    registry: TemplateRegistry,
    types,
    config,
) -> list[ExtractionRecord]:
    """The gold standard for comprehensive extraction, straight from the
    annotations: per generated question, the union of its answer spans,
    adjacent ones merged, concatenated in document order with the
    configured separator."""
    selected = _selected_templates(registry, doc.doc_kind, config)
    if selected is None:
        return []
    sentences = split_sentences(doc.text, config.sentence_delimiters)
    drafts = generate_ner_questions(doc, selected, types) + generate_relation_questions(
        doc, selected
    )
    by_question: dict[str, tuple[str, list[Span]]] = {}
    for draft in drafts:
        group = draft.answer_entity_type if draft.direction == NER else None
        if group is None:
            template = selected.by_id(draft.template_id)
            group = template.relation_class
        spans = by_question.setdefault(draft.question, (group, []))[1]
        for span in draft.answer_spans:
            if span not in spans:
                spans.append(span)

    records = []
    for question, (group, spans) in by_question.items():
        merged = merge_adjacent_spans(spans, doc.text, config.bridge_chars)
        parts = tuple(
            AnswerPart(
                sentence_index=sentence_containing(span, sentences).index,
                span=span,
                text=span.slice(doc.text),
            )
            for span in merged
        )
        records.append(
            ExtractionRecord(
                doc_id=doc.doc_id,
                key=question,
                value=FinalAnswer(
                    question=question,
                    doc_id=doc.doc_id,
                    answerable=True,
                    text=config.separator.join(p.text for p in parts),
                    parts=parts,
                ),
                group=group,
            )
        )
    records.sort(key=lambda r: (r.key, r.value.parts[0].span.start))
    return records


def write_records(records: list[ExtractionRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_json(), ensure_ascii=False, sort_keys=True))
            handle.write("\n")


def read_records(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
