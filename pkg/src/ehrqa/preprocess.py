"""Dataset preprocessing: merge adjacent answer spans, split contexts until
every example carries at most one answer span, construct impossible
questions with plausible answers, and emit SQuAD-2.0 files.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

from .core import (
    AnnotatedDocument,
    Sentence,
    Span,
    project_span,
    merge_adjacent_spans,
    sentence_containing,
    split_sentences,
)
from .errors import ConfigError, PipelineError
from .templates import NER, QUERY_RIGHT, QuestionDraft, relation_class_of

PARAGRAPH = "paragraph"
SENTENCE = "sentence"
CLAUSE = "clause"


@dataclass(frozen=True)
class Answer:
    """An answer string anchored at a character offset of its context."""

    text: str
    answer_start: int


@dataclass(frozen=True)
class QAExample:
    """One SQuAD-2.0-shaped question/context unit.

    ``context_span`` locates the context inside the source document;
    ``granularity`` records how far the context was split.  Answerable
    examples carry exactly one answer after preprocessing; impossible ones
    carry none and may record plausible (same-type distractor) answers.
    """

    qid: str
    doc_id: str
    question: str
    context: str
    granularity: str
    context_span: Span
    answers: tuple[Answer, ...]
    is_impossible: bool
    plausible_answers: tuple[Answer, ...] = ()
    provenance: dict = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        if self.is_impossible != (len(self.answers) == 0):
            raise PipelineError("is_impossible must mirror an empty answer list")
        for ans in self.answers + self.plausible_answers:
            got = self.context[ans.answer_start : ans.answer_start + len(ans.text)]
            if got != ans.text:
                raise PipelineError(
                    f"answer {ans.text!r} does not match context slice {got!r} "
                    f"at {ans.answer_start}"
                )


@dataclass(frozen=True)
class DatasetSplit:
    """Train/dev/test partition; a document's examples never cross splits."""

    train: tuple[QAExample, ...]
    dev: tuple[QAExample, ...]
    test: tuple[QAExample, ...]
    seed: int
    ratios: tuple[float, float, float]


@dataclass
class Diagnostics:
    """Warning records accumulated during generation (never fatal)."""

    warnings: list[str] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.warnings.append(message)


def _tile(text: str, cut_after: list[int]) -> list[Span]:
    """Tile [0, len(text)) into spans cut after each index in cut_after."""
    spans = []
    start = 0
    for cut in cut_after:
        spans.append(Span(start, cut + 1))
        start = cut + 1
    if start < len(text):
        spans.append(Span(start, len(text)))
    return spans


def _clause_contexts(
    sentence: Sentence,
    spans_in_sentence: list[Span],
    clause_delimiters: frozenset[str],
) -> list[Span]:
    """Clause sub-spans of a sentence (document coordinates), cutting only at
    clause delimiters that do not fall inside any answer span."""
    cuts = []
    for i, ch in enumerate(sentence.text):
        if ch not in clause_delimiters:
            continue
        doc_i = sentence.span.start + i
        if any(s.start <= doc_i < s.end for s in spans_in_sentence):
            continue  # never cut inside an answer span
        cuts.append(i)
    return [local.shift(sentence.span.start) for local in _tile(sentence.text, cuts)]


def resolve_multispan(
    draft: QuestionDraft,
    doc: AnnotatedDocument,
    config,
    diagnostics: Diagnostics | None = None,
) -> list[QAExample]:
    """Turn one question draft into QAExamples with at most one answer each.

    Adjacent answer spans are merged first.  A single remaining span yields
    one paragraph-level example.  Multiple spans trigger sentence splitting
    (then clause splitting where a sentence still holds several), emitting
    one example per answerable piece; answer-free pieces become impossible
    examples only when the config asks for natural empties.  If multiplicity
    survives clause splitting, the first span is kept and a warning recorded.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    merged = merge_adjacent_spans(list(draft.answer_spans), doc.text, config.bridge_chars)
    base_prov = {
        "template_id": draft.template_id,
        "filled": draft.filled_entity if draft.filled_entity is not None else draft.answer_entity_type,
        "direction": draft.direction,
        "source": draft.source,
        "kind": "ner" if draft.direction == NER else "relation",
    }

    def example(context_span: Span, granularity: str, span: Span | None) -> QAExample:
        context = context_span.slice(doc.text)
        answers: tuple[Answer, ...] = ()
        if span is not None:
            local = span.shift(-context_span.start)
            answers = (Answer(text=local.slice(context), answer_start=local.start),)
        return QAExample(
            qid="",
            doc_id=doc.doc_id,
            question=draft.question,
            context=context,
            granularity=granularity,
            context_span=context_span,
            answers=answers,
            is_impossible=span is None,
            provenance=dict(base_prov),
        )

    if not merged:
        diagnostics.warn(f"doc {doc.doc_id!r}: draft {draft.question!r} carries no answer spans")
        return []

    def keep_empty(span: Span) -> bool:
        if not config.include_natural_empties:
            return False
        fraction = getattr(config, "natural_empty_fraction", 1.0)
        if fraction >= 1.0:
            return True
        basis = f"{doc.doc_id}|{draft.question}|{span.start}-{span.end}"
        digest = hashlib.sha256(basis.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") / 2**64 < fraction

    whole = Span(0, len(doc.text))
    if len(merged) == 1 or not config.enable_splitting:
        if len(merged) > 1:
            diagnostics.warn(
                f"doc {doc.doc_id!r}: splitting disabled, kept first of {len(merged)} "
                f"answer spans for {draft.question!r}"
            )
        return [example(whole, PARAGRAPH, merged[0])]

    out: list[QAExample] = []
    sentences = split_sentences(doc.text, config.sentence_delimiters)
    for sent in sentences:
        inside = [m for m in merged if project_span(m, sent) is not None]
        if len(inside) <= 1:
            if inside:
                out.append(example(sent.span, SENTENCE, inside[0]))
            elif keep_empty(sent.span):
                out.append(example(sent.span, SENTENCE, None))
            continue
        # clause-level fallback for sentences still holding several spans
        for clause_span in _clause_contexts(sent, inside, config.clause_delimiters):
            clause_sent = Sentence(index=sent.index, span=clause_span, text=clause_span.slice(doc.text))
            c_inside = [m for m in inside if project_span(m, clause_sent) is not None]
            if len(c_inside) > 1:
                diagnostics.warn(
                    f"doc {doc.doc_id!r}: {len(c_inside)} answer spans within one clause for "
                    f"{draft.question!r}; kept the first"
                )
            if c_inside:
                out.append(example(clause_span, CLAUSE, c_inside[0]))
            elif keep_empty(clause_span):
                out.append(example(clause_span, CLAUSE, None))
    return out


def construct_impossible(
    doc: AnnotatedDocument,
    drafts: list[QuestionDraft],
    config,
) -> list[QAExample]:
    """Build impossible questions with plausible answers.

    For each ordered pair of same-class dependencies whose left entities
    differ, the question generated from pair A is bound to the sentence
    containing pair B's answer, with pair B's answer recorded as the
    plausible answer; suppressed when any of pair A's true answers also
    occurs in that sentence.
    """
    if not config.enable_plausible:
        return []
    sentences = split_sentences(doc.text, config.sentence_delimiters)
    by_class: dict[str, list] = {}
    for dep in doc.dependencies:
        by_class.setdefault(relation_class_of(dep, doc).name, []).append(dep)
    by_source: dict[str, list[QuestionDraft]] = {}
    for draft in drafts:
        by_source.setdefault(draft.source, []).append(draft)

    out: list[QAExample] = []
    emitted: set[tuple[str, str | None, str, int]] = set()
    for deps in by_class.values():
        if len(deps) < 2:
            continue
        for dep_a in deps:
            drafts_a = by_source.get(f"{dep_a.from_entity}->{dep_a.to_entity}", [])
            if not drafts_a:
                continue
            for dep_b in deps:
                if dep_b is dep_a or dep_b.from_entity == dep_a.from_entity:
                    continue
                for draft in drafts_a:
                    if draft.direction == QUERY_RIGHT:
                        b_answer = doc.entity(dep_b.to_entity)
                    else:
                        b_answer = doc.entity(dep_b.from_entity)
                    sent = sentence_containing(b_answer.span, sentences)
                    key = (draft.question, draft.filled_entity, draft.template_id, sent.index)
                    if key in emitted:
                        continue
                    true_texts = [s.slice(doc.text) for s in draft.answer_spans]
                    if any(t in sent.text for t in true_texts):
                        continue
                    local = project_span(b_answer.span, sent)
                    assert local is not None
                    emitted.add(key)
                    out.append(
                        QAExample(
                            qid="",
                            doc_id=doc.doc_id,
                            question=draft.question,
                            context=sent.text,
                            granularity=SENTENCE,
                            context_span=sent.span,
                            answers=(),
                            is_impossible=True,
                            plausible_answers=(
                                Answer(text=local.slice(sent.text), answer_start=local.start),
                            ),
                            provenance={
                                "template_id": draft.template_id,
                                "filled": draft.filled_entity
                                if draft.filled_entity is not None
                                else draft.answer_entity_type,
                                "direction": draft.direction,
                                "source": draft.source,
                                "kind": "impossible",
                            },
                        )
                    )
    return out


def _qid(example: QAExample) -> str:
    basis = "|".join(
        [
            example.doc_id,
            example.provenance.get("template_id", ""),
            str(example.provenance.get("filled", "")),
            example.provenance.get("direction", ""),
            example.granularity,
            f"{example.context_span.start}-{example.context_span.end}",
        ]
    )
    return hashlib.sha256(basis.encode("utf-8")).hexdigest()[:16]


def assemble_dataset(
    docs: list[AnnotatedDocument],
    registry,
    types,
    config,
    diagnostics: Diagnostics | None = None,
) -> list[QAExample]:
    """Full per-corpus generation: NER drafts, relation drafts (both through
    resolve_multispan) and constructed impossible examples, with
    content-addressed qids.

    When a constructed impossible example and a natural empty coincide on
    the same question and sentence, the constructed one (which carries the
    plausible answer) wins.  Any other qid collision is an internal error.
    """
    from .templates import generate_ner_questions, generate_relation_questions

    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    examples: list[QAExample] = []
    for doc in docs:
        doc_examples: list[QAExample] = []
        ner_drafts = generate_ner_questions(doc, registry, types)
        rel_drafts = generate_relation_questions(
            doc, registry, diagnostics=diagnostics.warnings
        )
        for draft in ner_drafts + rel_drafts:
            doc_examples.extend(resolve_multispan(draft, doc, config, diagnostics))
        doc_examples.extend(construct_impossible(doc, rel_drafts, config))
        examples.extend(doc_examples)

    by_qid: dict[str, QAExample] = {}
    order: list[str] = []
    for ex in examples:
        qid = _qid(ex)
        ex = replace(ex, qid=qid)
        if qid not in by_qid:
            by_qid[qid] = ex
            order.append(qid)
            continue
        prev = by_qid[qid]
        same_unit = prev.question == ex.question and prev.context == ex.context
        if same_unit and prev.is_impossible and ex.is_impossible:
            # natural empty vs constructed impossible: keep the plausible one
            if ex.plausible_answers and not prev.plausible_answers:
                by_qid[qid] = ex
            continue
        raise PipelineError(
            f"qid collision for {qid} between {prev.question!r} and {ex.question!r} "
            f"(doc {ex.doc_id!r}); generation is expected to be deterministic"
        )
    return [by_qid[qid] for qid in order]


def split_dataset(
    examples: list[QAExample],
    ratios: tuple[float, float, float],
    seed: int,
) -> DatasetSplit:
    """Partition by document: docs are ordered by a seeded hash of doc_id and
    assigned to splits by cumulative quota, so all of a document's examples
    travel together and proportions track the ratios."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")
    doc_ids: list[str] = []
    for ex in examples:
        if ex.doc_id not in doc_ids:
            doc_ids.append(ex.doc_id)

    def doc_key(doc_id: str) -> str:
        return hashlib.sha256(f"{seed}:{doc_id}".encode("utf-8")).hexdigest()

    shuffled = sorted(doc_ids, key=doc_key)
    n = len(shuffled)
    n_train = math.floor(ratios[0] * n + 1e-12)
    n_dev = math.floor((ratios[0] + ratios[1]) * n + 1e-12) - n_train
    assignment: dict[str, str] = {}
    for i, doc_id in enumerate(shuffled):
        assignment[doc_id] = "train" if i < n_train else "dev" if i < n_train + n_dev else "test"
    buckets: dict[str, list[QAExample]] = {"train": [], "dev": [], "test": []}
    for ex in examples:
        buckets[assignment[ex.doc_id]].append(ex)
    return DatasetSplit(
        train=tuple(buckets["train"]),
        dev=tuple(buckets["dev"]),
        test=tuple(buckets["test"]),
        seed=seed,
        ratios=tuple(ratios),
    )


# --- SQuAD-2.0 serialization ----------------------------------------------


def _answers_json(answers: tuple[Answer, ...]) -> list[dict]:
    return [{"text": a.text, "answer_start": a.answer_start} for a in answers]


def squad_dict(examples: list[QAExample]) -> dict:
    """SQuAD-2.0 structure; consecutive examples sharing (doc, context) are
    grouped into one paragraph so parsing restores the exact input order."""
    data: list[dict] = []
    for ex in examples:
        if not data or data[-1]["title"] != ex.doc_id:
            data.append({"title": ex.doc_id, "paragraphs": []})
        paragraphs = data[-1]["paragraphs"]
        if (
            not paragraphs
            or paragraphs[-1]["context"] != ex.context
            or paragraphs[-1]["_context_span"] != [ex.context_span.start, ex.context_span.end]
        ):
            paragraphs.append(
                {
                    "context": ex.context,
                    "_context_span": [ex.context_span.start, ex.context_span.end],
                    "qas": [],
                }
            )
        qa = {
            "id": ex.qid,
            "question": ex.question,
            "answers": _answers_json(ex.answers),
            "is_impossible": ex.is_impossible,
            "granularity": ex.granularity,
            "context_span": [ex.context_span.start, ex.context_span.end],
            "provenance": dict(ex.provenance),
        }
        if ex.is_impossible:
            qa["plausible_answers"] = _answers_json(ex.plausible_answers)
        paragraphs[-1]["qas"].append(qa)
    for entry in data:
        for para in entry["paragraphs"]:
            del para["_context_span"]
    return {"version": "v2.0", "data": data}


def emit_squad(examples: list[QAExample], path: str) -> None:
    """Write the SQuAD-2.0 file; parsing it back yields value-equal examples."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(squad_dict(examples), handle, ensure_ascii=False, indent=1)
        handle.write("\n")


def parse_squad(path: str) -> list[QAExample]:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    examples: list[QAExample] = []
    for entry in payload.get("data", []):
        doc_id = entry.get("title", "")
        for para in entry.get("paragraphs", []):
            context = para["context"]
            for qa in para.get("qas", []):
                span = qa.get("context_span", [0, len(context)])
                examples.append(
                    QAExample(
                        qid=qa["id"],
                        doc_id=doc_id,
                        question=qa["question"],
                        context=context,
                        granularity=qa.get("granularity", PARAGRAPH),
                        context_span=Span(span[0], span[1]),
                        answers=tuple(
                            Answer(a["text"], a["answer_start"]) for a in qa.get("answers", [])
                        ),
                        is_impossible=qa.get("is_impossible", False),
                        plausible_answers=tuple(
                            Answer(a["text"], a["answer_start"])
                            for a in qa.get("plausible_answers", [])
                        ),
                        provenance=dict(qa.get("provenance", {})),
                    )
                )
    return examples
