import pytest

from ehrqa.core import Span, document_from_record, split_sentences
from ehrqa.errors import ConfigError, PartialResultError
from ehrqa.postprocess import (
    AnswerPart,
    FinalAnswer,
    build_gold_records,
    extract_document,
    merge_answers,
    to_yes_no,
)
from ehrqa.reader import CorpusOracleBackend, ReaderBackend

from synth import build_corpus, splitting_fixture_doc


def test_merge_answers_discontinuous():
    merged = merge_answers(
        [
            (0, (Span(0, 34), "fluid accumulation, gas accumulation")),
            (1, None),
            (2, (Span(0, 17), "fat gap is turbid")),
        ],
        separator="，",
    )
    assert merged.answerable
    assert merged.text == "fluid accumulation, gas accumulation，fat gap is turbid"
    assert len(merged.parts) == 2


def test_merge_answers_all_empty_is_unanswerable():
    merged = merge_answers([(0, None), (1, None)])
    assert not merged.answerable
    assert merged.text == ""
    assert merged.parts == ()


def test_merge_answers_single_part_verbatim():
    merged = merge_answers([(0, (Span(2, 5), "abc"))], separator="，")
    assert merged.text == "abc"
    assert "，" not in merged.text


def test_merge_answers_separator_count():
    merged = merge_answers(
        [(0, (Span(0, 1), "a")), (1, None), (2, (Span(0, 1), "b")), (3, (Span(0, 1), "c"))],
        separator="|",
    )
    assert merged.text.count("|") == 2  # non-empty parts minus one
    assert not merged.text.startswith("|") and not merged.text.endswith("|")


def test_merge_answers_orders_by_sentence():
    merged = merge_answers(
        [(2, (Span(0, 1), "b")), (0, (Span(0, 1), "a"))],
        separator="，",
    )
    assert merged.text == "a，b"


def test_merge_answers_rebases_to_document():
    sentences = split_sentences("abc。defg。", frozenset({"。"}))
    merged = merge_answers([(1, (Span(0, 2), "de"))], sentences=sentences)
    assert merged.parts[0].span == Span(4, 6)


def test_to_yes_no():
    yes = FinalAnswer(question="q", doc_id="d", answerable=True, text="hypertension",
                      parts=(AnswerPart(0, Span(0, 12), "hypertension"),))
    no = FinalAnswer(question="q", doc_id="d", answerable=True, text="no hypertension",
                     parts=(AnswerPart(0, Span(0, 15), "no hypertension"),))
    empty = FinalAnswer(question="q", doc_id="d", answerable=False, text="", parts=())
    lexicon = {"no ", "denies"}
    assert to_yes_no(yes, lexicon) == "yes"
    assert to_yes_no(no, lexicon) == "no"
    assert to_yes_no(empty, lexicon) == "unanswerable"
    with pytest.raises(ConfigError):
        to_yes_no(yes, set())


def test_to_yes_no_monotone_in_lexicon():
    answer = FinalAnswer(question="q", doc_id="d", answerable=True, text="denies smoking",
                         parts=(AnswerPart(0, Span(0, 14), "denies smoking"),))
    small = {"denies"}
    large = {"denies", "without", "no "}
    assert to_yes_no(answer, small) == "no"
    assert to_yes_no(answer, large) == "no"


# --- extraction ---------------------------------------------------------------


def test_extract_document_reconstructs_gold(config, types, registry):
    for record in build_corpus(6, seed=33):
        doc = document_from_record(record, types)
        backend = CorpusOracleBackend(doc, registry, types, config)
        records = extract_document(
            doc.text, doc.doc_kind, doc.doc_id, registry, types, backend, config
        )
        gold = build_gold_records(doc, registry, types, config)
        assert [(r.key, r.value.text) for r in records] == [
            (g.key, g.value.text) for g in gold
        ]


def test_extract_document_splitting_fixture(config, types, registry):
    doc = document_from_record(splitting_fixture_doc(), types)
    backend = CorpusOracleBackend(doc, registry, types, config)
    records = extract_document(
        doc.text, doc.doc_kind, doc.doc_id, registry, types, backend, config
    )
    by_key = {r.key: r.value.text for r in records}
    assert by_key["What abnormalities are found in the liver?"] == "effusion，calcification"


def test_extract_document_unknown_kind_diagnostic(config, types, registry):
    doc = document_from_record(splitting_fixture_doc(), types)
    backend = CorpusOracleBackend(doc, registry, types, config)
    notes: list[str] = []
    records = extract_document(
        doc.text, "discharge_note", doc.doc_id, registry, types, backend, config,
        diagnostics=notes,
    )
    assert records == []
    assert notes and "discharge_note" in notes[0]


def test_extract_document_all_unanswerable_yields_empty(config, types, registry):
    record = {
        "doc_id": "plain",
        "doc_kind": "ct_report",
        "text": "unremarkable study today。",
        "entities": [],
        "dependencies": [],
    }
    doc = document_from_record(record, types)
    backend = CorpusOracleBackend(doc, registry, types, config)
    records = extract_document(
        doc.text, doc.doc_kind, doc.doc_id, registry, types, backend, config
    )
    assert records == []


class _ExplodingBackend(ReaderBackend):
    def __init__(self, inner, explode_after):
        self.inner = inner
        self.calls = 0
        self.explode_after = explode_after

    def read_batch(self, inputs):
        self.calls += 1
        if self.calls > self.explode_after:
            from ehrqa.errors import TransportError

            raise TransportError("backend went away", attempts=1)
        return self.inner.read_batch(inputs)


def test_extract_document_partial_result(config, types, registry):
    doc = document_from_record(splitting_fixture_doc(), types)
    backend = _ExplodingBackend(CorpusOracleBackend(doc, registry, types, config), 2)
    with pytest.raises(PartialResultError) as err:
        extract_document(doc.text, doc.doc_kind, doc.doc_id, registry, types, backend, config)
    assert err.value.failing_qid
    assert isinstance(err.value.records, list)


def test_gold_records_sorted_and_answerable(config, types, registry):
    doc = document_from_record(splitting_fixture_doc(), types)
    gold = build_gold_records(doc, registry, types, config)
    keys = [g.key for g in gold]
    assert keys == sorted(keys)
    assert all(g.value.answerable for g in gold)
