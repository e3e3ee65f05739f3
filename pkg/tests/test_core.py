import pytest
from hypothesis import given, strategies as st

from ehrqa.core import (
    Sentence,
    Span,
    document_from_record,
    merge_adjacent_spans,
    project_span,
    split_sentences,
)
from ehrqa.errors import (
    AnnotationError,
    BoundaryViolationError,
    InvalidSpanError,
)

BRIDGE = frozenset({",", " "})


def test_span_rejects_degenerate():
    with pytest.raises(InvalidSpanError):
        Span(3, 3)
    with pytest.raises(InvalidSpanError):
        Span(5, 2)
    with pytest.raises(InvalidSpanError):
        Span(-1, 4)


def test_span_out_of_bounds_for_context():
    with pytest.raises(InvalidSpanError):
        merge_adjacent_spans([Span(0, 30)], "short", BRIDGE)


def test_merge_bridged_spans():
    context = "effusion, pneumatosis seen"
    assert merge_adjacent_spans([Span(0, 8), Span(10, 21)], context, BRIDGE) == [Span(0, 21)]


def test_merge_single_span_fixed_point():
    assert merge_adjacent_spans([Span(0, 8)], "effusion." * 2, BRIDGE) == [Span(0, 8)]


def test_merge_keeps_non_bridged_gap():
    context = "effusion near pneumatosis"
    spans = [Span(0, 8), Span(14, 25)]
    assert merge_adjacent_spans(spans, context, BRIDGE) == spans


def test_merge_handles_overlap_and_containment():
    context = "abcdefghij"
    assert merge_adjacent_spans([Span(0, 5), Span(3, 8)], context, frozenset()) == [Span(0, 8)]
    assert merge_adjacent_spans([Span(0, 8), Span(2, 4)], context, frozenset()) == [Span(0, 8)]


spans_strategy = st.lists(
    st.tuples(st.integers(0, 39), st.integers(1, 8)).map(lambda t: Span(t[0], t[0] + t[1])),
    min_size=0,
    max_size=8,
)


@given(spans=spans_strategy, data=st.data())
def test_merge_idempotent_and_permutation_invariant(spans, data):
    context = "ab, cd ef," * 5  # 50 chars mixing bridge and letter characters
    merged = merge_adjacent_spans(spans, context, BRIDGE)
    assert merge_adjacent_spans(merged, context, BRIDGE) == merged
    shuffled = data.draw(st.permutations(spans))
    assert merge_adjacent_spans(list(shuffled), context, BRIDGE) == merged
    # output is sorted and disjoint
    for left, right in zip(merged, merged[1:]):
        assert left.end < right.start


@given(spans=spans_strategy)
def test_merge_coverage_is_monotone(spans):
    context = "xy,z " * 10
    merged = merge_adjacent_spans(spans, context, BRIDGE)
    for span in spans:
        for pos in range(span.start, span.end):
            assert any(m.start <= pos < m.end for m in merged)


def test_split_sentences_examples():
    parts = split_sentences("A。B；C", frozenset({"。", "；"}))
    assert [(s.text, (s.span.start, s.span.end)) for s in parts] == [
        ("A。", (0, 2)),
        ("B；", (2, 4)),
        ("C", (4, 5)),
    ]
    assert len(split_sentences("no delimiter here", frozenset({"。"}))) == 1
    only = split_sentences("X。", frozenset({"。"}))
    assert [(s.text, (s.span.start, s.span.end)) for s in only] == [("X。", (0, 2))]
    assert split_sentences("", frozenset({"。"})) == []


@given(st.text(alphabet="ab。；\n", min_size=1, max_size=60))
def test_split_sentences_tiles_text(text):
    parts = split_sentences(text)
    assert parts[0].span.start == 0
    assert parts[-1].span.end == len(text)
    for prev, nxt in zip(parts, parts[1:]):
        assert prev.span.end == nxt.span.start
        assert nxt.index == prev.index + 1
    assert "".join(p.text for p in parts) == text


def test_project_span_cases():
    sentence = Sentence(index=0, span=Span(2, 4), text="xy")
    assert project_span(Span(4, 5), sentence) is None
    assert project_span(Span(2, 3), sentence) == Span(0, 1)
    with pytest.raises(BoundaryViolationError):
        project_span(Span(3, 5), sentence)


@given(start=st.integers(0, 20), length=st.integers(1, 10), offset=st.integers(0, 15))
def test_project_round_trip(start, length, offset):
    sentence = Sentence(index=0, span=Span(offset, offset + 30), text="x" * 30)
    span = Span(offset + start, offset + start + length)
    local = project_span(span, sentence)
    assert local is not None
    assert local.shift(sentence.span.start) == span


# --- ingestion --------------------------------------------------------------


def _record(**overrides):
    base = {
        "doc_id": "d1",
        "doc_kind": "ct_report",
        "text": "the liver shows effusion。",
        "entities": [
            {"id": "e0", "text": "liver", "type": "body_part", "start": 4},
            {"id": "e1", "text": "effusion", "type": "abnormality", "start": 16},
        ],
        "dependencies": [{"from": "e0", "to": "e1"}],
    }
    base.update(overrides)
    return base


def test_document_from_record_ok(types):
    doc = document_from_record(_record(), types)
    assert doc.entity("e0").span == Span(4, 9)
    assert doc.entity("e1").text == "effusion"


def test_document_rejects_text_mismatch(types):
    record = _record(entities=[{"id": "e0", "text": "liver", "type": "body_part", "start": 5}])
    record["dependencies"] = []
    with pytest.raises(AnnotationError, match="does not match"):
        document_from_record(record, types, line=7)


def test_document_rejects_dangling_dependency(types):
    record = _record(dependencies=[{"from": "e0", "to": "missing"}])
    with pytest.raises(AnnotationError, match="unknown entity"):
        document_from_record(record, types)


def test_document_rejects_self_dependency(types):
    record = _record(dependencies=[{"from": "e0", "to": "e0"}])
    with pytest.raises(AnnotationError, match="itself"):
        document_from_record(record, types)


def test_document_rejects_duplicate_ids(types):
    record = _record()
    record["entities"].append({"id": "e0", "text": "liver", "type": "body_part", "start": 4})
    with pytest.raises(AnnotationError, match="duplicate entity id"):
        document_from_record(record, types)


def test_document_rejects_unregistered_type(types):
    record = _record(entities=[{"id": "e0", "text": "liver", "type": "planet", "start": 4}])
    record["dependencies"] = []
    with pytest.raises(AnnotationError, match="not in registry"):
        document_from_record(record, types)


def test_document_rejects_sentence_straddling_entity(types):
    record = _record(
        text="the liver。shows effusion。",
        entities=[{"id": "e0", "text": "liver。shows", "type": "body_part", "start": 4}],
        dependencies=[],
    )
    with pytest.raises(AnnotationError, match="straddles"):
        document_from_record(record, types)
