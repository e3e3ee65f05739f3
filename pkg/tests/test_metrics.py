import pytest
from hypothesis import given, strategies as st

from ehrqa.core import Span
from ehrqa.errors import IllFormedGoldError
from ehrqa.metrics import (
    EvalItem,
    answerability_accuracy,
    evaluate_items,
    exact_match,
    token_f1_ner,
    token_f1_qa,
)
from ehrqa.postprocess import AnswerPart, FinalAnswer

SEP = "，"


def _answer(*texts: str, doc_id: str = "d", question: str = "q?") -> FinalAnswer:
    parts = []
    pos = 0
    for i, text in enumerate(texts):
        parts.append(AnswerPart(sentence_index=i, span=Span(pos, pos + len(text)), text=text))
        pos += len(text) + 1
    return FinalAnswer(
        question=question,
        doc_id=doc_id,
        answerable=bool(parts),
        text=SEP.join(texts),
        parts=tuple(parts),
    )


EMPTY = FinalAnswer(question="q?", doc_id="d", answerable=False, text="", parts=())


def _item(pred: FinalAnswer, gold: FinalAnswer, qid="q1", group=None) -> EvalItem:
    return EvalItem(qid=qid, predicted=pred, gold=gold, group=group)


def test_exact_match_identity():
    assert exact_match(_answer("a", "b"), _answer("a", "b"), SEP) == 1


def test_exact_match_missing_part():
    assert exact_match(_answer("a"), _answer("a", "b"), SEP) == 0


def test_exact_match_unanswerable_agreement():
    assert exact_match(EMPTY, EMPTY, SEP) == 1
    assert exact_match(_answer("a"), EMPTY, SEP) == 0
    assert exact_match(EMPTY, _answer("a"), SEP) == 0


def test_exact_match_counts_separator():
    pred = FinalAnswer(question="q?", doc_id="d", answerable=True, text="a|b",
                       parts=(AnswerPart(0, Span(0, 1), "a"), AnswerPart(1, Span(2, 3), "b")))
    gold_sep = FinalAnswer(question="q?", doc_id="d", answerable=True, text="a|b",
                           parts=(AnswerPart(0, Span(0, 1), "a"), AnswerPart(1, Span(2, 3), "b")))
    assert exact_match(pred, gold_sep, "|") == 1
    with pytest.raises(IllFormedGoldError):
        exact_match(pred, gold_sep, "~")  # text was not built with this separator


def test_token_f1_partial_overlap():
    f1, counts = token_f1_qa([_item(_answer("ab"), _answer("abc"))], SEP)
    assert (counts.tp, counts.fp, counts.fn) == (2, 0, 1)
    assert f1 == pytest.approx(0.8)


def test_token_f1_perfect():
    items = [
        _item(_answer("ab"), _answer("ab")),
        _item(_answer("xy", "z"), _answer("xy", "z")),
    ]
    f1, _ = token_f1_qa(items, SEP)
    assert f1 == 1.0


def test_token_f1_total_miss():
    f1, counts = token_f1_qa([_item(EMPTY, _answer("abc"))], SEP)
    assert (counts.tp, counts.fp, counts.fn) == (0, 0, 3)
    assert f1 == 0.0


def test_token_f1_ignores_separator_characters():
    pred = _answer("a，b")  # separator inside a part is stripped for F1
    gold = _answer("ab")
    f1, counts = token_f1_qa([_item(pred, gold)], SEP)
    assert f1 == 1.0


def test_token_f1_empty_items_undefined():
    f1, counts = token_f1_qa([], SEP)
    assert f1 is None
    assert counts.items == 0


def test_token_f1_both_empty_item():
    f1, counts = token_f1_qa([_item(EMPTY, EMPTY)], SEP)
    assert f1 is None  # no characters on either side
    assert counts.items == 1


def test_token_f1_symmetry():
    pairs = [(_answer("abc"), _answer("abd")), (_answer("ab", "cd"), _answer("ab"))]
    forward = token_f1_qa([_item(p, g) for p, g in pairs], SEP)[0]
    backward = token_f1_qa([_item(g, p) for p, g in pairs], SEP)[0]
    assert forward == pytest.approx(backward)


def test_em_implies_perfect_f1_contribution():
    pred, gold = _answer("ab", "cd"), _answer("ab", "cd")
    assert exact_match(pred, gold, SEP) == 1
    f1, counts = token_f1_qa([_item(pred, gold)], SEP)
    assert f1 == 1.0 and counts.fp == 0 and counts.fn == 0


# --- NER variant ---------------------------------------------------------------


def test_token_f1_ner_perfect():
    text = "the liver is enlarged"
    f1, _ = token_f1_ner([(Span(4, 9), "body_part")], [(Span(4, 9), "body_part")], text)
    assert f1 == 1.0


def test_token_f1_ner_label_mismatch_counts_both_sides():
    text = "the liver is enlarged"
    f1, counts = token_f1_ner([(Span(4, 9), "disease")], [(Span(4, 9), "body_part")], text)
    assert (counts.tp, counts.fp, counts.fn) == (0, 5, 5)
    assert f1 == 0.0


def test_token_f1_ner_no_predictions():
    text = "the liver is enlarged"
    f1, counts = token_f1_ner([], [(Span(4, 9), "body_part")], text)
    assert f1 == 0.0
    assert counts.fn == 5


def test_token_f1_ner_partial_position_overlap():
    text = "the liver is enlarged"
    f1, counts = token_f1_ner([(Span(4, 7), "body_part")], [(Span(4, 9), "body_part")], text)
    assert (counts.tp, counts.fp, counts.fn) == (3, 0, 2)


def test_token_f1_ner_rejects_overlapping_same_type_gold():
    text = "the liver is enlarged"
    with pytest.raises(IllFormedGoldError):
        token_f1_ner([], [(Span(4, 9), "body_part"), (Span(6, 12), "body_part")], text)


# --- answerability ---------------------------------------------------------------


def test_answerability_accuracy_direct():
    items = [
        _item(_answer("a"), _answer("a")),
        _item(EMPTY, _answer("b")),
        _item(_answer("c"), _answer("d")),
    ]
    assert answerability_accuracy(items) == pytest.approx(2 / 3)


def test_answerability_accuracy_extremes():
    agree = [_item(_answer("a"), _answer("b")), _item(EMPTY, EMPTY)]
    assert answerability_accuracy(agree) == 1.0
    disagree = [_item(EMPTY, _answer("a")), _item(_answer("b"), EMPTY)]
    assert answerability_accuracy(disagree) == 0.0
    assert answerability_accuracy([]) is None


# --- aggregation -------------------------------------------------------------------


def test_evaluate_items_report_and_breakdown():
    items = [
        _item(_answer("ab"), _answer("abc"), qid="q1", group="cls1"),
        _item(_answer("xy"), _answer("xy"), qid="q2", group="cls2"),
        _item(EMPTY, _answer("zz"), qid="q3", group="cls1"),
    ]
    report = evaluate_items(items, SEP)
    assert report.counts.items == 3
    assert report.em == pytest.approx(1 / 3)
    # tp=2+2, fp=0, fn=1+2
    assert report.f1 == pytest.approx(2 * 4 / (2 * 4 + 0 + 3))
    assert report.answerability_accuracy == pytest.approx(2 / 3)
    assert set(report.breakdown) == {"cls1", "cls2"}
    assert report.breakdown["cls2"].em() == 1.0
    table = report.render_table()
    assert "overall" in table and "cls1" in table
    payload = report.to_dict()
    assert payload["counts"]["tp"] == 4


@given(st.permutations(list(range(6))))
def test_metrics_permutation_invariant(order):
    base = [
        _item(_answer("ab"), _answer("abc"), qid=f"q{i}", group="g")
        for i in range(3)
    ] + [
        _item(EMPTY, _answer("z"), qid=f"e{i}") for i in range(3)
    ]
    shuffled = [base[i] for i in order]
    a = evaluate_items(base, SEP)
    b = evaluate_items(shuffled, SEP)
    assert a.em == b.em and a.f1 == b.f1
    assert a.answerability_accuracy == b.answerability_accuracy
