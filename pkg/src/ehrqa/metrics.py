"""Evaluation: entity-level exact match, token-level micro F1 (QA and NER
variants), answerability accuracy, and report generation.

"Token" means a Unicode character throughout, matching the offset
convention of the rest of the pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .core import Span
from .errors import IllFormedGoldError
from .postprocess import DEFAULT_SEPARATOR, FinalAnswer

NER_TASK = "ner"
RELATION_TASK = "relation"


@dataclass(frozen=True)
class EvalItem:
    """One prediction/gold pair, matched by qid."""

    qid: str
    predicted: FinalAnswer
    gold: FinalAnswer
    task: str = RELATION_TASK
    group: str | None = None


@dataclass
class Counts:
    items: int = 0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    em_sum: int = 0
    answerable_correct: int = 0

    def merge(self, other: "Counts") -> None:
        self.items += other.items
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.em_sum += other.em_sum
        self.answerable_correct += other.answerable_correct

    def f1(self) -> float | None:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else None

    def em(self) -> float | None:
        return self.em_sum / self.items if self.items else None

    def accuracy(self) -> float | None:
        return self.answerable_correct / self.items if self.items else None


@dataclass
class EvalReport:
    """Aggregate metrics with raw counts and a per-group breakdown.

    Metrics with empty denominators are reported as None (absent), never
    coerced to 0 or 1.
    """

    em: float | None
    f1: float | None
    answerability_accuracy: float | None
    counts: Counts
    breakdown: dict[str, Counts] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def counts_dict(c: Counts) -> dict:
            return {
                "items": c.items,
                "tp": c.tp,
                "fp": c.fp,
                "fn": c.fn,
                "answerable_correct": c.answerable_correct,
                "em": c.em(),
                "f1": c.f1(),
                "answerability_accuracy": c.accuracy(),
            }

        return {
            "em": self.em,
            "f1": self.f1,
            "answerability_accuracy": self.answerability_accuracy,
            "counts": counts_dict(self.counts),
            "breakdown": {name: counts_dict(c) for name, c in sorted(self.breakdown.items())},
        }

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, ensure_ascii=False, indent=2, sort_keys=True)
            handle.write("\n")

    def render_table(self) -> str:
        def fmt(value: float | None) -> str:
            return "-" if value is None else f"{value:.4f}"

        rows = [("overall", self.counts)] + sorted(self.breakdown.items())
        widths = max(len(name) for name, _ in rows)
        lines = [
            f"{'group'.ljust(widths)}  items      em      f1  ans_acc",
        ]
        for name, counts in rows:
            lines.append(
                f"{name.ljust(widths)}  {counts.items:5d}  {fmt(counts.em()):>6}  "
                f"{fmt(counts.f1()):>6}  {fmt(counts.accuracy()):>7}"
            )
        return "\n".join(lines)


def exact_match(pred: FinalAnswer, gold: FinalAnswer, separator: str = DEFAULT_SEPARATOR) -> int:
    """1 iff the full answer strings (separators included) are identical and
    the answerability flags agree; unanswerable on both sides matches."""
    for ans in (pred, gold):
        if ans.parts and ans.text != separator.join(p.text for p in ans.parts):
            raise IllFormedGoldError(
                f"answer text {ans.text!r} was not built with separator {separator!r}"
            )
    if pred.answerable != gold.answerable:
        return 0
    return int(pred.text == gold.text)


def _strip_separator(text: str, separator: str) -> str:
    for ch in separator:
        text = text.replace(ch, "")
    return text


def _item_f1_counts(pred: FinalAnswer, gold: FinalAnswer, separator: str) -> tuple[int, int, int]:
    """Character tp/fp/fn for one item.

    Parts are aligned greedily in order; within an aligned pair characters
    are compared positionally; surplus characters and surplus parts count
    wholly as false positives (prediction side) or false negatives (gold
    side).  Separator characters are removed before comparison.
    """
    pred_parts = [_strip_separator(p.text, separator) for p in pred.parts]
    gold_parts = [_strip_separator(p.text, separator) for p in gold.parts]
    if not pred.parts and pred.text:
        pred_parts = [_strip_separator(t, separator) for t in pred.text.split(separator)]
    if not gold.parts and gold.text:
        gold_parts = [_strip_separator(t, separator) for t in gold.text.split(separator)]
    tp = fp = fn = 0
    for p_text, g_text in zip(pred_parts, gold_parts):
        shared = min(len(p_text), len(g_text))
        for i in range(shared):
            if p_text[i] == g_text[i]:
                tp += 1
            else:
                fp += 1
                fn += 1
        fp += max(0, len(p_text) - shared)
        fn += max(0, len(g_text) - shared)
    for surplus in pred_parts[len(gold_parts) :]:
        fp += len(surplus)
    for surplus in gold_parts[len(pred_parts) :]:
        fn += len(surplus)
    return tp, fp, fn


def token_f1_qa(items: list[EvalItem], separator: str = DEFAULT_SEPARATOR) -> tuple[float | None, Counts]:
    """Micro F1 over characters for QA items (no entity class labels).

    Returns (f1, counts); f1 is None for an empty item list (undefined,
    reported as absent rather than 0).
    """
    counts = Counts()
    for item in items:
        tp, fp, fn = _item_f1_counts(item.predicted, item.gold, separator)
        counts.items += 1
        counts.tp += tp
        counts.fp += fp
        counts.fn += fn
    return counts.f1(), counts


def token_f1_ner(
    pred_entities: list[tuple[Span, str]],
    gold_entities: list[tuple[Span, str]],
    text: str,
) -> tuple[float | None, Counts]:
    """Micro F1 over character positions for NER: a position is a true
    positive only when prediction and gold cover it with the same type; a
    type mismatch counts against both sides."""
    for span, _ in pred_entities + gold_entities:
        span.check_within(text)
    gold_at: dict[int, set[str]] = {}
    for span, etype in gold_entities:
        for pos in range(span.start, span.end):
            if pos in gold_at and etype in gold_at[pos]:
                raise IllFormedGoldError(
                    f"overlapping gold spans of type {etype!r} at position {pos}"
                )
            gold_at.setdefault(pos, set()).add(etype)
    pred_at: dict[int, set[str]] = {}
    for span, etype in pred_entities:
        for pos in range(span.start, span.end):
            pred_at.setdefault(pos, set()).add(etype)

    counts = Counts(items=1)
    for pos in sorted(set(gold_at) | set(pred_at)):
        gold_types = gold_at.get(pos, set())
        pred_types = pred_at.get(pos, set())
        if gold_types & pred_types:
            counts.tp += 1
        else:
            if gold_types:
                counts.fn += 1
            if pred_types:
                counts.fp += 1
    return counts.f1(), counts


def answerability_accuracy(items: list[EvalItem]) -> float | None:
    """Fraction of items whose predicted answerability matches gold; None
    (undefined) for an empty item list."""
    if not items:
        return None
    agree = sum(1 for item in items if item.predicted.answerable == item.gold.answerable)
    return agree / len(items)


def _record_answer(record: dict) -> FinalAnswer:
    from .postprocess import AnswerPart

    parts = tuple(
        AnswerPart(
            sentence_index=p["sentence_index"],
            span=Span(p["start"], p["end"]),
            text=p["text"],
        )
        for p in record.get("parts", [])
    )
    return FinalAnswer(
        question=record["key"],
        doc_id=record["doc_id"],
        answerable=bool(parts),
        text=record.get("answer", ""),
        parts=parts,
    )


def _empty_answer(doc_id: str, key: str) -> FinalAnswer:
    return FinalAnswer(question=key, doc_id=doc_id, answerable=False, text="", parts=())


def align_records(
    predictions: list[dict],
    gold: list[dict],
    ner_types: set[str] | frozenset[str] = frozenset(),
) -> tuple[list[EvalItem], list[str]]:
    """Match prediction and gold record dicts by (doc_id, key).

    Gold records without a prediction are scored against an unanswerable
    prediction (supporting partial runs); predictions without a gold record
    are scored against an empty gold.  Both cases produce a warning.
    """

    def qid_of(record: dict) -> str:
        return f"{record['doc_id']}||{record['key']}"

    preds = {qid_of(r): r for r in predictions}
    items: list[EvalItem] = []
    warnings: list[str] = []
    for gold_rec in gold:
        qid = qid_of(gold_rec)
        pred_rec = preds.pop(qid, None)
        if pred_rec is None:
            warnings.append(f"no prediction for {qid}; scored as unanswerable")
            pred_ans = _empty_answer(gold_rec["doc_id"], gold_rec["key"])
        else:
            pred_ans = _record_answer(pred_rec)
        group = gold_rec.get("group")
        task = NER_TASK if group in ner_types else RELATION_TASK
        items.append(
            EvalItem(qid=qid, predicted=pred_ans, gold=_record_answer(gold_rec), task=task, group=group)
        )
    for qid, pred_rec in preds.items():
        warnings.append(f"prediction for {qid} has no gold record; scored against empty gold")
        items.append(
            EvalItem(
                qid=qid,
                predicted=_record_answer(pred_rec),
                gold=_empty_answer(pred_rec["doc_id"], pred_rec["key"]),
                task=RELATION_TASK,
                group=pred_rec.get("group"),
            )
        )
    return items, warnings


def evaluate_items(items: list[EvalItem], separator: str = DEFAULT_SEPARATOR) -> EvalReport:
    """Score a full item list: EM, token-level micro F1, answerability
    accuracy, and a per-group breakdown."""
    overall = Counts()
    breakdown: dict[str, Counts] = {}
    for item in items:
        tp, fp, fn = _item_f1_counts(item.predicted, item.gold, separator)
        em = exact_match(item.predicted, item.gold, separator)
        agree = int(item.predicted.answerable == item.gold.answerable)
        contribution = Counts(
            items=1, tp=tp, fp=fp, fn=fn, em_sum=em, answerable_correct=agree
        )
        overall.merge(contribution)
        if item.group:
            breakdown.setdefault(item.group, Counts()).merge(contribution)
    return EvalReport(
        em=overall.em(),
        f1=overall.f1(),
        answerability_accuracy=overall.accuracy(),
        counts=overall,
        breakdown=breakdown,
    )
