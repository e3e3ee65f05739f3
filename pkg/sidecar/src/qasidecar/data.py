"""SQuAD-2.0 dataset loading for reader training."""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class TrainingExample:
    """One training unit.

    ``gold_start``/``gold_end`` are wire positions: 0 is the null sentinel,
    position p >= 1 is context character p-1 (start) or the position just
    past the last answer character (end).  ``no_answer_label`` is 1 for
    impossible questions and 0 otherwise; answerable examples carry valid
    span positions and unanswerable ones sit on the null position.
    """

    qid: str
    question: str
    context: str
    gold_start: int
    gold_end: int
    no_answer_label: int

    def __post_init__(self):
        if self.no_answer_label:
            if (self.gold_start, self.gold_end) != (0, 0):
                raise ValueError(f"{self.qid}: unanswerable example must use the null position")
        else:
            if not (1 <= self.gold_start <= self.gold_end <= len(self.context)):
                raise ValueError(f"{self.qid}: gold span outside the context")


def load_squad_examples(paths: list[str]) -> list[TrainingExample]:
    """Read one or more SQuAD-2.0 files produced by the dataset generator."""
    examples: list[TrainingExample] = []
    for path in paths:
        try:
            with open(path, encoding="utf-8") as handle:
                payload = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot parse dataset file {path!r}: {exc}") from exc
        for entry in payload.get("data", []):
            for para in entry.get("paragraphs", []):
                context = para["context"]
                for qa in para.get("qas", []):
                    if qa.get("is_impossible", False):
                        examples.append(
                            TrainingExample(
                                qid=qa["id"],
                                question=qa["question"],
                                context=context,
                                gold_start=0,
                                gold_end=0,
                                no_answer_label=1,
                            )
                        )
                        continue
                    answer = qa["answers"][0]
                    start = answer["answer_start"]
                    end = start + len(answer["text"])
                    examples.append(
                        TrainingExample(
                            qid=qa["id"],
                            question=qa["question"],
                            context=context,
                            gold_start=start + 1,
                            gold_end=end,
                            no_answer_label=0,
                        )
                    )
    return examples
