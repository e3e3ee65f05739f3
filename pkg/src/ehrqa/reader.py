"""The reader contract and everything that operates on it: output
validation, verification scoring with the threshold decision rule, answer
span decoding, oracle and noisy-oracle backends for testing, and the
remote client for real model backends.

Probability vectors (post-softmax), not raw logits, cross this boundary;
position 0 is the reserved null sentinel and positions 1..n map to context
tokens through a character offset table.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np
import requests

from .core import Span, merge_adjacent_spans
from .errors import (
    ConfigError,
    DegenerateInputError,
    OracleMisuseError,
    ProtocolError,
    TransportError,
)
from .preprocess import SENTENCE, Answer, QAExample

NULL_WHEN_ABOVE = "null-when-above"
ANSWER_WHEN_ABOVE = "answer-when-above"

_SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class ReaderInput:
    """One question/context pair submitted to a reader."""

    qid: str
    question: str
    context: str

    def __post_init__(self):
        if not self.question or not self.context:
            raise ProtocolError("question and context must be non-empty", qid=self.qid)


@dataclass
class ReaderOutput:
    """Reader predictions for one input.

    ``no_answer_prob`` is the answerability classifier's probability of no
    answer.  ``start_probs``/``end_probs`` are distributions over positions
    0..n where 0 is the null sentinel; ``offsets[i-1]`` is the half-open
    character interval of position i in the context.
    """

    qid: str
    no_answer_prob: float
    start_probs: np.ndarray
    end_probs: np.ndarray
    offsets: list[tuple[int, int]]

    def __post_init__(self):
        self.start_probs = np.asarray(self.start_probs, dtype=float)
        self.end_probs = np.asarray(self.end_probs, dtype=float)

    @property
    def n_positions(self) -> int:
        return len(self.offsets)


def validate_reader_output(out: ReaderOutput, context: str | None = None) -> ReaderOutput:
    """Check every ReaderOutput invariant; raises ProtocolError naming the
    offending field."""
    qid = out.qid
    n = len(out.offsets)
    if not (0.0 <= out.no_answer_prob <= 1.0):
        raise ProtocolError(
            f"no_answer_prob {out.no_answer_prob} outside [0, 1]", field="no_answer_prob", qid=qid
        )
    for name, vec in (("start_probs", out.start_probs), ("end_probs", out.end_probs)):
        if vec.ndim != 1 or len(vec) != n + 1:
            raise ProtocolError(
                f"{name} must have length n+1={n + 1}, got {vec.shape}", field=name, qid=qid
            )
        if np.any(vec < 0) or np.any(~np.isfinite(vec)):
            raise ProtocolError(f"{name} has negative or non-finite entries", field=name, qid=qid)
        total = float(vec.sum())
        if abs(total - 1.0) > _SIMPLEX_TOL:
            raise ProtocolError(f"{name} sums to {total}, not 1", field=name, qid=qid)
    prev: tuple[int, int] | None = None
    for s, e in out.offsets:
        if not (0 <= s < e):
            raise ProtocolError(f"offset ({s}, {e}) is not a valid interval", field="offsets", qid=qid)
        if prev is not None and (s < prev[0] or e < prev[1]):
            raise ProtocolError("offsets are not nondecreasing", field="offsets", qid=qid)
        prev = (s, e)
    if context is not None and n and out.offsets[-1][1] > len(context):
        raise ProtocolError(
            f"offsets exceed context length {len(context)}", field="offsets", qid=qid
        )
    return out


@dataclass(frozen=True)
class VerifierConfig:
    """Weights and threshold for the rear-verification decision.

    With the default null-when-above polarity the verdict is unanswerable
    when both the null-minus-has difference score and the mixture score
    exceed delta.  ``strict_pairs`` restricts spans to start strictly before
    end (excluding single-token answers), the literal reading of the score
    definition; the default admits single-token answers.
    """

    beta1: float = 1.0
    beta2: float = 1.0
    delta: float = 0.0
    polarity: str = NULL_WHEN_ABOVE
    max_answer_chars: int = 64
    strict_pairs: bool = False

    def __post_init__(self):
        if self.polarity not in (NULL_WHEN_ABOVE, ANSWER_WHEN_ABOVE):
            raise ConfigError(f"unknown polarity {self.polarity!r}")
        if self.max_answer_chars < 1:
            raise ConfigError("max_answer_chars must be >= 1")


@dataclass(frozen=True)
class VerificationScores:
    """The rear-verification quantities and the final answerability verdict."""

    score_ext: float
    score_has: float
    score_null: float
    score_diff: float
    mixture: float
    answerable: bool


def compute_scores(out: ReaderOutput, cfg: VerifierConfig) -> VerificationScores:
    """Rear verification: external score 2*p_null - 1, null score
    start[0]+end[0], has score max over valid (k, l) of start[k]+end[l],
    their difference, the weighted mixture, and the threshold verdict."""
    n = out.n_positions
    if n == 0:
        raise DegenerateInputError(f"reader output {out.qid!r} has no token positions")
    score_ext = 2.0 * out.no_answer_prob - 1.0
    score_null = float(out.start_probs[0] + out.end_probs[0])
    starts = out.start_probs[1:]
    ends = out.end_probs[1:]
    if cfg.strict_pairs:
        if n < 2:
            score_has = -math.inf
        else:
            best_start = np.maximum.accumulate(starts)[:-1]
            score_has = float(np.max(best_start + ends[1:]))
    else:
        score_has = float(np.max(np.maximum.accumulate(starts) + ends))
    score_diff = score_null - score_has
    mixture = cfg.beta1 * score_diff + cfg.beta2 * score_ext
    null_signal = score_diff > cfg.delta and mixture > cfg.delta
    answerable = null_signal if cfg.polarity == ANSWER_WHEN_ABOVE else not null_signal
    return VerificationScores(
        score_ext=score_ext,
        score_has=score_has,
        score_null=score_null,
        score_diff=score_diff,
        mixture=mixture,
        answerable=answerable,
    )


def decode_span(
    out: ReaderOutput,
    cfg: VerifierConfig,
    diagnostics: list[str] | None = None,
) -> Span | None:
    """The answer span in character coordinates, or None when the verdict is
    unanswerable.

    Maximizes start_probs[k] + end_probs[l] over valid (k, l) whose
    character extent fits max_answer_chars; ties break to the smallest k,
    then smallest l.  When no pair is feasible under the length cap the
    reader falls back to unanswerable with a diagnostic.
    """
    scores = compute_scores(out, cfg)
    if not scores.answerable:
        return None
    n = out.n_positions
    starts = out.start_probs[1:]
    ends = out.end_probs[1:]
    char_start = np.array([s for s, _ in out.offsets])
    char_end = np.array([e for _, e in out.offsets])
    pair = starts[:, None] + ends[None, :]
    valid = np.triu(np.ones((n, n), dtype=bool), k=1 if cfg.strict_pairs else 0)
    length = char_end[None, :] - char_start[:, None]
    valid &= length <= cfg.max_answer_chars
    if not valid.any():
        if diagnostics is not None:
            diagnostics.append(
                f"{out.qid}: no feasible span under max_answer_chars={cfg.max_answer_chars}"
            )
        return None
    masked = np.where(valid, pair, -np.inf)
    flat = int(np.argmax(masked))  # row-major argmax = smallest k, then smallest l
    k, l = divmod(flat, n)
    return Span(int(char_start[k]), int(char_end[l]))


# --- oracle backends --------------------------------------------------------


def _one_hot(n_plus_1: int, hot: int) -> np.ndarray:
    vec = np.zeros(n_plus_1)
    vec[hot] = 1.0
    return vec


def oracle_read(inp: ReaderInput, gold: QAExample) -> ReaderOutput:
    """Gold-derived reader: character-per-token positions, one-hot start/end
    at the gold boundaries (or at the null sentinel for impossible gold)."""
    if gold.qid != inp.qid:
        raise OracleMisuseError(f"oracle qid mismatch: {gold.qid!r} vs {inp.qid!r}")
    if gold.context != inp.context:
        raise OracleMisuseError(f"oracle context mismatch for qid {inp.qid!r}")
    n = len(inp.context)
    offsets = [(i, i + 1) for i in range(n)]
    if gold.is_impossible:
        return ReaderOutput(
            qid=inp.qid,
            no_answer_prob=1.0,
            start_probs=_one_hot(n + 1, 0),
            end_probs=_one_hot(n + 1, 0),
            offsets=offsets,
        )
    answer = gold.answers[0]
    start = answer.answer_start
    end = start + len(answer.text)
    return ReaderOutput(
        qid=inp.qid,
        no_answer_prob=0.0,
        start_probs=_one_hot(n + 1, start + 1),
        end_probs=_one_hot(n + 1, end),
        offsets=offsets,
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Controlled corruption for robustness testing: boundary jitter in
    characters, answerability flip probability, and a temperature that
    softens one-hot vectors into smooth distributions (the zero limit
    recovers oracle decisions)."""

    boundary_jitter: int = 0
    flip_prob: float = 0.0
    temperature: float = 1e-9


def _stable_rng(seed: int, qid: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}|{qid}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def _soften(vec: np.ndarray, temperature: float) -> np.ndarray:
    # softmax(one_hot / T) computed via exp(-1/T) to stay finite as T -> 0
    cold = math.exp(-1.0 / temperature) if temperature > 0 else 0.0
    soft = np.full(len(vec), cold)
    soft[np.argmax(vec)] = 1.0
    return soft / soft.sum()


def noisy_oracle_read(
    inp: ReaderInput,
    gold: QAExample,
    noise: NoiseSpec,
    seed: int,
) -> ReaderOutput:
    """Oracle output with seeded corruption, deterministic per (seed, qid)."""
    rng = _stable_rng(seed, inp.qid)
    n = len(inp.context)
    flip = rng.random() < noise.flip_prob
    answerable = gold.is_impossible == flip  # flip toggles the gold verdict

    if not answerable:
        start_hot, end_hot = 0, 0
        y_hard = 1.0
    else:
        y_hard = 0.0
        if gold.is_impossible:
            # fabricated span for a flipped empty read
            s = int(rng.integers(0, n))
            e = min(n, s + int(rng.integers(1, 4)))
            start_hot, end_hot = s + 1, e
        else:
            answer = gold.answers[0]
            s, e = answer.answer_start, answer.answer_start + len(answer.text)
            j = noise.boundary_jitter
            if j > 0:
                s = int(np.clip(s + rng.integers(-j, j + 1), 0, n - 1))
                e = int(np.clip(e + rng.integers(-j, j + 1), s + 1, n))
            start_hot, end_hot = s + 1, e

    cold = math.exp(-1.0 / noise.temperature) if noise.temperature > 0 else 0.0
    no_answer = (y_hard + cold * (1.0 - y_hard)) / (1.0 + cold)
    return ReaderOutput(
        qid=inp.qid,
        no_answer_prob=no_answer,
        start_probs=_soften(_one_hot(n + 1, start_hot), noise.temperature),
        end_probs=_soften(_one_hot(n + 1, end_hot), noise.temperature),
        offsets=[(i, i + 1) for i in range(n)],
    )


# --- remote client -----------------------------------------------------------


def remote_read(
    batch: list[ReaderInput],
    endpoint: str,
    timeout: float = 30.0,
    retries: int = 3,
    backoff: float = 0.2,
) -> list[ReaderOutput]:
    """Send a batch over the wire protocol and validate every response
    output against the ReaderOutput invariants before acceptance.

    Returns outputs in input order (matched by qid).  Transport failures
    raise TransportError after the configured retries; contract violations
    raise ProtocolError naming the offending field.
    """
    if not batch:
        return []
    payload = {
        "inputs": [
            {"qid": inp.qid, "question": inp.question, "context": inp.context} for inp in batch
        ]
    }
    last_exc: Exception | None = None
    for attempt in range(1, retries + 1):
        try:
            response = requests.post(endpoint, json=payload, timeout=timeout)
            response.raise_for_status()
            body = response.json()
            break
        except (requests.RequestException, ValueError) as exc:
            last_exc = exc
            if attempt < retries:
                time.sleep(backoff * attempt)
    else:
        raise TransportError(f"reader endpoint {endpoint!r} unreachable: {last_exc}", retries)

    outputs = body.get("outputs")
    if outputs is None or len(outputs) != len(batch):
        raise ProtocolError(
            f"expected {len(batch)} outputs, got {None if outputs is None else len(outputs)}",
            field="outputs",
        )
    parsed: dict[str, ReaderOutput] = {}
    inputs_by_qid = {inp.qid: inp for inp in batch}
    for raw in outputs:
        qid = raw.get("qid")
        if qid not in inputs_by_qid:
            raise ProtocolError(f"response qid {qid!r} not in request", field="qid", qid=qid)
        if qid in parsed:
            raise ProtocolError(f"duplicate response qid {qid!r}", field="qid", qid=qid)
        try:
            out = ReaderOutput(
                qid=qid,
                no_answer_prob=float(raw["no_answer_prob"]),
                start_probs=np.asarray(raw["start_probs"], dtype=float),
                end_probs=np.asarray(raw["end_probs"], dtype=float),
                offsets=[(int(s), int(e)) for s, e in raw["offsets"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed output object: {exc}", qid=qid) from exc
        parsed[qid] = validate_reader_output(out, inputs_by_qid[qid].context)
    return [parsed[inp.qid] for inp in batch]


# --- backends used by the extraction pipeline -------------------------------


class ReaderBackend:
    """Minimal backend interface: a batch of inputs to a batch of outputs."""

    def read_batch(self, inputs: list[ReaderInput]) -> list[ReaderOutput]:
        raise NotImplementedError


def extraction_qid(doc_id: str, context_span: Span, question: str) -> str:
    qhash = hashlib.sha256(question.encode("utf-8")).hexdigest()[:12]
    return f"{doc_id}|{context_span.start}-{context_span.end}|{qhash}"


def _parse_extraction_qid(qid: str) -> tuple[str, Span]:
    doc_id, span_part, _ = qid.rsplit("|", 2)
    start, end = span_part.split("-")
    return doc_id, Span(int(start), int(end))


class CorpusOracleBackend(ReaderBackend):
    """Answers extraction reads from gold annotations.

    Indexes every generated question's answer spans for one document; a
    read locates its context through the extraction qid, projects the
    spans into it, merges adjacent ones, and replies with a one-hot oracle
    output (first span when several remain).  Unknown questions or answer-
    free contexts yield impossible outputs.  With a NoiseSpec attached the
    response is corrupted deterministically per (seed, qid).
    """

    def __init__(self, doc, registry, types, config, noise: NoiseSpec | None = None, seed: int = 0):
        from .templates import generate_ner_questions, generate_relation_questions

        self.doc = doc
        self.config = config
        self.noise = noise
        self.seed = seed
        self.question_spans: dict[str, list[Span]] = {}
        drafts = generate_ner_questions(doc, registry, types) + generate_relation_questions(
            doc, registry
        )
        for draft in drafts:
            spans = self.question_spans.setdefault(draft.question, [])
            for span in draft.answer_spans:
                if span not in spans:
                    spans.append(span)

    def _gold_for(self, inp: ReaderInput) -> QAExample:
        doc_id, context_span = _parse_extraction_qid(inp.qid)
        if doc_id != self.doc.doc_id or context_span.slice(self.doc.text) != inp.context:
            raise OracleMisuseError(
                f"read {inp.qid!r} does not match the indexed document {self.doc.doc_id!r}"
            )
        spans = self.question_spans.get(inp.question, [])
        merged = merge_adjacent_spans(spans, self.doc.text, self.config.bridge_chars)
        local: list[Span] = []
        for span in merged:
            if span.end <= context_span.start or span.start >= context_span.end:
                continue
            if span.start < context_span.start or span.end > context_span.end:
                continue  # straddles the read window; not recoverable in this read
            local.append(span.shift(-context_span.start))
        answers: tuple[Answer, ...] = ()
        if local:
            first = sorted(local)[0]
            answers = (Answer(text=first.slice(inp.context), answer_start=first.start),)
        return QAExample(
            qid=inp.qid,
            doc_id=doc_id,
            question=inp.question,
            context=inp.context,
            granularity=SENTENCE,
            context_span=context_span,
            answers=answers,
            is_impossible=not answers,
        )

    def read_batch(self, inputs: list[ReaderInput]) -> list[ReaderOutput]:
        outputs = []
        for inp in inputs:
            gold = self._gold_for(inp)
            if self.noise is None:
                outputs.append(oracle_read(inp, gold))
            else:
                outputs.append(noisy_oracle_read(inp, gold, self.noise, self.seed))
        return outputs


class RemoteBackend(ReaderBackend):
    """Backend speaking the wire protocol to a running model server."""

    def __init__(self, endpoint: str, timeout: float = 30.0, retries: int = 3):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def read_batch(self, inputs: list[ReaderInput]) -> list[ReaderOutput]:
        return remote_read(inputs, self.endpoint, timeout=self.timeout, retries=self.retries)
