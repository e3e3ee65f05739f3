"""Core data types and the span algebra the rest of the pipeline builds on.

Offsets everywhere are Unicode scalar value indices (Python ``str``
indices), never bytes: the target corpora are Chinese clinical notes
where byte offsets would fracture multi-byte characters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import (
    AnnotationError,
    BoundaryViolationError,
    ConfigError,
    DanglingReferenceError,
    InvalidSpanError,
)

DEFAULT_SENTENCE_DELIMITERS = frozenset({"。", "；", "！", "？", "\n"})
DEFAULT_BRIDGE_CHARS = frozenset({"，", "、", "；", ",", ";", " "})
DEFAULT_CLAUSE_DELIMITERS = frozenset({"，", "、"})


@dataclass(frozen=True, order=True)
class Span:
    """Half-open character interval [start, end) over some context.

    Invariant: 0 <= start < end.  Empty spans are represented by absence
    (``None``), never by start == end.
    """

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise InvalidSpanError(f"not a valid half-open interval: ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def slice(self, text: str) -> str:
        return text[self.start : self.end]

    def shift(self, delta: int) -> "Span":
        return Span(self.start + delta, self.end + delta)

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end

    def check_within(self, context: str) -> None:
        if self.end > len(context):
            raise InvalidSpanError(
                f"span ({self.start}, {self.end}) exceeds context of length {len(context)}"
            )


@dataclass(frozen=True)
class Entity:
    """A typed entity mention anchored to a span of the document text."""

    id: str
    text: str
    entity_type: str
    span: Span


@dataclass(frozen=True)
class Dependency:
    """A directed relation between two entities, referenced by id."""

    from_entity: str
    to_entity: str


@dataclass(frozen=True)
class RelationClass:
    """The category of a dependency, named by the hyphen-join of its two types."""

    left_type: str
    right_type: str

    @property
    def name(self) -> str:
        return f"{self.left_type}-{self.right_type}"


@dataclass(frozen=True)
class Sentence:
    """One sentence of a document: its ordinal, document span, and text."""

    index: int
    span: Span
    text: str


@dataclass(frozen=True)
class TypeRegistry:
    """The configured ontology: entity types, which of them are directly
    queryable NER-style, and the known relation classes."""

    entity_types: frozenset[str]
    ner_queryable_types: frozenset[str]
    relation_classes: frozenset[RelationClass]

    def __post_init__(self):
        extra = self.ner_queryable_types - self.entity_types
        if extra:
            raise ConfigError(f"ner_queryable_types not registered as entity types: {sorted(extra)}")

    def class_names(self) -> frozenset[str]:
        return frozenset(rc.name for rc in self.relation_classes)


@dataclass
class AnnotatedDocument:
    """A document plus its typed entity annotations and dependency pairs."""

    doc_id: str
    doc_kind: str
    text: str
    entities: list[Entity]
    dependencies: list[Dependency]
    _by_id: dict[str, Entity] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._by_id = {e.id: e for e in self.entities}

    def entity(self, entity_id: str) -> Entity:
        try:
            return self._by_id[entity_id]
        except KeyError:
            raise DanglingReferenceError(
                f"doc {self.doc_id!r}: no entity with id {entity_id!r}"
            ) from None


def merge_adjacent_spans(
    spans: list[Span],
    context: str,
    bridge_chars: frozenset[str] = DEFAULT_BRIDGE_CHARS,
) -> list[Span]:
    """Coalesce spans that touch, overlap, or are separated only by bridge
    characters (punctuation/whitespace) into single covering spans.

    Returns sorted, disjoint spans.  Idempotent and insensitive to the
    order of the input list.
    """
    for span in spans:
        span.check_within(context)
    if not spans:
        return []
    ordered = sorted(set(spans))
    merged = [ordered[0]]
    for span in ordered[1:]:
        last = merged[-1]
        gap = context[last.end : span.start]
        if span.start <= last.end or all(c in bridge_chars for c in gap):
            if span.end > last.end:
                merged[-1] = Span(last.start, span.end)
        else:
            merged.append(span)
    return merged


def split_sentences(
    text: str,
    delimiters: frozenset[str] = DEFAULT_SENTENCE_DELIMITERS,
) -> list[Sentence]:
    """Tile the text into sentences.  Each delimiter character terminates a
    sentence and stays attached to it; trailing text without a delimiter
    forms the final sentence.  Empty text yields an empty list.
    """
    sentences: list[Sentence] = []
    start = 0
    for i, ch in enumerate(text):
        if ch in delimiters:
            span = Span(start, i + 1)
            sentences.append(Sentence(index=len(sentences), span=span, text=span.slice(text)))
            start = i + 1
    if start < len(text):
        span = Span(start, len(text))
        sentences.append(Sentence(index=len(sentences), span=span, text=span.slice(text)))
    return sentences


def project_span(span: Span, sentence: Sentence) -> Span | None:
    """Rebase a document-coordinate span into sentence-local coordinates.

    Returns None when the span lies fully outside the sentence.  A span
    that straddles the sentence boundary signals an annotation crossing a
    sentence break and raises BoundaryViolationError.
    """
    s = sentence.span
    if span.end <= s.start or span.start >= s.end:
        return None
    if span.start < s.start or span.end > s.end:
        raise BoundaryViolationError(
            f"span ({span.start}, {span.end}) straddles sentence boundary ({s.start}, {s.end})"
        )
    return span.shift(-s.start)


def sentence_containing(span: Span, sentences: list[Sentence]) -> Sentence:
    """Return the sentence fully containing the span (straddlers raise)."""
    for sent in sentences:
        if project_span(span, sent) is not None:
            return sent
    raise InvalidSpanError(f"span ({span.start}, {span.end}) outside all sentences")


# --- annotation ingestion -------------------------------------------------

_REQUIRED_DOC_FIELDS = ("doc_id", "doc_kind", "text", "entities", "dependencies")


def document_from_record(
    record: dict,
    registry: TypeRegistry,
    sentence_delimiters: frozenset[str] = DEFAULT_SENTENCE_DELIMITERS,
    line: int | None = None,
) -> AnnotatedDocument:
    """Build and validate an AnnotatedDocument from one JSONL record.

    Entity ``end`` offsets are derived as start + character length of the
    entity text.  Rejects (with a diagnostic): mismatched entity text,
    duplicate ids, unregistered types, dangling or self-referential
    dependencies, and entities straddling a sentence boundary.
    """
    for name in _REQUIRED_DOC_FIELDS:
        if name not in record:
            raise AnnotationError("missing required field", line=line, field=name)
    doc_id = record["doc_id"]
    text = record["text"]
    if not isinstance(text, str) or not text:
        raise AnnotationError("text must be a non-empty string", line=line, field="text")

    entities: list[Entity] = []
    seen_ids: set[str] = set()
    for raw in record["entities"]:
        for name in ("id", "text", "type", "start"):
            if name not in raw:
                raise AnnotationError("entity missing field", line=line, field=f"entities.{name}")
        eid = str(raw["id"])
        if eid in seen_ids:
            raise AnnotationError(f"duplicate entity id {eid!r}", line=line, field="entities.id")
        seen_ids.add(eid)
        etype = raw["type"]
        if etype not in registry.entity_types:
            raise AnnotationError(
                f"entity type {etype!r} not in registry", line=line, field="entities.type"
            )
        start = int(raw["start"])
        etext = raw["text"]
        try:
            span = Span(start, start + len(etext))
            span.check_within(text)
        except InvalidSpanError as exc:
            raise AnnotationError(str(exc), line=line, field="entities.start") from exc
        if span.slice(text) != etext:
            raise AnnotationError(
                f"entity {eid!r}: text {etext!r} does not match document slice "
                f"{span.slice(text)!r} at offset {start}",
                line=line,
                field="entities.text",
            )
        entities.append(Entity(id=eid, text=etext, entity_type=etype, span=span))

    sentences = split_sentences(text, sentence_delimiters)
    for ent in entities:
        try:
            sentence_containing(ent.span, sentences)
        except BoundaryViolationError as exc:
            raise AnnotationError(
                f"entity {ent.id!r} ({ent.text!r}) straddles a sentence boundary",
                line=line,
                field="entities",
            ) from exc

    dependencies: list[Dependency] = []
    for raw in record["dependencies"]:
        for name in ("from", "to"):
            if name not in raw:
                raise AnnotationError("dependency missing field", line=line, field=f"dependencies.{name}")
        src, dst = str(raw["from"]), str(raw["to"])
        if src == dst:
            raise AnnotationError(
                f"dependency from entity {src!r} to itself", line=line, field="dependencies"
            )
        for endpoint in (src, dst):
            if endpoint not in seen_ids:
                raise AnnotationError(
                    f"dependency references unknown entity {endpoint!r}",
                    line=line,
                    field="dependencies",
                )
        dependencies.append(Dependency(from_entity=src, to_entity=dst))

    return AnnotatedDocument(
        doc_id=doc_id,
        doc_kind=record["doc_kind"],
        text=text,
        entities=entities,
        dependencies=dependencies,
    )


def load_documents(
    path: str,
    registry: TypeRegistry,
    sentence_delimiters: frozenset[str] = DEFAULT_SENTENCE_DELIMITERS,
) -> list[AnnotatedDocument]:
    """Read one annotated document per JSONL line; errors carry line numbers."""
    docs: list[AnnotatedDocument] = []
    seen_doc_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise AnnotationError(f"not valid JSON: {exc}", line=lineno) from exc
            doc = document_from_record(record, registry, sentence_delimiters, line=lineno)
            if doc.doc_id in seen_doc_ids:
                raise AnnotationError(f"duplicate doc_id {doc.doc_id!r}", line=lineno, field="doc_id")
            seen_doc_ids.add(doc.doc_id)
            docs.append(doc)
    return docs
