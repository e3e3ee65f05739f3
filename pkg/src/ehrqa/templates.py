"""Question generation: turn entity and dependency annotations into
natural-language questions through a configurable template registry.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import AnnotatedDocument, Dependency, RelationClass, Span, TypeRegistry
from .errors import ConfigError, TemplateMisuseError

PLACEHOLDER = "{X}"

QUERY_RIGHT = "query-right"
QUERY_LEFT = "query-left"
NER = "ner"
DIRECTIONS = (QUERY_RIGHT, QUERY_LEFT, NER)

MAX_TEMPLATES_PER_SLOT = 3


@dataclass(frozen=True)
class QuestionTemplate:
    """One question pattern.

    For directional templates ``relation_class`` names the relation class
    and ``pattern`` carries exactly one ``{X}`` placeholder (filled with the
    left entity for query-right, the right entity for query-left).  For NER
    templates ``relation_class`` names an entity type and the pattern has
    no placeholder.
    """

    template_id: str
    relation_class: str
    direction: str
    pattern: str

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"template {self.template_id!r}: unknown direction {self.direction!r}")
        slots = self.pattern.count(PLACEHOLDER)
        if self.direction == NER:
            if slots != 0:
                raise ConfigError(
                    f"NER template {self.template_id!r} must not contain a placeholder"
                )
        elif slots != 1:
            raise ConfigError(
                f"template {self.template_id!r} must contain exactly one {PLACEHOLDER!r} "
                f"placeholder, found {slots}"
            )


@dataclass(frozen=True)
class QuestionDraft:
    """A generated question before context binding.

    ``answer_spans`` are document-coordinate spans of the annotated
    entities answering the question, pre-merge.  ``filled_entity`` is the
    id of the entity substituted into the pattern (None for NER drafts).
    ``source`` names the dependency pair or entity type the draft came from.
    """

    question: str
    doc_id: str
    source: str
    answer_spans: tuple[Span, ...]
    answer_entity_type: str
    filled_entity: str | None
    template_id: str
    direction: str


class TemplateRegistry:
    """Lookup of question templates by relation class (directional) and by
    entity type (NER), preserving configuration order."""

    def __init__(self, templates: list[QuestionTemplate], types: TypeRegistry | None = None):
        ids = [t.template_id for t in templates]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ConfigError(f"duplicate template ids: {sorted(dupes)}")
        self.templates = list(templates)
        self._directional: dict[str, list[QuestionTemplate]] = {}
        self._ner: dict[str, list[QuestionTemplate]] = {}
        per_slot: dict[tuple[str, str], int] = {}
        for t in templates:
            if t.direction == NER:
                self._ner.setdefault(t.relation_class, []).append(t)
            else:
                self._directional.setdefault(t.relation_class, []).append(t)
            key = (t.relation_class, t.direction)
            per_slot[key] = per_slot.get(key, 0) + 1
            if per_slot[key] > MAX_TEMPLATES_PER_SLOT:
                raise ConfigError(
                    f"more than {MAX_TEMPLATES_PER_SLOT} templates for {key}"
                )
        if types is not None:
            known = types.class_names()
            for name in self._directional:
                if name not in known:
                    raise ConfigError(f"template relation class {name!r} not in type registry")
            for name in self._ner:
                if name not in types.ner_queryable_types:
                    raise ConfigError(f"NER template type {name!r} not ner-queryable")

    def directional_for(self, class_name: str) -> list[QuestionTemplate]:
        return self._directional.get(class_name, [])

    def ner_for(self, entity_type: str) -> list[QuestionTemplate]:
        return self._ner.get(entity_type, [])

    def by_id(self, template_id: str) -> QuestionTemplate:
        for t in self.templates:
            if t.template_id == template_id:
                return t
        raise ConfigError(f"no template with id {template_id!r}")

    def subset(self, template_ids: list[str]) -> "TemplateRegistry":
        picked = [self.by_id(tid) for tid in template_ids]
        return TemplateRegistry(picked)


def relation_class_of(dep: Dependency, doc: AnnotatedDocument) -> RelationClass:
    """The class "t(from)-t(to)" of a dependency; endpoints must resolve."""
    left = doc.entity(dep.from_entity)
    right = doc.entity(dep.to_entity)
    return RelationClass(left_type=left.entity_type, right_type=right.entity_type)


def instantiate(template: QuestionTemplate, fill_text: str) -> str:
    """Substitute the placeholder of a directional template with fill_text."""
    if template.direction == NER:
        raise TemplateMisuseError(
            f"NER template {template.template_id!r} takes no fill text"
        )
    if not fill_text:
        raise TemplateMisuseError(f"empty fill text for template {template.template_id!r}")
    return template.pattern.replace(PLACEHOLDER, fill_text)


def generate_relation_questions(
    doc: AnnotatedDocument,
    registry: TemplateRegistry,
    diagnostics: list[str] | None = None,
) -> list[QuestionDraft]:
    """One draft per (dependency, applicable template).

    A query-right draft fills the left entity's text and collects as
    answers ALL right entities that same left entity points to under the
    same relation class; query-left works symmetrically.  Drafts are
    deduplicated per (question, doc, filled entity occurrence), so template
    variants that render identically collapse while distinct mentions with
    equal surface text stay separate.  Dependencies whose class has no
    templates are skipped with a diagnostic.
    """
    drafts: list[QuestionDraft] = []
    seen: set[tuple[str, str, str | None]] = set()
    for dep in doc.dependencies:
        rc = relation_class_of(dep, doc)
        templates = registry.directional_for(rc.name)
        if not templates:
            if diagnostics is not None:
                diagnostics.append(
                    f"doc {doc.doc_id!r}: no templates for relation class {rc.name!r}, skipped"
                )
            continue
        left = doc.entity(dep.from_entity)
        right = doc.entity(dep.to_entity)
        for template in templates:
            if template.direction == QUERY_RIGHT:
                fill, answer_type = left, rc.right_type
                spans = [
                    doc.entity(d.to_entity).span
                    for d in doc.dependencies
                    if d.from_entity == dep.from_entity and relation_class_of(d, doc) == rc
                ]
            else:
                fill, answer_type = right, rc.left_type
                spans = [
                    doc.entity(d.from_entity).span
                    for d in doc.dependencies
                    if d.to_entity == dep.to_entity and relation_class_of(d, doc) == rc
                ]
            question = instantiate(template, fill.text)
            key = (question, doc.doc_id, fill.id)
            if key in seen:
                continue
            seen.add(key)
            drafts.append(
                QuestionDraft(
                    question=question,
                    doc_id=doc.doc_id,
                    source=f"{dep.from_entity}->{dep.to_entity}",
                    answer_spans=tuple(sorted(set(spans))),
                    answer_entity_type=answer_type,
                    filled_entity=fill.id,
                    template_id=template.template_id,
                    direction=template.direction,
                )
            )
    return drafts


def generate_ner_questions(
    doc: AnnotatedDocument,
    registry: TemplateRegistry,
    types: TypeRegistry,
) -> list[QuestionDraft]:
    """One draft per NER template whose entity type occurs in the document,
    collecting the spans of all entities of that type.  Types with no
    entities present produce no draft."""
    drafts: list[QuestionDraft] = []
    for entity_type in sorted(types.ner_queryable_types):
        spans = [e.span for e in doc.entities if e.entity_type == entity_type]
        if not spans:
            continue
        for template in registry.ner_for(entity_type):
            drafts.append(
                QuestionDraft(
                    question=template.pattern,
                    doc_id=doc.doc_id,
                    source=entity_type,
                    answer_spans=tuple(sorted(set(spans))),
                    answer_entity_type=entity_type,
                    filled_entity=None,
                    template_id=template.template_id,
                    direction=NER,
                )
            )
    return drafts
