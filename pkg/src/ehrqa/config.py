"""Pipeline configuration: one JSON file governs the type registry,
templates, splitting behavior, verification thresholds, and backend
selection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import (
    DEFAULT_BRIDGE_CHARS,
    DEFAULT_CLAUSE_DELIMITERS,
    DEFAULT_SENTENCE_DELIMITERS,
    RelationClass,
    TypeRegistry,
)
from .errors import ConfigError
from .reader import NoiseSpec, VerifierConfig
from .templates import QuestionTemplate, TemplateRegistry

ORACLE = "oracle"
NOISY_ORACLE = "noisy-oracle"
REMOTE = "remote"
BACKENDS = (ORACLE, NOISY_ORACLE, REMOTE)

DEFAULT_NEGATION_LEXICON = (
    "no ",
    "not ",
    "denies",
    "denied",
    "without",
    "absent",
    "无",
    "未见",
    "否认",
    "没有",
    "不伴",
)


@dataclass
class ReaderSelection:
    """Which backend answers reads, plus its parameters."""

    backend: str = ORACLE
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    endpoint: str | None = None
    timeout: float = 30.0
    retries: int = 3

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown reader backend {self.backend!r}; expected one of {BACKENDS}")


@dataclass
class PipelineConfig:
    """Everything tunable, in one place.

    ``doc_kind_map`` optionally restricts which templates apply to each
    document kind and supplies fed-in fill words for template slots whose
    entity type is not NER-queryable; an empty map applies every template
    to every kind.
    """

    entity_types: list[str] = field(default_factory=list)
    ner_queryable_types: list[str] = field(default_factory=list)
    relation_classes: list[dict] = field(default_factory=list)  # {"left": ..., "right": ...}
    templates: list[dict] = field(default_factory=list)
    sentence_delimiters: frozenset[str] = DEFAULT_SENTENCE_DELIMITERS
    bridge_chars: frozenset[str] = DEFAULT_BRIDGE_CHARS
    clause_delimiters: frozenset[str] = DEFAULT_CLAUSE_DELIMITERS
    separator: str = "，"
    include_natural_empties: bool = False
    natural_empty_fraction: float = 1.0
    enable_splitting: bool = True
    enable_plausible: bool = True
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    split_seed: int = 13
    verifier: VerifierConfig = field(default_factory=VerifierConfig)
    negation_lexicon: frozenset[str] = frozenset(DEFAULT_NEGATION_LEXICON)
    reader: ReaderSelection = field(default_factory=ReaderSelection)
    doc_kind_map: dict[str, dict] = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.split_ratios}")
        if not math.isfinite(self.verifier.delta):
            raise ConfigError("verifier delta must be finite in a pipeline config")
        if not (0.0 <= self.natural_empty_fraction <= 1.0):
            raise ConfigError("natural_empty_fraction must lie in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    # -- derived registries --

    def type_registry(self) -> TypeRegistry:
        return TypeRegistry(
            entity_types=frozenset(self.entity_types),
            ner_queryable_types=frozenset(self.ner_queryable_types),
            relation_classes=frozenset(
                RelationClass(rc["left"], rc["right"]) for rc in self.relation_classes
            ),
        )

    def template_registry(self) -> TemplateRegistry:
        templates = [
            QuestionTemplate(
                template_id=t["template_id"],
                relation_class=t["relation_class"],
                direction=t["direction"],
                pattern=t["pattern"],
            )
            for t in self.templates
        ]
        return TemplateRegistry(templates, types=self.type_registry())

    # -- (de)serialization --

    def to_dict(self) -> dict:
        return {
            "entity_types": list(self.entity_types),
            "ner_queryable_types": list(self.ner_queryable_types),
            "relation_classes": [dict(rc) for rc in self.relation_classes],
            "templates": [dict(t) for t in self.templates],
            "sentence_delimiters": sorted(self.sentence_delimiters),
            "bridge_chars": sorted(self.bridge_chars),
            "clause_delimiters": sorted(self.clause_delimiters),
            "separator": self.separator,
            "include_natural_empties": self.include_natural_empties,
            "natural_empty_fraction": self.natural_empty_fraction,
            "enable_splitting": self.enable_splitting,
            "enable_plausible": self.enable_plausible,
            "split": {"ratios": list(self.split_ratios), "seed": self.split_seed},
            "verifier": {
                "beta1": self.verifier.beta1,
                "beta2": self.verifier.beta2,
                "delta": self.verifier.delta,
                "polarity": self.verifier.polarity,
                "max_answer_chars": self.verifier.max_answer_chars,
                "strict_pairs": self.verifier.strict_pairs,
            },
            "negation_lexicon": sorted(self.negation_lexicon),
            "reader": {
                "backend": self.reader.backend,
                "noise": {
                    "boundary_jitter": self.reader.noise.boundary_jitter,
                    "flip_prob": self.reader.noise.flip_prob,
                    "temperature": self.reader.noise.temperature,
                },
                "seed": self.reader.seed,
                "endpoint": self.reader.endpoint,
                "timeout": self.reader.timeout,
                "retries": self.reader.retries,
            },
            "doc_kind_map": {k: dict(v) for k, v in self.doc_kind_map.items()},
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {
            "entity_types",
            "ner_queryable_types",
            "relation_classes",
            "templates",
            "sentence_delimiters",
            "bridge_chars",
            "clause_delimiters",
            "separator",
            "include_natural_empties",
            "natural_empty_fraction",
            "enable_splitting",
            "enable_plausible",
            "split",
            "verifier",
            "negation_lexicon",
            "reader",
            "doc_kind_map",
            "workers",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict = {}
        for key in (
            "entity_types",
            "ner_queryable_types",
            "relation_classes",
            "templates",
            "separator",
            "include_natural_empties",
            "natural_empty_fraction",
            "enable_splitting",
            "enable_plausible",
            "doc_kind_map",
            "workers",
        ):
            if key in data:
                kwargs[key] = data[key]
        for key in ("sentence_delimiters", "bridge_chars", "clause_delimiters", "negation_lexicon"):
            if key in data:
                kwargs[key] = frozenset(data[key])
        if "split" in data:
            kwargs["split_ratios"] = tuple(data["split"]["ratios"])
            kwargs["split_seed"] = int(data["split"].get("seed", 13))
        if "verifier" in data:
            kwargs["verifier"] = VerifierConfig(**data["verifier"])
        if "reader" in data:
            raw = dict(data["reader"])
            if "noise" in raw:
                raw["noise"] = NoiseSpec(**raw["noise"])
            kwargs["reader"] = ReaderSelection(**raw)
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, ensure_ascii=False, indent=2, sort_keys=True)
            handle.write("\n")
