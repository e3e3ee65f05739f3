"""Exception types shared across the pipeline."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSpanError(PipelineError):
    """A span is degenerate or does not fit inside its context."""


class BoundaryViolationError(PipelineError):
    """A span straddles a sentence (or clause) boundary."""


class DanglingReferenceError(PipelineError):
    """A dependency endpoint does not resolve to an entity in the document."""


class AnnotationError(PipelineError):
    """Malformed or inconsistent annotation input.

    Carries optional line/field context so CLI errors can name the
    offending record.
    """

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field '{field}'")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.field = field


class TemplateMisuseError(PipelineError):
    """A template was instantiated in a way its kind does not allow."""


class ConfigError(PipelineError):
    """Invalid or inconsistent configuration."""


class DegenerateInputError(PipelineError):
    """Reader output has no token positions to score."""


class OracleMisuseError(PipelineError):
    """Oracle backend called with mismatched gold example."""


class ProtocolError(PipelineError):
    """A reader backend response violates the wire contract."""

    def __init__(self, message: str, *, field: str | None = None, qid: str | None = None):
        ctx = []
        if qid is not None:
            ctx.append(f"qid={qid}")
        if field is not None:
            ctx.append(f"field={field}")
        suffix = f" ({', '.join(ctx)})" if ctx else ""
        super().__init__(f"{message}{suffix}")
        self.field = field
        self.qid = qid


class TransportError(PipelineError):
    """A remote reader call failed after retrying."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempt{'s' if attempts != 1 else ''})")
        self.attempts = attempts


class PartialResultError(PipelineError):
    """Extraction aborted midway; carries the records completed so far."""

    def __init__(self, message: str, records: list, failing_qid: str):
        super().__init__(f"{message} (failing qid: {failing_qid})")
        self.records = records
        self.failing_qid = failing_qid


class IllFormedGoldError(PipelineError):
    """Gold annotations violate an assumption of the metric being computed."""


class NotFoundError(PipelineError):
    """A requested item (e.g. a qid) does not exist."""
