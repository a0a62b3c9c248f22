"""Core domain types: templates, documents, sections, and the template file parser."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum


class Aspect(str, Enum):
    """One evaluation dimension handled by a specialized agent."""

    COMPLIANCE = "compliance"
    COMPLETENESS = "completeness"
    TERMINOLOGY = "terminology"
    REDUNDANCY = "redundancy"
    FACTUAL = "factual"


#: Sentinel spec_name for sections whose heading matches no template section.
UNMATCHED = "UNMATCHED"


class SourceFormat(str, Enum):
    MARKDOWN = "markdown"
    SECTIONS_JSON = "sections-json"


class ParseError(ValueError):
    """Raised when a template or document file is not well-formed."""


class ValidationError(ValueError):
    """Raised when a parsed template violates a type invariant.

    ``field`` names the offending field (dotted path into the template file).
    """

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
        self.reason = message


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validate_template. Data, not a failure."""

    path: str
    message: str


def normalize_decimal(value: str) -> str:
    """Normalize a numeric string to a canonical decimal form ("99.90" -> "99.9").

    Non-numeric strings are returned stripped of surrounding whitespace.
    """
    text = value.strip()
    try:
        dec = Decimal(text)
    except InvalidOperation:
        return text
    normalized = dec.normalize()
    # Decimal("100").normalize() yields "1E+2"; re-expand integral values.
    if normalized == normalized.to_integral_value():
        return str(normalized.quantize(Decimal(1)))
    return str(normalized)


@dataclass(frozen=True)
class TermRule:
    """Glossary rule: one canonical term and the variants it forbids."""

    canonical: str
    forbidden_variants: tuple[str, ...] = ()


@dataclass(frozen=True)
class FactAssertion:
    """Expected value for a (subject, predicate) pair; numeric values normalized."""

    subject: str
    predicate: str
    expected_value: str

    def __post_init__(self):
        object.__setattr__(self, "expected_value", normalize_decimal(self.expected_value))


@dataclass(frozen=True)
class SectionSpec:
    """Declarative expectation for one template section."""

    name: str
    required_elements: tuple[str, ...] = ()
    critical: bool = False
    aspects: frozenset[Aspect] = frozenset(Aspect)


@dataclass(frozen=True)
class TemplateDefinition:
    """Declarative description of a document class: sections, glossary, facts."""

    template_id: str
    version: str
    sections: tuple[SectionSpec, ...]
    glossary: tuple[TermRule, ...] = ()
    facts: tuple[FactAssertion, ...] = ()

    def spec_for(self, name: str) -> SectionSpec | None:
        for spec in self.sections:
            if spec.name == name:
                return spec
        return None


@dataclass(frozen=True)
class Document:
    """A loaded document. ``sections`` holds the structured (heading, body)
    pairs for sections-json sources; body is always the full evaluable text."""

    doc_id: str
    source_format: SourceFormat
    title: str
    body: str
    ingested_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    sections: tuple[tuple[str, str], ...] | None = None


@dataclass(frozen=True)
class SectionRecord:
    """One segmented section bound (or not) to a template section."""

    doc_id: str
    index: int
    heading: str
    body: str
    spec_name: str = UNMATCHED
    order_violation: bool = False


def _require(condition: bool, message: str, field: str) -> None:
    if not condition:
        raise ValidationError(message, field)


def _as_str_list(value: object, path: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ParseError(f"{path}: expected a list of strings")
    return value


def parse_template(raw: str) -> TemplateDefinition:
    """Parse a template definition file (JSON) into a validated TemplateDefinition.

    Raises ParseError for malformed input and ValidationError (naming the
    offending field) for invariant violations.
    """
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"template is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("template root must be a JSON object")

    for key in ("template_id", "version", "sections"):
        if key not in data:
            raise ParseError(f"{key}: missing required key")
    if not isinstance(data["template_id"], str) or not data["template_id"].strip():
        raise ValidationError("must be a non-empty string", "template_id")
    if not isinstance(data["version"], str) or not data["version"].strip():
        raise ValidationError("must be a non-empty string", "version")

    raw_sections = data["sections"]
    if not isinstance(raw_sections, list):
        raise ParseError("sections: expected a list")
    _require(len(raw_sections) > 0, "template must declare at least one section", "sections")

    sections: list[SectionSpec] = []
    seen_names: set[str] = set()
    for i, entry in enumerate(raw_sections):
        path = f"sections[{i}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{path}: expected an object")
        name = entry.get("name")
        if not isinstance(name, str) or not name.strip():
            raise ValidationError("section name must be a non-empty string", f"{path}.name")
        name = name.strip()
        _require(name not in seen_names, f"duplicate section name {name!r}", f"{path}.name")
        seen_names.add(name)

        elements = _as_str_list(entry.get("required_elements", []), f"{path}.required_elements")
        _require(
            len(set(elements)) == len(elements),
            "required_elements labels must be unique",
            f"{path}.required_elements",
        )
        critical = entry.get("critical", False)
        if not isinstance(critical, bool):
            raise ParseError(f"{path}.critical: expected a boolean")

        aspect_names = _as_str_list(entry.get("aspects", [a.value for a in Aspect]), f"{path}.aspects")
        _require(len(aspect_names) > 0, "aspects must be non-empty", f"{path}.aspects")
        aspects = set()
        for a in aspect_names:
            try:
                aspects.add(Aspect(a))
            except ValueError:
                raise ValidationError(f"unknown aspect {a!r}", f"{path}.aspects") from None

        sections.append(
            SectionSpec(
                name=name,
                required_elements=tuple(elements),
                critical=critical,
                aspects=frozenset(aspects),
            )
        )

    glossary: list[TermRule] = []
    for i, entry in enumerate(data.get("glossary", [])):
        path = f"glossary[{i}]"
        if not isinstance(entry, dict) or not isinstance(entry.get("canonical"), str):
            raise ParseError(f"{path}: expected an object with a 'canonical' string")
        variants = _as_str_list(entry.get("forbidden_variants", []), f"{path}.forbidden_variants")
        canonical = entry["canonical"]
        _require(
            canonical not in variants,
            f"canonical term {canonical!r} listed among its own forbidden variants",
            f"{path}.canonical",
        )
        glossary.append(TermRule(canonical=canonical, forbidden_variants=tuple(variants)))

    facts: list[FactAssertion] = []
    seen_pairs: set[tuple[str, str]] = set()
    for i, entry in enumerate(data.get("facts", [])):
        path = f"facts[{i}]"
        if not isinstance(entry, dict):
            raise ParseError(f"{path}: expected an object")
        for key in ("subject", "predicate", "expected_value"):
            if not isinstance(entry.get(key), str):
                raise ParseError(f"{path}.{key}: expected a string")
        pair = (entry["subject"], entry["predicate"])
        _require(pair not in seen_pairs, f"duplicate fact for {pair!r}", f"{path}")
        seen_pairs.add(pair)
        facts.append(
            FactAssertion(
                subject=entry["subject"],
                predicate=entry["predicate"],
                expected_value=entry["expected_value"],
            )
        )

    return TemplateDefinition(
        template_id=data["template_id"],
        version=data["version"],
        sections=tuple(sections),
        glossary=tuple(glossary),
        facts=tuple(facts),
    )


def validate_template(template: TemplateDefinition) -> list[Violation]:
    """Check every type invariant; returns violations with field paths (empty if valid)."""
    violations: list[Violation] = []
    if not template.template_id.strip():
        violations.append(Violation("template_id", "must be non-empty"))
    if not template.sections:
        violations.append(Violation("sections", "template must declare at least one section"))

    seen: set[str] = set()
    for i, spec in enumerate(template.sections):
        path = f"sections[{i}]"
        if not spec.name.strip():
            violations.append(Violation(f"{path}.name", "section name must be non-empty"))
        if spec.name in seen:
            violations.append(Violation(f"{path}.name", f"duplicate section name {spec.name!r}"))
        seen.add(spec.name)
        if not spec.aspects:
            violations.append(Violation(f"{path}.aspects", "aspects must be non-empty"))
        if len(set(spec.required_elements)) != len(spec.required_elements):
            violations.append(
                Violation(f"{path}.required_elements", "required_elements labels must be unique")
            )

    for i, rule in enumerate(template.glossary):
        if rule.canonical in rule.forbidden_variants:
            violations.append(
                Violation(
                    f"glossary[{i}]",
                    f"canonical term {rule.canonical!r} listed among its own forbidden variants",
                )
            )

    pairs: set[tuple[str, str]] = set()
    for i, fact in enumerate(template.facts):
        pair = (fact.subject, fact.predicate)
        if pair in pairs:
            violations.append(Violation("facts", f"duplicate fact for {pair!r}"))
        pairs.add(pair)

    return violations


#: Canonical aspect serialization order (enum declaration order).
_ASPECT_ORDER = {aspect: i for i, aspect in enumerate(Aspect)}


def serialize_template(template: TemplateDefinition) -> str:
    """Serialize to the canonical template file form (parse_template inverse)."""
    payload = {
        "template_id": template.template_id,
        "version": template.version,
        "sections": [
            {
                "name": spec.name,
                "required_elements": list(spec.required_elements),
                "critical": spec.critical,
                "aspects": [a.value for a in sorted(spec.aspects, key=_ASPECT_ORDER.get)],
            }
            for spec in template.sections
        ],
        "glossary": [
            {"canonical": rule.canonical, "forbidden_variants": list(rule.forbidden_variants)}
            for rule in template.glossary
        ],
        "facts": [
            {
                "subject": fact.subject,
                "predicate": fact.predicate,
                "expected_value": fact.expected_value,
            }
            for fact in template.facts
        ],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
