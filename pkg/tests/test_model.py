from __future__ import annotations

import json

import pytest

from docjudge.model import (
    Aspect,
    FactAssertion,
    ParseError,
    SectionSpec,
    TemplateDefinition,
    TermRule,
    ValidationError,
    normalize_decimal,
    parse_template,
    serialize_template,
    validate_template,
)


def make_template_json(section_names, **overrides) -> str:
    payload = {
        "template_id": "t",
        "version": "1",
        "sections": [
            {"name": name, "required_elements": [], "critical": False, "aspects": ["completeness"]}
            for name in section_names
        ],
    }
    payload.update(overrides)
    return json.dumps(payload)


def test_parse_template_section_order_preserved():
    names = ["Introduction", "Business Needs", "Solutions", "Test Cases"]
    template = parse_template(make_template_json(names))
    assert [spec.name for spec in template.sections] == names


def test_parse_template_rejects_empty_sections():
    with pytest.raises(ValidationError):
        parse_template(make_template_json([]))


def test_parse_template_rejects_duplicate_section_name():
    with pytest.raises(ValidationError) as excinfo:
        parse_template(make_template_json(["Assumptions", "Assumptions"]))
    assert "Assumptions" in str(excinfo.value)


def test_parse_template_rejects_malformed_json():
    with pytest.raises(ParseError):
        parse_template("{not json")
    with pytest.raises(ParseError):
        parse_template("[]")


def test_parse_template_rejects_unknown_aspect():
    payload = json.loads(make_template_json(["A"]))
    payload["sections"][0]["aspects"] = ["novelty"]
    with pytest.raises(ValidationError):
        parse_template(json.dumps(payload))


def test_parse_template_rejects_duplicate_required_elements():
    payload = json.loads(make_template_json(["A"]))
    payload["sections"][0]["required_elements"] = ["x", "x"]
    with pytest.raises(ValidationError):
        parse_template(json.dumps(payload))


def test_parse_serialize_round_trip(golden_template):
    assert parse_template(serialize_template(golden_template)) == golden_template


def test_serialize_is_canonical(golden_template):
    once = serialize_template(golden_template)
    assert serialize_template(parse_template(once)) == once


def test_validate_template_accepts_parsed_files(golden_template, corpus_template):
    assert validate_template(golden_template) == []
    assert validate_template(corpus_template) == []


def test_validate_template_flags_self_forbidding_glossary():
    template = TemplateDefinition(
        template_id="t",
        version="1",
        sections=(SectionSpec(name="A"),),
        glossary=(TermRule(canonical="client", forbidden_variants=("client",)),),
    )
    violations = validate_template(template)
    assert any(v.path == "glossary[0]" for v in violations)


def test_validate_template_flags_duplicate_fact_pairs():
    template = TemplateDefinition(
        template_id="t",
        version="1",
        sections=(SectionSpec(name="A"),),
        facts=(
            FactAssertion(subject="SLA", predicate="availability", expected_value="99.9"),
            FactAssertion(subject="SLA", predicate="availability", expected_value="98"),
        ),
    )
    violations = validate_template(template)
    assert any(v.path == "facts" for v in violations)

    # oracle: pairwise scan over all fact pairs
    pairs = [(f.subject, f.predicate) for f in template.facts]
    dupes = sum(
        1
        for i in range(len(pairs))
        for j in range(i + 1, len(pairs))
        if pairs[i] == pairs[j]
    )
    assert dupes == 1


def test_validate_template_flags_empty_aspects():
    template = TemplateDefinition(
        template_id="t",
        version="1",
        sections=(SectionSpec(name="A", aspects=frozenset()),),
    )
    assert any("aspects" in v.path for v in validate_template(template))


@pytest.mark.parametrize(
    ("raw", "expected"),
    [
        ("99.90", "99.9"),
        ("99.9", "99.9"),
        ("100.00", "100"),
        ("007", "7"),
        (".5", "0.5"),
        ("12", "12"),
        ("n/a", "n/a"),
        ("  42 ", "42"),
    ],
)
def test_normalize_decimal(raw, expected):
    assert normalize_decimal(raw) == expected


def test_fact_assertion_normalizes_on_construction():
    fact = FactAssertion(subject="SLA", predicate="availability", expected_value="99.90")
    assert fact.expected_value == "99.9"


def test_aspect_enum_covers_all_five():
    assert {a.value for a in Aspect} == {
        "compliance",
        "completeness",
        "terminology",
        "redundancy",
        "factual",
    }
