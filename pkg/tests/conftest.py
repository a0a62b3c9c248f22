from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import pytest

from docjudge.agents import EvaluationInput
from docjudge.model import TemplateDefinition, parse_template
from docjudge.segmentation import load_document, segment_document

DATA_DIR = Path(__file__).parent / "data"


def fixed_clock() -> datetime:
    return datetime(2026, 1, 1, tzinfo=timezone.utc)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def golden_template() -> TemplateDefinition:
    return parse_template((DATA_DIR / "template_golden.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def golden_doc_bytes() -> bytes:
    return (DATA_DIR / "golden_doc.md").read_bytes()


@pytest.fixture(scope="session")
def golden_report_text() -> str:
    return (DATA_DIR / "golden_report.json").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def corpus_template() -> TemplateDefinition:
    return parse_template(
        (DATA_DIR / "corpus" / "corpus_template.json").read_text(encoding="utf-8")
    )


@pytest.fixture(scope="session")
def corpus_docs() -> list[tuple[str, bytes]]:
    return [
        (path.stem, path.read_bytes())
        for path in sorted((DATA_DIR / "corpus").glob("doc_*.md"))
    ]


def build_inputs(doc_bytes: bytes, doc_id: str, template: TemplateDefinition) -> list[EvaluationInput]:
    """Segment a markdown document and wrap each record as an agent input."""
    document = load_document(doc_bytes, "markdown", doc_id)
    records = segment_document(document, template)
    inputs = []
    for record in records:
        siblings = tuple(r for r in records if r.index != record.index)
        inputs.append(
            EvaluationInput(
                section=record,
                spec=template.spec_for(record.spec_name),
                template=template,
                sibling_sections=siblings,
            )
        )
    return inputs
