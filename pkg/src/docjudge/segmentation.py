"""Document loading and section segmentation bound to a template."""

from __future__ import annotations

import json
import re
from datetime import datetime, timezone

from docjudge.model import (
    Document,
    ParseError,
    SectionRecord,
    SourceFormat,
    TemplateDefinition,
    UNMATCHED,
)


class DecodeError(ValueError):
    """Raised when document bytes do not decode as UTF-8."""


class EmptyDocumentError(ValueError):
    """Raised for documents with no evaluable text."""


class NoSectionsError(ValueError):
    """Raised when segmentation finds neither a heading nor body text."""


# ATX headings only: 1-6 '#' at column 0, then whitespace-separated text.
_HEADING_RE = re.compile(r"^(#{1,6})(?:[ \t]+(.*?))?[ \t]*$")


def normalize_heading(text: str) -> str:
    """Case-insensitive, whitespace-normalized form used for spec matching."""
    return " ".join(text.split()).lower()


def load_document(
    raw: bytes,
    source_format: SourceFormat | str,
    doc_id: str,
    *,
    ingested_at: datetime | None = None,
) -> Document:
    """Decode raw bytes into a Document.

    For sections-json input the body is the concatenation of the provided
    section bodies in order, and the structured (heading, body) pairs are kept
    on the Document for segmentation.
    """
    source_format = SourceFormat(source_format)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(f"document {doc_id!r} is not valid UTF-8: {exc}") from exc
    if not text.strip():
        raise EmptyDocumentError(f"document {doc_id!r} has no content")
    ingested_at = ingested_at or datetime.now(timezone.utc)

    if source_format is SourceFormat.MARKDOWN:
        title = doc_id
        for line in text.splitlines():
            match = _HEADING_RE.match(line)
            if match:
                title = (match.group(2) or "").strip() or doc_id
                break
        return Document(
            doc_id=doc_id,
            source_format=source_format,
            title=title,
            body=text,
            ingested_at=ingested_at,
        )

    try:
        entries = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"sections-json document {doc_id!r} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ParseError(f"sections-json document {doc_id!r} must be a JSON array")
    pairs: list[tuple[str, str]] = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ParseError(f"sections[{i}]: expected an object")
        heading = entry.get("heading", "")
        body = entry.get("body", "")
        if not isinstance(heading, str) or not isinstance(body, str):
            raise ParseError(f"sections[{i}]: heading and body must be strings")
        pairs.append((heading, body))
    if not pairs:
        raise EmptyDocumentError(f"document {doc_id!r} has no sections")

    body = "".join(body for _, body in pairs)
    title = next((h for h, _ in pairs if h.strip()), doc_id)
    return Document(
        doc_id=doc_id,
        source_format=source_format,
        title=title,
        body=body,
        ingested_at=ingested_at,
        sections=tuple(pairs),
    )


def _split_markdown(body: str) -> list[tuple[str, str]]:
    """Split markdown into (heading, section body) pairs plus a leading
    ("", preamble) pair when text precedes the first heading.

    Heading lines themselves (including their newline) belong to the section
    they open; section bodies are the exact character slices between heading
    lines, so preamble + heading lines + bodies partition the input.
    """
    pairs: list[tuple[str, str]] = []
    lines = body.splitlines(keepends=True)
    current_heading: str | None = None
    buffer: list[str] = []

    for line in lines:
        match = _HEADING_RE.match(line.rstrip("\r\n"))
        if match:
            if current_heading is not None or buffer:
                pairs.append((current_heading or "", "".join(buffer)))
            current_heading = (match.group(2) or "").strip()
            buffer = []
        else:
            buffer.append(line)
    if current_heading is not None or buffer:
        pairs.append((current_heading or "", "".join(buffer)))
    return pairs


def segment_document(document: Document, template: TemplateDefinition) -> list[SectionRecord]:
    """Split a document into index-ordered SectionRecords bound to the template.

    Headings are matched to template sections case-insensitively after
    whitespace normalization; unmatched headings (and any preamble text before
    the first heading) get spec_name UNMATCHED. Out-of-order bound sections are
    flagged with order_violation for the compliance agent.
    """
    if document.sections is not None:
        pairs = list(document.sections)
    else:
        pairs = _split_markdown(document.body)
    if not pairs:
        raise NoSectionsError(f"document {document.doc_id!r} has no heading and no body")

    spec_names = {normalize_heading(spec.name): spec.name for spec in template.sections}
    spec_position = {spec.name: i for i, spec in enumerate(template.sections)}

    records: list[SectionRecord] = []
    max_position_seen = -1
    for index, (heading, body) in enumerate(pairs):
        spec_name = spec_names.get(normalize_heading(heading), UNMATCHED) if heading else UNMATCHED
        order_violation = False
        if spec_name != UNMATCHED:
            position = spec_position[spec_name]
            order_violation = position < max_position_seen
            max_position_seen = max(max_position_seen, position)
        records.append(
            SectionRecord(
                doc_id=document.doc_id,
                index=index,
                heading=heading,
                body=body,
                spec_name=spec_name,
                order_violation=order_violation,
            )
        )
    return records


def export_sections(records: list[SectionRecord]) -> str:
    """Serialize records to canonical sections-json text (byte-stable)."""
    payload = [
        {
            "heading": record.heading,
            "body": record.body,
            "index": record.index,
            "spec_name": record.spec_name,
        }
        for record in records
    ]
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
