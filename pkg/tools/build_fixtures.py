"""Regenerate the committed test fixtures.

Writes the oracle corpus, the golden report, the metrics run log, and the
golden/drift cases under tests/data/. Deterministic: run it twice and the
outputs are byte-identical. Usage: python tools/build_fixtures.py
"""

from __future__ import annotations

import json
import random
from datetime import datetime, timezone
from pathlib import Path

from docjudge.model import Aspect, parse_template
from docjudge.orchestrator import (
    DocumentReport,
    PipelineConfig,
    canonical_report,
    default_roster,
    evaluate_document,
    report_to_dict,
)
from docjudge.segmentation import load_document
from docjudge.verdicts import Verdict, canonicalize_verdict

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"
FIXED_CLOCK = lambda: datetime(2026, 1, 1, tzinfo=timezone.utc)  # noqa: E731


GOLDEN_TEMPLATE = {
    "template_id": "bizdoc",
    "version": "1.0",
    "sections": [
        {
            "name": "Introduction",
            "required_elements": ["purpose", "scope"],
            "critical": False,
            "aspects": ["compliance", "completeness", "terminology", "redundancy", "factual"],
        },
        {
            "name": "Business Needs",
            "required_elements": ["stakeholders", "constraints"],
            "critical": True,
            "aspects": ["compliance", "completeness", "terminology", "redundancy", "factual"],
        },
        {
            "name": "Solutions",
            "required_elements": ["architecture"],
            "critical": False,
            "aspects": ["compliance", "completeness", "terminology", "redundancy", "factual"],
        },
    ],
    "glossary": [{"canonical": "client", "forbidden_variants": ["customer", "buyer"]}],
    "facts": [{"subject": "SLA", "predicate": "availability", "expected_value": "99.9"}],
}

GOLDEN_DOC = """# Introduction
The purpose of this document is to describe the proposed work for the customer.
Delivery follows the standard playbook.

# Business Needs
The stakeholders are listed with their roles, and the constraints are stated.
The SLA availability commitment is 99.5 percent.

# Solutions
The architecture follows the client platform standard.
The rollout squad owns the deployment pipeline end to end.
The rollout squad owns the deployment pipeline end to end.
"""


def write_golden(data_dir: Path) -> None:
    (data_dir / "template_golden.json").write_text(
        json.dumps(GOLDEN_TEMPLATE, indent=2) + "\n", encoding="utf-8"
    )
    (data_dir / "golden_doc.md").write_text(GOLDEN_DOC, encoding="utf-8")

    template = parse_template(json.dumps(GOLDEN_TEMPLATE))
    document = load_document(GOLDEN_DOC.encode("utf-8"), "markdown", "golden_doc")
    pipeline = PipelineConfig(template_ref="bizdoc", roster=default_roster())
    report = evaluate_document(document, pipeline, template, clock=FIXED_CLOCK)
    (data_dir / "golden_report.json").write_text(canonical_report(report), encoding="utf-8")

    golden_verdict = Verdict(
        score=5,
        comments="",
        missing_elements=(),
        confidence=1.0,
        aspect=Aspect.COMPLETENESS,
        agent_id="golden",
        section_index=0,
    )
    (data_dir / "verdict_golden.txt").write_text(
        canonicalize_verdict(golden_verdict), encoding="utf-8"
    )

    expected = [
        {
            "section_index": v.section_index,
            "aspect": v.aspect.value,
            "expected_score": v.score,
            "expected_missing": list(v.missing_elements),
        }
        for v in report.verdicts
    ]
    cases_dir = data_dir / "golden_cases"
    cases_dir.mkdir(exist_ok=True)
    (cases_dir / "golden_doc.json").write_text(
        json.dumps(
            {"doc": "../golden_doc.md", "format": "markdown", "template": "../template_golden.json", "expected": expected},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    drift_dir = data_dir / "drift_cases"
    drift_dir.mkdir(exist_ok=True)
    drifted = [dict(e) for e in expected]
    drifted[0] = dict(drifted[0], expected_score=5 if drifted[0]["expected_score"] != 5 else 1)
    (drift_dir / "golden_doc.json").write_text(
        json.dumps(
            {"doc": "../golden_doc.md", "format": "markdown", "template": "../template_golden.json", "expected": drifted},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


CORPUS_TEMPLATE = {
    "template_id": "corpus",
    "version": "2.1",
    "sections": [
        {
            "name": "Overview",
            "required_elements": ["objective", "success criteria", "timeline"],
            "critical": False,
            "aspects": ["compliance", "completeness", "terminology", "redundancy", "factual"],
        },
        {
            "name": "Business Needs",
            "required_elements": ["stakeholders", "constraints", "budget"],
            "critical": True,
            "aspects": ["compliance", "completeness", "terminology", "redundancy", "factual"],
        },
        {
            "name": "Assumptions",
            "required_elements": ["risk factors", "data quality"],
            "critical": False,
            "aspects": ["compliance", "completeness", "terminology", "redundancy", "factual"],
        },
        {
            "name": "Delivery Plan",
            "required_elements": ["milestones", "resources"],
            "critical": False,
            "aspects": ["compliance", "completeness", "terminology", "redundancy", "factual"],
        },
    ],
    "glossary": [
        {"canonical": "client", "forbidden_variants": ["customer", "buyer"]},
        {"canonical": "solution", "forbidden_variants": ["fix"]},
    ],
    "facts": [
        {"subject": "SLA", "predicate": "availability", "expected_value": "99.9"},
        {"subject": "delivery", "predicate": "timeline", "expected_value": "12"},
    ],
}

_FILLER = [
    "The team reviewed the approach during the weekly sync meeting.",
    "Each workstream reports progress through the shared tracker.",
    "Documentation lives in the central repository for audit purposes.",
    "The rollout proceeds region by region with staged approvals.",
    "Operational ownership transfers to the platform group after launch.",
]

_VARIANT_SENTENCES = {
    "customer": "The customer expects weekly status updates.",
    "buyer": "The buyer signs off on each milestone.",
    "fix": "A quick fix was proposed for the ingestion gap.",
}


def _build_corpus_doc(rng: random.Random, doc_index: int) -> str:
    sections = [s["name"] for s in CORPUS_TEMPLATE["sections"]]
    if rng.random() < 0.25:
        a, b = rng.sample(range(len(sections)), 2)
        sections[a], sections[b] = sections[b], sections[a]
    if rng.random() < 0.2:
        sections.pop(rng.randrange(len(sections)))
    if rng.random() < 0.3:
        sections.insert(rng.randrange(len(sections) + 1), "Glossary")

    spec_by_name = {s["name"]: s for s in CORPUS_TEMPLATE["sections"]}
    parts = []
    if rng.random() < 0.2:
        parts.append("Prepared for internal review only.\n\n")
    carried: list[str] = []
    for name in sections:
        sentences: list[str] = []
        spec = spec_by_name.get(name)
        if spec:
            for element in spec["required_elements"]:
                if rng.random() < 0.7:
                    sentences.append(f"The {element} for this engagement is described here.")
        sentences.append(rng.choice(_FILLER))
        for variant, sentence in _VARIANT_SENTENCES.items():
            count = rng.choice([0, 0, 0, 1, 2, 4])
            sentences.extend([sentence] * count)
        if name == "Business Needs" and rng.random() < 0.6:
            value = rng.choice(["99.9", "99.5", "98.0"])
            sentences.append(f"The SLA availability commitment is {value} percent.")
        if name in ("Overview", "Delivery Plan") and rng.random() < 0.6:
            weeks = rng.choice(["12", "12", "14"])
            sentences.append(f"The delivery timeline is {weeks} weeks.")
        if sentences and rng.random() < 0.35:
            sentences.append(rng.choice(sentences))
        if carried and rng.random() < 0.3:
            sentences.append(rng.choice(carried))
        rng.shuffle(sentences)
        carried.extend(sentences)
        parts.append(f"# {name}\n" + " ".join(sentences) + "\n\n")
    return "".join(parts)


def write_corpus(data_dir: Path) -> None:
    corpus_dir = data_dir / "corpus"
    corpus_dir.mkdir(exist_ok=True)
    (corpus_dir / "corpus_template.json").write_text(
        json.dumps(CORPUS_TEMPLATE, indent=2) + "\n", encoding="utf-8"
    )
    rng = random.Random(20260808)
    for i in range(20):
        (corpus_dir / f"doc_{i:02d}.md").write_text(
            _build_corpus_doc(rng, i), encoding="utf-8"
        )


def _fixture_verdict(doc_id: str, aspect: Aspect, score: int, missing=(), comments=None) -> Verdict:
    return Verdict(
        score=score,
        comments=comments if comments is not None else f"Synthetic {aspect.value} verdict.",
        missing_elements=tuple(missing),
        confidence=1.0,
        aspect=aspect,
        agent_id=f"{aspect.value}-det",
        section_index=0,
    )


def write_metrics_fixture(data_dir: Path) -> None:
    """100-document run log + ground truth engineered so the metric formulas
    land exactly on accuracy 86.0, consistency 99.0, error rate 2.0,
    agreement 95.0, and 2.5 average review minutes."""
    runs = []
    labels = []
    spurious_finding = "SLA.availability: found=99.5 expected=99.9"
    internal_finding = "the delivery timeline is # weeks: 12 != 14"

    for i in range(100):
        doc_id = f"d{i:03d}"
        ai_completeness = 4
        if i < 90:
            human_completeness = 4
        elif i < 95:
            human_completeness = 3  # off by one: agreement holds, exact match fails
        else:
            human_completeness = 1  # off by three: agreement fails too

        if i <= 85:
            factual_missing: tuple = ()
            expected_findings: list = []
        elif i <= 98:
            factual_missing = (spurious_finding,)
            expected_findings = []
        else:
            factual_missing = ()
            expected_findings = [{"kind": "internal", "text": internal_finding}]

        terminology_comment = (
            "The terminology is clearly consistent." if i == 50 else None
        )

        verdicts = (
            _fixture_verdict(doc_id, Aspect.COMPLIANCE, 5),
            _fixture_verdict(doc_id, Aspect.COMPLETENESS, ai_completeness),
            _fixture_verdict(doc_id, Aspect.TERMINOLOGY, 5, comments=terminology_comment),
            _fixture_verdict(doc_id, Aspect.REDUNDANCY, 5),
            _fixture_verdict(
                doc_id, Aspect.FACTUAL, 5 - min(4, len(factual_missing)), missing=factual_missing
            ),
        )
        overall = {}
        for aspect in Aspect:
            scores = [v.score for v in verdicts if v.aspect is aspect]
            overall[aspect.value] = round(sum(scores) / len(scores), 2)
        report = DocumentReport(
            doc_id=doc_id,
            template_id="metrics-fixture",
            template_version="1",
            verdicts=verdicts,
            escalations=(),
            overall=overall,
            started_at=FIXED_CLOCK(),
            finished_at=FIXED_CLOCK(),
            section_headings=("Overview",),
        )
        runs.append(
            {
                "run_id": f"run-{i + 1:06d}",
                "doc_id": doc_id,
                "provider_kind": "deterministic",
                "wall_ms": 150000,
                "report": report_to_dict(report),
            }
        )
        labels.append(
            {
                "doc_id": doc_id,
                "section_index": 0,
                "aspect": "completeness",
                "human_score": human_completeness,
            }
        )
        labels.append(
            {
                "doc_id": doc_id,
                "section_index": 0,
                "aspect": "factual",
                "expected_findings": expected_findings,
            }
        )

    (data_dir / "metrics_runs.json").write_text(
        json.dumps(runs, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )
    (data_dir / "metrics_truth.json").write_text(
        json.dumps({"labels": labels}, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


PII_DOC = """# Introduction
The purpose and scope are agreed with the client sponsor.
Contact maria.lopez@acme-corp.com or +14155550101 with questions.

# Business Needs
The stakeholders include ops and finance, and the constraints are firm.
Escalations go to duty-manager@acme-corp.com or +442071838750.

# Solutions
The architecture follows the client platform standard.
"""


def write_pii_doc(data_dir: Path) -> None:
    (data_dir / "pii_doc.md").write_text(PII_DOC, encoding="utf-8")


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    write_golden(DATA)
    write_corpus(DATA)
    write_metrics_fixture(DATA)
    write_pii_doc(DATA)
    print(f"fixtures written under {DATA}")


if __name__ == "__main__":
    main()
