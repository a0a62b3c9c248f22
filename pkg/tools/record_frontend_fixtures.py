"""Record real API responses as frontend test fixtures.

Starts the HTTP service with seeded stores and captures the payloads the
dashboard consumes into frontend/tests/fixtures/. Deterministic apart from
timestamps. Usage: python tools/record_frontend_fixtures.py
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import requests

from docjudge.model import parse_template
from docjudge.monitoring import MonitoringStore, golden_case_from_dict, truth_from_dict
from docjudge.orchestrator import PipelineConfig, default_roster
from docjudge.service import ServiceState, load_pipeline_config, make_server

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"
FIXTURES = ROOT / "frontend" / "tests" / "fixtures"

ASSUMPTIONS_TEMPLATE = {
    "template_id": "assumptions",
    "version": "1.0",
    "sections": [
        {
            "name": "Assumptions",
            "required_elements": ["Risk factors", "Data quality"],
            "critical": False,
            "aspects": ["compliance", "completeness", "terminology", "redundancy", "factual"],
        }
    ],
    "glossary": [],
    "facts": [],
}

DOC_WITH_RISKS = """# Assumptions
The risk factors are listed with owners, and the data quality is ensured by checks.
"""

DOC_WITHOUT_RISKS = """# Assumptions
The data quality is ensured by automated checks before each run.
"""


def run_server(state):
    server = make_server(state, port=0)
    thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_port}"


def save(name: str, payload) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / name).write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    print(f"recorded {name}")


def record_queue_fixtures() -> None:
    """Review queue with escalated sections, plus resolve success/conflict."""
    state = ServiceState(
        store=MonitoringStore(),
        template=parse_template((DATA / "template_golden.json").read_text(encoding="utf-8")),
        pipeline=load_pipeline_config(
            {"roster": [{"agent_id": "llm-completeness", "aspect": "completeness", "kind": "llm"}]}
        ),
        provider_spec={
            "kind": "mock",
            "script": [
                '{"score": 2, "comments": "Sparse section, needs review.", '
                '"missing_elements": ["scope"], "confidence": 0.4}'
            ],
        },
    )
    server, base = run_server(state)
    try:
        content = (DATA / "golden_doc.md").read_text(encoding="utf-8")
        requests.post(
            f"{base}/documents",
            json={"doc_id": "golden_doc", "format": "markdown", "content": content},
            timeout=5,
        )
        requests.post(f"{base}/documents/golden_doc/evaluate", timeout=10)
        queue = requests.get(f"{base}/review-queue", timeout=5).json()
        save("queue.json", queue)

        task_id = queue["tasks"][0]["task_id"]
        resolved = requests.post(
            f"{base}/review-queue/{task_id}/resolve",
            json={"score": 4, "missing": ["scope"], "note": "verified by hand"},
            timeout=5,
        )
        save("resolve_success.json", resolved.json())
        conflict = requests.post(
            f"{base}/review-queue/{task_id}/resolve", json={"score": 3}, timeout=5
        )
        save("resolve_conflict.json", conflict.json())
        save("queue_after_resolve.json", requests.get(f"{base}/review-queue", timeout=5).json())
    finally:
        server.shutdown()
        server.server_close()


def record_metrics_fixture() -> None:
    """Metrics + leaderboard where 70% of documents miss 'Risk factors'."""
    truth_labels = []
    for i in range(10):
        truth_labels.append(
            {
                "doc_id": f"assume-{i:02d}",
                "section_index": 0,
                "aspect": "completeness",
                # three documents where the human disagreed with the AI score
                "human_score": 3 if i in (0, 4, 7) else (4 if i < 7 else 5),
            }
        )
    state = ServiceState(
        store=MonitoringStore(),
        template=parse_template(json.dumps(ASSUMPTIONS_TEMPLATE)),
        pipeline=PipelineConfig(template_ref="assumptions", roster=default_roster()),
        truth=tuple(truth_from_dict({"labels": truth_labels})),
    )
    server, base = run_server(state)
    try:
        for batch in ((0, 4), (4, 7), (7, 10)):
            for i in range(*batch):
                content = DOC_WITHOUT_RISKS if i < 7 else DOC_WITH_RISKS
                requests.post(
                    f"{base}/documents",
                    json={"doc_id": f"assume-{i:02d}", "format": "markdown", "content": content},
                    timeout=5,
                )
                requests.post(f"{base}/documents/assume-{i:02d}/evaluate", timeout=10)
            requests.get(f"{base}/metrics", timeout=5)  # snapshot per batch
        save("metrics.json", requests.get(f"{base}/metrics", timeout=5).json())
    finally:
        server.shutdown()
        server.server_close()


def record_drift_fixture() -> None:
    """Drift endpoint with one injected deviation."""
    golden_report = json.loads((DATA / "golden_report.json").read_text(encoding="utf-8"))
    expected = [
        {
            "section_index": v["section_index"],
            "aspect": v["aspect"],
            "expected_score": v["score"],
        }
        for v in golden_report["verdicts"]
    ]
    expected[0]["expected_score"] = 5 if expected[0]["expected_score"] != 5 else 1
    state = ServiceState(
        store=MonitoringStore(),
        template=parse_template((DATA / "template_golden.json").read_text(encoding="utf-8")),
        pipeline=PipelineConfig(template_ref="bizdoc", roster=default_roster()),
        golden=(golden_case_from_dict({"doc_ref": "golden_doc", "expected": expected}),),
    )
    server, base = run_server(state)
    try:
        content = (DATA / "golden_doc.md").read_text(encoding="utf-8")
        requests.post(
            f"{base}/documents",
            json={"doc_id": "golden_doc", "format": "markdown", "content": content},
            timeout=5,
        )
        requests.post(f"{base}/documents/golden_doc/evaluate", timeout=10)
        save("drift.json", requests.get(f"{base}/golden/drift", timeout=5).json())
    finally:
        server.shutdown()
        server.server_close()


def main() -> None:
    record_queue_fixtures()
    record_metrics_fixture()
    record_drift_fixture()


if __name__ == "__main__":
    main()
