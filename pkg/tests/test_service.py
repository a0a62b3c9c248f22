from __future__ import annotations

import json
import threading

import pytest
import requests

from docjudge.model import parse_template
from docjudge.monitoring import MonitoringStore
from docjudge.orchestrator import PipelineConfig, default_roster
from docjudge.service import ServiceState, load_pipeline_config, make_server
from tests.conftest import DATA_DIR


@pytest.fixture()
def service(golden_template):
    state = ServiceState(
        store=MonitoringStore(),
        template=golden_template,
        pipeline=PipelineConfig(template_ref="bizdoc", roster=default_roster()),
    )
    server = make_server(state, port=0)
    thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_port}"
    yield base, state
    server.shutdown()
    server.server_close()


@pytest.fixture()
def escalating_service(golden_template):
    state = ServiceState(
        store=MonitoringStore(),
        template=golden_template,
        pipeline=load_pipeline_config(
            {
                "roster": [
                    {"agent_id": "llm-completeness", "aspect": "completeness", "kind": "llm"}
                ]
            }
        ),
        provider_spec={
            "kind": "mock",
            "script": ['{"score": 4, "comments": "ok", "missing_elements": [], "confidence": 0.4}'],
        },
    )
    server = make_server(state, port=0)
    thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", state
    server.shutdown()
    server.server_close()


def post_golden_doc(base: str) -> str:
    content = (DATA_DIR / "golden_doc.md").read_text(encoding="utf-8")
    response = requests.post(
        f"{base}/documents",
        json={"doc_id": "golden_doc", "format": "markdown", "content": content},
        timeout=5,
    )
    assert response.status_code == 201
    return response.json()["doc_id"]


class TestDocuments:
    def test_post_and_get_document(self, service):
        base, _ = service
        doc_id = post_golden_doc(base)
        fetched = requests.get(f"{base}/documents/{doc_id}", timeout=5)
        assert fetched.status_code == 200
        assert fetched.json()["title"] == "Introduction"

    def test_missing_document_is_404(self, service):
        base, _ = service
        response = requests.get(f"{base}/documents/nope", timeout=5)
        assert response.status_code == 404
        body = response.json()
        assert set(body) == {"code", "message", "details"}

    def test_empty_document_rejected(self, service):
        base, _ = service
        response = requests.post(
            f"{base}/documents", json={"format": "markdown", "content": "  "}, timeout=5
        )
        assert response.status_code == 422

    def test_cors_headers_present(self, service):
        base, _ = service
        response = requests.get(f"{base}/review-queue", timeout=5)
        assert response.headers["Access-Control-Allow-Origin"] == "*"
        preflight = requests.options(f"{base}/documents", timeout=5)
        assert preflight.status_code == 204


class TestEvaluate:
    def test_evaluate_matches_golden_file(self, service, golden_report_text):
        base, _ = service
        doc_id = post_golden_doc(base)
        response = requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10)
        assert response.status_code == 200
        payload = response.json()
        assert payload["canonical"] == golden_report_text
        assert payload["run_id"] == "run-000001"

    def test_report_fetchable_after_evaluate(self, service):
        base, _ = service
        doc_id = post_golden_doc(base)
        run_id = requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10).json()["run_id"]
        report = requests.get(f"{base}/reports/{run_id}", timeout=5)
        assert report.status_code == 200
        assert report.json()["doc_id"] == doc_id

    def test_evaluate_unknown_document_404(self, service):
        base, _ = service
        assert requests.post(f"{base}/documents/ghost/evaluate", timeout=5).status_code == 404


class TestReviewQueue:
    def test_escalating_run_fills_queue(self, escalating_service):
        base, _ = escalating_service
        doc_id = post_golden_doc(base)
        requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10)
        queue = requests.get(f"{base}/review-queue", timeout=5).json()["tasks"]
        assert len(queue) == 3
        assert queue[0]["reason"] == "LowConfidence"
        assert queue[0]["doc_title"] == "Introduction"
        assert queue[0]["section_heading"] == "Introduction"
        assert queue[0]["ai_verdict"]["confidence"] == 0.4

    def test_resolve_round_trip(self, escalating_service):
        base, _ = escalating_service
        doc_id = post_golden_doc(base)
        requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10)
        task_id = requests.get(f"{base}/review-queue", timeout=5).json()["tasks"][0]["task_id"]

        resolved = requests.post(
            f"{base}/review-queue/{task_id}/resolve",
            json={"score": 5, "missing": [], "note": "checked by hand"},
            timeout=5,
        )
        assert resolved.status_code == 200
        assert resolved.json()["status"] == "resolved"

        queue_after = requests.get(f"{base}/review-queue", timeout=5).json()["tasks"]
        assert task_id not in [t["task_id"] for t in queue_after]

        again = requests.post(
            f"{base}/review-queue/{task_id}/resolve", json={"score": 4}, timeout=5
        )
        assert again.status_code == 409
        assert again.json()["code"] == "already_resolved"

    def test_resolve_validates_score(self, escalating_service):
        base, _ = escalating_service
        doc_id = post_golden_doc(base)
        requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10)
        task_id = requests.get(f"{base}/review-queue", timeout=5).json()["tasks"][0]["task_id"]
        bad = requests.post(f"{base}/review-queue/{task_id}/resolve", json={"score": 0}, timeout=5)
        assert bad.status_code == 400

    def test_resolve_unknown_task_404(self, service):
        base, _ = service
        response = requests.post(
            f"{base}/review-queue/task-404/resolve", json={"score": 3}, timeout=5
        )
        assert response.status_code == 404


class TestMetricsAndDrift:
    def test_metrics_empty_store(self, service):
        base, _ = service
        payload = requests.get(f"{base}/metrics", timeout=5).json()
        assert payload == {"current": None, "history": [], "leaderboard": []}

    def test_metrics_after_run(self, service):
        base, _ = service
        doc_id = post_golden_doc(base)
        requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10)
        payload = requests.get(f"{base}/metrics", timeout=5).json()
        assert payload["current"]["avg_review_minutes"]["denominator"] == 1
        assert len(payload["history"]) == 1
        elements = [row["element"] for row in payload["leaderboard"]]
        assert "scope" in elements

    def test_drift_endpoint(self, golden_template, golden_report_text):
        report = json.loads(golden_report_text)
        expected = [
            {
                "section_index": v["section_index"],
                "aspect": v["aspect"],
                "expected_score": v["score"],
            }
            for v in report["verdicts"]
        ]
        from docjudge.monitoring import golden_case_from_dict

        state = ServiceState(
            store=MonitoringStore(),
            template=golden_template,
            pipeline=PipelineConfig(template_ref="bizdoc", roster=default_roster()),
            golden=(golden_case_from_dict({"doc_ref": "golden_doc", "expected": expected}),),
        )
        server = make_server(state, port=0)
        thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{server.server_port}"
        try:
            doc_id = post_golden_doc(base)
            requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10)
            payload = requests.get(f"{base}/golden/drift", timeout=5).json()
            assert payload == {"flags": [], "runs_checked": 1}
        finally:
            server.shutdown()
            server.server_close()


class TestFrontendContract:
    """The dashboard's recorded fixtures must keep matching live responses."""

    FIXTURES = DATA_DIR.parent.parent / "frontend" / "tests" / "fixtures"

    @pytest.fixture(autouse=True)
    def _require_fixtures(self):
        if not self.FIXTURES.exists():
            pytest.skip("frontend fixtures not recorded")

    def test_queue_payload_shape_is_stable(self, escalating_service):
        base, _ = escalating_service
        doc_id = post_golden_doc(base)
        requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10)
        live = requests.get(f"{base}/review-queue", timeout=5).json()
        recorded = json.loads((self.FIXTURES / "queue.json").read_text(encoding="utf-8"))
        assert set(live["tasks"][0]) == set(recorded["tasks"][0])
        assert set(live["tasks"][0]["ai_verdict"]) == set(recorded["tasks"][0]["ai_verdict"])

    def test_metrics_payload_shape_is_stable(self, service):
        base, _ = service
        doc_id = post_golden_doc(base)
        requests.post(f"{base}/documents/{doc_id}/evaluate", timeout=10)
        live = requests.get(f"{base}/metrics", timeout=5).json()
        recorded = json.loads((self.FIXTURES / "metrics.json").read_text(encoding="utf-8"))
        assert set(live) == set(recorded)
        assert set(live["current"]) == set(recorded["current"])
        if live["leaderboard"] and recorded["leaderboard"]:
            assert set(live["leaderboard"][0]) == set(recorded["leaderboard"][0])


class TestAuth:
    def test_bearer_token_required_when_configured(self, golden_template):
        state = ServiceState(
            store=MonitoringStore(),
            template=golden_template,
            pipeline=PipelineConfig(template_ref="bizdoc", roster=default_roster()),
            token="sesame",
        )
        server = make_server(state, port=0)
        thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{server.server_port}"
        try:
            denied = requests.get(f"{base}/review-queue", timeout=5)
            assert denied.status_code == 401
            allowed = requests.get(
                f"{base}/review-queue",
                headers={"Authorization": "Bearer sesame"},
                timeout=5,
            )
            assert allowed.status_code == 200
        finally:
            server.shutdown()
            server.server_close()
