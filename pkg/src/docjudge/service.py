"""HTTP front door: ingestion, evaluation, reports, review queue, metrics,
and golden-set drift, served as canonical JSON for the review dashboard."""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from docjudge.agents import AgentConfig
from docjudge.model import Aspect, ParseError, TemplateDefinition, parse_template
from docjudge.monitoring import (
    AlreadyResolvedError,
    Correction,
    GoldenCase,
    MonitoringStore,
    ReviewTask,
    TruthLabel,
    UnknownTaskError,
    compute_metrics,
    drift_check,
    golden_case_from_dict,
    missing_element_leaderboard,
    truth_from_corrections,
    truth_from_dict,
)
from docjudge.orchestrator import (
    DocumentReport,
    EscalationPolicy,
    ExecutionMode,
    PipelineConfig,
    canonical_report,
    default_roster,
    evaluate_document,
    report_to_dict,
)
from docjudge.provider import HTTPProvider, MockProvider, ProviderEndpoint
from docjudge.segmentation import DecodeError, EmptyDocumentError, load_document
from docjudge.verdicts import RawModelOutput, Verdict, canonicalize_verdict, validate_verdict


def load_pipeline_config(data: dict, template_ref: str = "template") -> PipelineConfig:
    """Build a PipelineConfig from its JSON mirror; missing roster means the
    default deterministic roster."""
    roster_data = data.get("roster")
    if roster_data:
        roster = tuple(
            AgentConfig(
                agent_id=entry["agent_id"],
                aspect=Aspect(entry["aspect"]),
                kind=entry.get("kind", "deterministic"),
                parameters=entry.get("parameters"),
                prompt_version=int(entry.get("prompt_version", 1)),
            )
            for entry in roster_data
        )
    else:
        roster = default_roster()
    escalation_data = data.get("escalation", {})
    escalation = EscalationPolicy(
        confidence_threshold=float(escalation_data.get("confidence_threshold", 0.7)),
        max_repairs=int(escalation_data.get("max_repairs", 2)),
        consensus_spread=int(escalation_data.get("consensus_spread", 2)),
    )
    return PipelineConfig(
        template_ref=data.get("template_ref", template_ref),
        roster=roster,
        execution=ExecutionMode(data.get("execution", "sequential")),
        consensus_k=int(data.get("consensus_k", 1)),
        escalation=escalation,
    )


def make_provider(spec: dict | None):
    """Provider factory from the config file's provider block."""
    if not spec or spec.get("kind") == "deterministic":
        return None
    if spec["kind"] == "mock":
        return MockProvider(list(spec.get("script", ["{}"])), external=spec.get("external", False))
    if spec["kind"] == "http":
        endpoint = ProviderEndpoint(
            base_url=spec["base_url"],
            model=spec["model"],
            api_key_env=spec.get("api_key_env", ""),
            external=spec.get("external", True),
            timeout_s=float(spec.get("timeout_s", 30.0)),
            max_parallel=int(spec.get("max_parallel", 4)),
        )
        return HTTPProvider(endpoint)
    raise ValueError(f"unknown provider kind {spec.get('kind')!r}")


@dataclass
class ServiceState:
    store: MonitoringStore
    template: TemplateDefinition
    pipeline: PipelineConfig
    provider_spec: dict | None = None
    token: str | None = None
    cors_origin: str = "*"
    golden: tuple[GoldenCase, ...] = ()
    truth: tuple[TruthLabel, ...] = ()
    _doc_locks: dict[str, threading.Lock] = field(default_factory=dict)
    _locks_guard: threading.Lock = field(default_factory=threading.Lock)

    def doc_lock(self, doc_id: str) -> threading.Lock:
        with self._locks_guard:
            if doc_id not in self._doc_locks:
                self._doc_locks[doc_id] = threading.Lock()
            return self._doc_locks[doc_id]


def load_service_state(config_path: str | Path) -> ServiceState:
    config_dir = Path(config_path).parent
    data = json.loads(Path(config_path).read_text(encoding="utf-8"))

    template = parse_template((config_dir / data["template"]).read_text(encoding="utf-8"))
    pipeline = load_pipeline_config(data.get("pipeline", {}), template_ref=template.template_id)
    store = MonitoringStore(data.get("store", ":memory:"))

    golden: list[GoldenCase] = []
    if data.get("golden"):
        golden_dir = config_dir / data["golden"]
        for case_path in sorted(golden_dir.glob("*.json")):
            golden.append(golden_case_from_dict(json.loads(case_path.read_text(encoding="utf-8"))))

    truth: list[TruthLabel] = []
    if data.get("truth"):
        truth = truth_from_dict(
            json.loads((config_dir / data["truth"]).read_text(encoding="utf-8"))
        )

    return ServiceState(
        store=store,
        template=template,
        pipeline=pipeline,
        provider_spec=data.get("provider"),
        token=data.get("token"),
        cors_origin=data.get("cors_origin", "*"),
        golden=tuple(golden),
        truth=tuple(truth),
    )


def _verdict_payload(verdict: Verdict | None) -> dict | None:
    return json.loads(canonicalize_verdict(verdict)) if verdict else None


def _task_view(task: ReviewTask, state: ServiceState, now: datetime) -> dict:
    run = state.store.get_run(task.run_id)
    doc_title = task.run_id
    section_heading = ""
    if run is not None:
        document = state.store.get_document(run.doc_id)
        doc_title = document.title if document else run.doc_id
        headings = run.report.section_headings
        if 0 <= task.section_index < len(headings):
            section_heading = headings[task.section_index]
    return {
        "task_id": task.task_id,
        "run_id": task.run_id,
        "doc_id": run.doc_id if run else None,
        "doc_title": doc_title,
        "section_index": task.section_index,
        "section_heading": section_heading,
        "aspect": task.aspect.value,
        "reason": task.reason.value,
        "status": task.status,
        "ai_verdict": _verdict_payload(task.ai_verdict),
        "agent_id": task.agent_id,
        "created_at": task.created_at.isoformat(),
        "age_seconds": max(0, int((now - task.created_at).total_seconds())),
    }


def _assert_report_schema(report: DocumentReport) -> None:
    """Middleware guard: no verdict leaves the service unless its canonical
    form re-validates."""
    for verdict in report.verdicts:
        raw = RawModelOutput(text=canonicalize_verdict(verdict), produced_by="schema-audit")
        if not isinstance(validate_verdict(raw), Verdict):
            raise AssertionError(f"invalid verdict at rest: {canonicalize_verdict(verdict)}")


class ApiHandler(BaseHTTPRequestHandler):
    """Router for the fixed endpoint set; all responses are canonical JSON."""

    state: ServiceState  # injected by make_server
    protocol_version = "HTTP/1.1"

    # -- plumbing ---------------------------------------------------------

    def log_message(self, format, *args):  # quiet by default
        pass

    def _headers(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", self.state.cors_origin)
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Authorization")
        self.end_headers()

    def _send_json(self, status: int, payload) -> None:
        body = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
        self._headers(status, body)
        self.wfile.write(body)

    def _send_error(self, status: int, code: str, message: str, details: str = "") -> None:
        self._send_json(status, {"code": code, "message": message, "details": details})

    def _read_body(self) -> dict | None:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            parsed = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError):
            return None
        return parsed if isinstance(parsed, dict) else None

    def _authorized(self) -> bool:
        if not self.state.token:
            return True
        return self.headers.get("Authorization") == f"Bearer {self.state.token}"

    def do_OPTIONS(self):
        self._headers(204, b"")

    # -- routing -------------------------------------------------------------

    def do_GET(self):
        if not self._authorized():
            return self._send_error(401, "unauthorized", "missing or invalid bearer token")
        path = self.path.split("?")[0].rstrip("/") or "/"
        if match := re.fullmatch(r"/documents/([^/]+)", path):
            return self._get_document(match.group(1))
        if match := re.fullmatch(r"/reports/([^/]+)", path):
            return self._get_report(match.group(1))
        if path == "/review-queue":
            return self._get_review_queue()
        if path == "/metrics":
            return self._get_metrics()
        if path == "/golden/drift":
            return self._get_drift()
        self._send_error(404, "not_found", f"no route for GET {path}")

    def do_POST(self):
        if not self._authorized():
            return self._send_error(401, "unauthorized", "missing or invalid bearer token")
        path = self.path.split("?")[0].rstrip("/")
        if path == "/documents":
            return self._post_document()
        if match := re.fullmatch(r"/documents/([^/]+)/evaluate", path):
            return self._post_evaluate(match.group(1))
        if match := re.fullmatch(r"/review-queue/([^/]+)/resolve", path):
            return self._post_resolve(match.group(1))
        self._send_error(404, "not_found", f"no route for POST {path}")

    # -- handlers ------------------------------------------------------------

    def _post_document(self):
        body = self._read_body()
        if body is None or "content" not in body:
            return self._send_error(400, "bad_request", "expected JSON body with 'content'")
        doc_id = body.get("doc_id") or f"doc-{datetime.now(timezone.utc).timestamp():.0f}"
        try:
            document = load_document(
                body["content"].encode("utf-8"),
                body.get("format", "markdown"),
                doc_id,
            )
        except (DecodeError, EmptyDocumentError, ParseError, ValueError) as exc:
            return self._send_error(422, "unprocessable_document", str(exc))
        self.state.store.save_document(document)
        self._send_json(201, {"doc_id": document.doc_id, "title": document.title})

    def _get_document(self, doc_id: str):
        document = self.state.store.get_document(doc_id)
        if document is None:
            return self._send_error(404, "not_found", f"no document {doc_id!r}")
        self._send_json(
            200,
            {
                "doc_id": document.doc_id,
                "source_format": document.source_format.value,
                "title": document.title,
                "body": document.body,
                "ingested_at": document.ingested_at.isoformat(),
            },
        )

    def _post_evaluate(self, doc_id: str):
        document = self.state.store.get_document(doc_id)
        if document is None:
            return self._send_error(404, "not_found", f"no document {doc_id!r}")
        provider = make_provider(self.state.provider_spec)
        with self.state.doc_lock(doc_id):
            runs_before = {run.run_id for run in self.state.store.list_runs()}
            report = evaluate_document(
                document,
                self.state.pipeline,
                self.state.template,
                provider,
                store=self.state.store,
                provider_kind=(self.state.provider_spec or {}).get("kind", "deterministic"),
            )
            run_id = next(
                run.run_id
                for run in self.state.store.list_runs()
                if run.run_id not in runs_before
            )
        _assert_report_schema(report)
        self._send_json(
            200,
            {
                "run_id": run_id,
                "canonical": canonical_report(report),
                "report": report_to_dict(report),
            },
        )

    def _get_report(self, run_id: str):
        run = self.state.store.get_run(run_id)
        if run is None:
            return self._send_error(404, "not_found", f"no run {run_id!r}")
        _assert_report_schema(run.report)
        self._send_json(
            200,
            {
                "run_id": run.run_id,
                "doc_id": run.doc_id,
                "provider_kind": run.provider_kind,
                "wall_ms": run.wall_ms,
                "canonical": canonical_report(run.report),
                "report": report_to_dict(run.report),
            },
        )

    def _get_review_queue(self):
        now = datetime.now(timezone.utc)
        tasks = [
            _task_view(task, self.state, now) for task in self.state.store.open_tasks()
        ]
        self._send_json(200, {"tasks": tasks})

    def _post_resolve(self, task_id: str):
        body = self._read_body()
        if body is None or "score" not in body:
            return self._send_error(400, "bad_request", "expected JSON body with 'score'")
        try:
            correction = Correction(
                task_id=task_id,
                human_score=int(body["score"]),
                human_missing=tuple(body.get("missing", [])),
                note=body.get("note", ""),
            )
        except (ValueError, TypeError) as exc:
            return self._send_error(400, "invalid_score", str(exc))
        try:
            task = self.state.store.apply_correction(task_id, correction)
        except UnknownTaskError:
            return self._send_error(404, "not_found", f"no review task {task_id!r}")
        except AlreadyResolvedError as exc:
            return self._send_error(409, "already_resolved", str(exc))
        self._send_json(200, _task_view(task, self.state, datetime.now(timezone.utc)))

    def _get_metrics(self):
        runs = self.state.store.list_runs()
        history = self.state.store.snapshot_history()
        if not runs:
            return self._send_json(
                200, {"current": None, "history": history, "leaderboard": []}
            )
        truth = list(self.state.truth) or truth_from_corrections(self.state.store)
        snapshot = compute_metrics(runs, truth, golden=self.state.golden)
        if self.state.store.metrics_dirty:
            self.state.store.save_snapshot(snapshot)
            history = self.state.store.snapshot_history()
        self._send_json(
            200,
            {
                "current": snapshot.to_dict(),
                "history": history,
                "leaderboard": missing_element_leaderboard(runs),
            },
        )

    def _get_drift(self):
        latest: dict[str, object] = {}
        for run in self.state.store.list_runs():
            latest[run.doc_id] = run
        flags = []
        checked = 0
        for case in self.state.golden:
            run = latest.get(case.doc_ref)
            if run is None:
                continue
            checked += 1
            for flag in drift_check(run, [case]):
                flags.append(
                    {
                        "doc_id": flag.doc_id,
                        "section_index": flag.section_index,
                        "aspect": flag.aspect.value,
                        "expected_score": flag.expected_score,
                        "observed_score": flag.observed_score,
                        "deviation": flag.deviation,
                    }
                )
        self._send_json(200, {"flags": flags, "runs_checked": checked})


def make_server(state: ServiceState, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bind the API server; port 0 picks an ephemeral port (server.server_port)."""
    handler = type("BoundApiHandler", (ApiHandler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve(config_path: str | Path, port: int) -> None:
    state = load_service_state(config_path)
    server = make_server(state, port=port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
