"""Run logging, review queue, correction feedback, golden-set drift checks,
and quality metric computation over the run log."""

from __future__ import annotations

import csv
import io
import json
import re
import sqlite3
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from docjudge.model import Aspect, Document, SourceFormat
from docjudge.orchestrator import (
    DocumentReport,
    EscalationRecord,
    report_from_dict,
    report_to_dict,
)
from docjudge.verdicts import EscalationReason, Verdict, canonicalize_verdict, verdict_from_dict


class StorageError(RuntimeError):
    pass


class AlreadyResolvedError(ValueError):
    pass


class UnknownTaskError(KeyError):
    pass


class NoGoldenMatchError(LookupError):
    pass


class EmptyDenominatorError(ValueError):
    """Raised when the run log holds nothing to compute metrics over."""

    def __init__(self, fields: str):
        super().__init__(f"no data for: {fields}")
        self.fields = fields


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    doc_id: str
    report: DocumentReport
    provider_kind: str
    wall_ms: int


@dataclass(frozen=True)
class GoldenExpectation:
    section_index: int
    aspect: Aspect
    expected_score: int
    expected_missing: tuple[str, ...] = ()

    def __post_init__(self):
        if not 1 <= self.expected_score <= 5:
            raise ValueError("expected_score must be in [1, 5]")


@dataclass(frozen=True)
class GoldenCase:
    """Trusted fixture: a document reference and its expected verdicts."""

    doc_ref: str
    expected: tuple[GoldenExpectation, ...]


@dataclass(frozen=True)
class ReviewTask:
    task_id: str
    run_id: str
    section_index: int
    aspect: Aspect
    reason: EscalationReason
    ai_verdict: Verdict | None
    status: str
    agent_id: str | None = None
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))


@dataclass(frozen=True)
class Correction:
    """A human decision on a review task; immutable once written."""

    task_id: str
    human_score: int
    human_missing: tuple[str, ...] = ()
    note: str = ""
    resolved_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self):
        if not 1 <= self.human_score <= 5:
            raise ValueError("human_score must be in [1, 5]")


@dataclass(frozen=True)
class DriftFlag:
    doc_id: str
    section_index: int
    aspect: Aspect
    expected_score: int
    observed_score: int | None
    deviation: float | None


@dataclass(frozen=True)
class BiasFlag:
    run_id: str
    section_index: int
    aspect: Aspect
    kind: str  # golden_deviation | subjective_language
    detail: str


@dataclass(frozen=True)
class TruthFinding:
    kind: str  # contradiction | internal
    text: str


@dataclass(frozen=True)
class TruthLabel:
    """Ground-truth label for one (document, section, aspect) cell.

    ``human_score`` labels score agreement; ``expected_findings`` labels the
    factual agent's expected contradiction findings (empty tuple means "no
    contradictions expected"; None means unlabeled)."""

    doc_id: str
    section_index: int
    aspect: Aspect
    human_score: int | None = None
    expected_findings: tuple[TruthFinding, ...] | None = None


@dataclass(frozen=True)
class MetricValue:
    value: float
    denominator: int

    def __post_init__(self):
        if self.denominator <= 0:
            raise ValueError("reported metrics must have a positive denominator")


@dataclass(frozen=True)
class MetricsSnapshot:
    """Dashboard quantities; unreported fields (zero denominator) are None."""

    accuracy_pct: MetricValue | None
    consistency_pct: MetricValue | None
    avg_review_minutes: MetricValue | None
    error_rate_pct: MetricValue | None
    bias_flags: MetricValue
    agreement_pct: MetricValue | None
    computed_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def __post_init__(self):
        for name in ("accuracy_pct", "consistency_pct", "error_rate_pct", "agreement_pct"):
            metric: MetricValue | None = getattr(self, name)
            if metric is not None and not 0.0 <= metric.value <= 100.0:
                raise ValueError(f"{name} must be within [0, 100]")

    def to_dict(self) -> dict:
        def unpack(metric: MetricValue | None):
            if metric is None:
                return None
            return {"value": metric.value, "denominator": metric.denominator}

        return {
            "accuracy_pct": unpack(self.accuracy_pct),
            "consistency_pct": unpack(self.consistency_pct),
            "avg_review_minutes": unpack(self.avg_review_minutes),
            "error_rate_pct": unpack(self.error_rate_pct),
            "bias_flags": unpack(self.bias_flags),
            "agreement_pct": unpack(self.agreement_pct),
            "computed_at": self.computed_at.isoformat(),
        }


DEFAULT_SUBJECTIVE_PATTERNS: tuple[re.Pattern[str], ...] = tuple(
    re.compile(rf"\b{phrase}\b", re.IGNORECASE)
    for phrase in ("obviously", "clearly", "everyone knows", "terrible", "awful", "nonsense")
)


def truth_from_dict(data: dict) -> list[TruthLabel]:
    labels = []
    for entry in data.get("labels", []):
        findings_raw = entry.get("expected_findings")
        findings = (
            tuple(TruthFinding(kind=f["kind"], text=f["text"]) for f in findings_raw)
            if findings_raw is not None
            else None
        )
        labels.append(
            TruthLabel(
                doc_id=entry["doc_id"],
                section_index=int(entry["section_index"]),
                aspect=Aspect(entry["aspect"]),
                human_score=entry.get("human_score"),
                expected_findings=findings,
            )
        )
    return labels


def golden_case_from_dict(data: dict) -> GoldenCase:
    return GoldenCase(
        doc_ref=data["doc_ref"],
        expected=tuple(
            GoldenExpectation(
                section_index=int(e["section_index"]),
                aspect=Aspect(e["aspect"]),
                expected_score=int(e["expected_score"]),
                expected_missing=tuple(e.get("expected_missing", [])),
            )
            for e in data.get("expected", [])
        ),
    )


def compute_metrics(
    runs: Sequence[RunRecord],
    truth: Sequence[TruthLabel],
    *,
    golden: Sequence[GoldenCase] = (),
    subjective_patterns: tuple[re.Pattern[str], ...] = DEFAULT_SUBJECTIVE_PATTERNS,
) -> MetricsSnapshot:
    """Pure function of (runs, truth): the dashboard metric formulas.

    accuracy_pct    - factual verdicts whose finding set equals the truth label
    consistency_pct - documents with zero missed internal-kind findings
    error_rate_pct  - score-labeled verdicts that disagree exactly, over ALL verdicts
    agreement_pct   - labeled (section, aspect) pairs within +/-1 score point
    avg_review_minutes - mean run wall time
    bias_flags      - bias_scan count over the same runs
    """
    if not runs:
        raise EmptyDenominatorError("runs")

    labels = {(label.doc_id, label.section_index, label.aspect): label for label in truth}

    factual_total = factual_correct = 0
    labeled_pairs = within_one = 0
    misclassified = all_verdicts = 0
    for run in runs:
        for verdict in run.report.verdicts:
            all_verdicts += 1
            label = labels.get((run.doc_id, verdict.section_index, verdict.aspect))
            if label is None:
                continue
            if verdict.aspect is Aspect.FACTUAL and label.expected_findings is not None:
                factual_total += 1
                expected_texts = sorted(f.text for f in label.expected_findings)
                if sorted(verdict.missing_elements) == expected_texts:
                    factual_correct += 1
            if label.human_score is not None:
                labeled_pairs += 1
                if abs(verdict.score - label.human_score) <= 1:
                    within_one += 1
                if verdict.score != label.human_score:
                    misclassified += 1

    latest_by_doc: dict[str, RunRecord] = {}
    for run in runs:
        latest_by_doc[run.doc_id] = run
    docs_total = len(latest_by_doc)
    docs_consistent = 0
    for doc_id, run in latest_by_doc.items():
        reported: set[str] = set()
        for verdict in run.report.verdicts:
            if verdict.aspect is Aspect.FACTUAL:
                reported.update(verdict.missing_elements)
        missed = False
        for label in truth:
            if label.doc_id != doc_id or label.expected_findings is None:
                continue
            for finding in label.expected_findings:
                if finding.kind == "internal" and finding.text not in reported:
                    missed = True
        if not missed:
            docs_consistent += 1

    bias = bias_scan(runs, golden_cases=golden, patterns=subjective_patterns)

    def pct(numerator: int, denominator: int) -> MetricValue | None:
        if denominator == 0:
            return None
        return MetricValue(value=numerator * 100.0 / denominator, denominator=denominator)

    avg_minutes = MetricValue(
        value=sum(run.wall_ms for run in runs) / len(runs) / 60000.0, denominator=len(runs)
    )
    return MetricsSnapshot(
        accuracy_pct=pct(factual_correct, factual_total),
        consistency_pct=pct(docs_consistent, docs_total),
        avg_review_minutes=avg_minutes,
        error_rate_pct=pct(misclassified, all_verdicts),
        bias_flags=MetricValue(value=float(len(bias)), denominator=len(runs)),
        agreement_pct=pct(within_one, labeled_pairs),
    )


def drift_check(
    run: RunRecord, golden: Sequence[GoldenCase], tolerance: float = 0.5
) -> list[DriftFlag]:
    """Flag every (section, aspect) whose score deviates from the golden
    expectation by more than the tolerance (default flags any integer step)."""
    case = next((c for c in golden if c.doc_ref == run.doc_id), None)
    if case is None:
        raise NoGoldenMatchError(f"no golden case for document {run.doc_id!r}")
    observed = {(v.section_index, v.aspect): v for v in run.report.verdicts}
    flags = []
    for expectation in case.expected:
        verdict = observed.get((expectation.section_index, expectation.aspect))
        if verdict is None:
            flags.append(
                DriftFlag(
                    doc_id=run.doc_id,
                    section_index=expectation.section_index,
                    aspect=expectation.aspect,
                    expected_score=expectation.expected_score,
                    observed_score=None,
                    deviation=None,
                )
            )
            continue
        deviation = abs(verdict.score - expectation.expected_score)
        if deviation > tolerance:
            flags.append(
                DriftFlag(
                    doc_id=run.doc_id,
                    section_index=expectation.section_index,
                    aspect=expectation.aspect,
                    expected_score=expectation.expected_score,
                    observed_score=verdict.score,
                    deviation=float(deviation),
                )
            )
    return flags


def bias_scan(
    runs: Sequence[RunRecord],
    golden_cases: Sequence[GoldenCase] = (),
    patterns: tuple[re.Pattern[str], ...] = DEFAULT_SUBJECTIVE_PATTERNS,
    corrections: Sequence[tuple[str, Verdict, int]] = (),
) -> list[BiasFlag]:
    """Flag verdicts deviating >= 2 from trusted scores (golden cases or human
    corrections), or using subjective language. ``corrections`` items are
    (run_id, ai_verdict, human_score) triples."""
    case_by_doc = {case.doc_ref: case for case in golden_cases}
    flags: list[BiasFlag] = []
    for run_id, verdict, human_score in corrections:
        if abs(verdict.score - human_score) >= 2:
            flags.append(
                BiasFlag(
                    run_id=run_id,
                    section_index=verdict.section_index,
                    aspect=verdict.aspect,
                    kind="golden_deviation",
                    detail=f"score {verdict.score} deviates from human correction {human_score}",
                )
            )
    for run in runs:
        case = case_by_doc.get(run.doc_id)
        expectations = (
            {(e.section_index, e.aspect): e for e in case.expected} if case else {}
        )
        for verdict in run.report.verdicts:
            expectation = expectations.get((verdict.section_index, verdict.aspect))
            if expectation and abs(verdict.score - expectation.expected_score) >= 2:
                flags.append(
                    BiasFlag(
                        run_id=run.run_id,
                        section_index=verdict.section_index,
                        aspect=verdict.aspect,
                        kind="golden_deviation",
                        detail=(
                            f"score {verdict.score} deviates from golden "
                            f"{expectation.expected_score}"
                        ),
                    )
                )
            for pattern in patterns:
                match = pattern.search(verdict.comments)
                if match:
                    flags.append(
                        BiasFlag(
                            run_id=run.run_id,
                            section_index=verdict.section_index,
                            aspect=verdict.aspect,
                            kind="subjective_language",
                            detail=f"comment contains {match.group(0)!r}",
                        )
                    )
                    break
    return flags


def missing_element_leaderboard(runs: Sequence[RunRecord], top: int = 10) -> list[dict]:
    """Share of documents whose coverage verdicts report each element missing
    (latest run per document)."""
    latest: dict[str, RunRecord] = {}
    for run in runs:
        latest[run.doc_id] = run
    counts: dict[str, int] = {}
    for run in latest.values():
        elements: set[str] = set()
        for verdict in run.report.verdicts:
            if verdict.aspect in (Aspect.COMPLETENESS, Aspect.COMPLIANCE):
                elements.update(verdict.missing_elements)
        for element in elements:
            counts[element] = counts.get(element, 0) + 1
    total = len(latest)
    rows = [
        {
            "element": element,
            "documents_missing": count,
            "documents_total": total,
            "pct": round(count * 100.0 / total, 1),
        }
        for element, count in counts.items()
    ]
    rows.sort(key=lambda row: (-row["pct"], row["element"]))
    return rows[:top]


_SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    run_id TEXT PRIMARY KEY,
    doc_id TEXT NOT NULL,
    provider_kind TEXT NOT NULL,
    wall_ms INTEGER NOT NULL,
    report_json TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TRIGGER IF NOT EXISTS runs_append_only_update
    BEFORE UPDATE ON runs
    BEGIN SELECT RAISE(ABORT, 'run log is append-only'); END;
CREATE TRIGGER IF NOT EXISTS runs_append_only_delete
    BEFORE DELETE ON runs
    BEGIN SELECT RAISE(ABORT, 'run log is append-only'); END;
CREATE TABLE IF NOT EXISTS review_tasks (
    task_id TEXT PRIMARY KEY,
    run_id TEXT NOT NULL,
    section_index INTEGER NOT NULL,
    aspect TEXT NOT NULL,
    reason TEXT NOT NULL,
    agent_id TEXT,
    ai_verdict_json TEXT,
    status TEXT NOT NULL,
    created_at TEXT NOT NULL,
    UNIQUE(run_id, section_index, aspect)
);
CREATE TABLE IF NOT EXISTS corrections (
    task_id TEXT PRIMARY KEY,
    human_score INTEGER NOT NULL,
    human_missing_json TEXT NOT NULL,
    note TEXT NOT NULL,
    resolved_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS calibration_log (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    entry_json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS prompt_versions (
    agent_id TEXT PRIMARY KEY,
    version INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS documents (
    doc_id TEXT PRIMARY KEY,
    doc_json TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS snapshots (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    snapshot_json TEXT NOT NULL
);
"""


class MonitoringStore:
    """Embedded transactional store (sqlite) with canonical-JSON values.

    The run log is append-only, enforced by sqlite triggers; review tasks are
    the only mutable rows (open -> resolved). Safe for one writer and many
    readers; all writes serialize on an internal lock."""

    def __init__(self, path: str | Path = ":memory:"):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._lock = threading.RLock()
        self.metrics_dirty = False
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # -- run log -----------------------------------------------------------

    def record_run(
        self, report: DocumentReport, *, provider_kind: str = "deterministic", wall_ms: int = 0
    ) -> RunRecord:
        """Append a run, auto-enqueue review tasks for its escalations, and
        mark the dashboard metrics for recompute."""
        with self._lock:
            count = self._conn.execute("SELECT COUNT(*) FROM runs").fetchone()[0]
            run_id = f"run-{count + 1:06d}"
            payload = report_to_dict(report)
            try:
                self._conn.execute(
                    "INSERT INTO runs VALUES (?, ?, ?, ?, ?, ?)",
                    (
                        run_id,
                        report.doc_id,
                        provider_kind,
                        wall_ms,
                        json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
                        datetime.now(timezone.utc).isoformat(),
                    ),
                )
                self._conn.commit()
            except sqlite3.Error as exc:
                raise StorageError(f"failed to record run: {exc}") from exc
            record = RunRecord(
                run_id=run_id,
                doc_id=report.doc_id,
                report=report,
                provider_kind=provider_kind,
                wall_ms=wall_ms,
            )
            for escalation in report.escalations:
                self.enqueue_review(escalation, run_id)
            self.metrics_dirty = True
            return record

    def get_run(self, run_id: str) -> RunRecord | None:
        row = self._conn.execute(
            "SELECT run_id, doc_id, provider_kind, wall_ms, report_json FROM runs WHERE run_id = ?",
            (run_id,),
        ).fetchone()
        if row is None:
            return None
        return RunRecord(
            run_id=row[0],
            doc_id=row[1],
            report=report_from_dict(json.loads(row[4])),
            provider_kind=row[2],
            wall_ms=row[3],
        )

    def list_runs(self) -> list[RunRecord]:
        rows = self._conn.execute(
            "SELECT run_id, doc_id, provider_kind, wall_ms, report_json FROM runs ORDER BY run_id"
        ).fetchall()
        return [
            RunRecord(
                run_id=row[0],
                doc_id=row[1],
                report=report_from_dict(json.loads(row[4])),
                provider_kind=row[2],
                wall_ms=row[3],
            )
            for row in rows
        ]

    def export_runs(self) -> str:
        """Canonical JSON array of every run record."""
        payload = [
            {
                "run_id": run.run_id,
                "doc_id": run.doc_id,
                "provider_kind": run.provider_kind,
                "wall_ms": run.wall_ms,
                "report": report_to_dict(run.report),
            }
            for run in self.list_runs()
        ]
        return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    # -- review queue --------------------------------------------------------

    def enqueue_review(self, escalation: EscalationRecord, run_id: str) -> ReviewTask:
        """Persist an open ReviewTask; idempotent per (run, section, aspect)."""
        with self._lock:
            existing = self._task_row(
                "run_id = ? AND section_index = ? AND aspect = ?",
                (run_id, escalation.section_index, escalation.aspect.value),
            )
            if existing is not None:
                return existing
            count = self._conn.execute("SELECT COUNT(*) FROM review_tasks").fetchone()[0]
            task_id = f"task-{count + 1:06d}"
            created_at = datetime.now(timezone.utc)
            verdict_json = (
                canonicalize_verdict(escalation.ai_verdict) if escalation.ai_verdict else None
            )
            try:
                self._conn.execute(
                    "INSERT INTO review_tasks VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        task_id,
                        run_id,
                        escalation.section_index,
                        escalation.aspect.value,
                        escalation.reason.value,
                        escalation.agent_id,
                        verdict_json,
                        "open",
                        created_at.isoformat(),
                    ),
                )
                self._conn.commit()
            except sqlite3.Error as exc:
                raise StorageError(f"failed to enqueue review task: {exc}") from exc
            return ReviewTask(
                task_id=task_id,
                run_id=run_id,
                section_index=escalation.section_index,
                aspect=escalation.aspect,
                reason=escalation.reason,
                ai_verdict=escalation.ai_verdict,
                status="open",
                agent_id=escalation.agent_id,
                created_at=created_at,
            )

    def _task_row(self, where: str, params: tuple) -> ReviewTask | None:
        row = self._conn.execute(
            "SELECT task_id, run_id, section_index, aspect, reason, agent_id, ai_verdict_json, "
            f"status, created_at FROM review_tasks WHERE {where}",
            params,
        ).fetchone()
        if row is None:
            return None
        verdict = verdict_from_dict(json.loads(row[6])) if row[6] else None
        return ReviewTask(
            task_id=row[0],
            run_id=row[1],
            section_index=row[2],
            aspect=Aspect(row[3]),
            reason=EscalationReason(row[4]),
            ai_verdict=verdict,
            status=row[7],
            agent_id=row[5],
            created_at=datetime.fromisoformat(row[8]),
        )

    def get_task(self, task_id: str) -> ReviewTask | None:
        return self._task_row("task_id = ?", (task_id,))

    def open_tasks(self) -> list[ReviewTask]:
        """Open tasks, oldest first (age descending)."""
        rows = self._conn.execute(
            "SELECT task_id FROM review_tasks WHERE status = 'open' ORDER BY created_at, task_id"
        ).fetchall()
        return [self.get_task(row[0]) for row in rows]

    def apply_correction(self, task_id: str, correction: Correction) -> ReviewTask:
        """Resolve an open task with a human decision, append it to the
        calibration log, and bump the affected agent's prompt version."""
        with self._lock:
            task = self.get_task(task_id)
            if task is None:
                raise UnknownTaskError(task_id)
            if task.status != "open":
                raise AlreadyResolvedError(f"task {task_id} is already resolved")
            agent_id = task.agent_id or f"{task.aspect.value}-agent"
            new_version = self.prompt_version(agent_id) + 1
            try:
                self._conn.execute(
                    "INSERT INTO corrections VALUES (?, ?, ?, ?, ?)",
                    (
                        task_id,
                        correction.human_score,
                        json.dumps(list(correction.human_missing), ensure_ascii=False),
                        correction.note,
                        correction.resolved_at.isoformat(),
                    ),
                )
                self._conn.execute(
                    "UPDATE review_tasks SET status = 'resolved' WHERE task_id = ?", (task_id,)
                )
                self._conn.execute(
                    "INSERT INTO prompt_versions (agent_id, version) VALUES (?, ?) "
                    "ON CONFLICT(agent_id) DO UPDATE SET version = excluded.version",
                    (agent_id, new_version),
                )
                entry = {
                    "task_id": task_id,
                    "agent_id": agent_id,
                    "aspect": task.aspect.value,
                    "human_score": correction.human_score,
                    "human_missing": list(correction.human_missing),
                    "note": correction.note,
                    "resolved_at": correction.resolved_at.isoformat(),
                    "prompt_version_after": new_version,
                }
                self._conn.execute(
                    "INSERT INTO calibration_log (entry_json) VALUES (?)",
                    (json.dumps(entry, sort_keys=True, separators=(",", ":"), ensure_ascii=False),),
                )
                self._conn.commit()
            except sqlite3.Error as exc:
                raise StorageError(f"failed to apply correction: {exc}") from exc
            self.metrics_dirty = True
            resolved = self.get_task(task_id)
            assert resolved is not None
            return resolved

    def get_correction(self, task_id: str) -> Correction | None:
        row = self._conn.execute(
            "SELECT task_id, human_score, human_missing_json, note, resolved_at "
            "FROM corrections WHERE task_id = ?",
            (task_id,),
        ).fetchone()
        if row is None:
            return None
        return Correction(
            task_id=row[0],
            human_score=row[1],
            human_missing=tuple(json.loads(row[2])),
            note=row[3],
            resolved_at=datetime.fromisoformat(row[4]),
        )

    def calibration_entries(self) -> list[dict]:
        rows = self._conn.execute(
            "SELECT entry_json FROM calibration_log ORDER BY seq"
        ).fetchall()
        return [json.loads(row[0]) for row in rows]

    def prompt_version(self, agent_id: str) -> int:
        row = self._conn.execute(
            "SELECT version FROM prompt_versions WHERE agent_id = ?", (agent_id,)
        ).fetchone()
        return row[0] if row else 1

    # -- documents -----------------------------------------------------------

    def save_document(self, document: Document) -> None:
        payload = {
            "doc_id": document.doc_id,
            "source_format": document.source_format.value,
            "title": document.title,
            "body": document.body,
            "ingested_at": document.ingested_at.isoformat(),
            "sections": [list(pair) for pair in document.sections] if document.sections else None,
        }
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO documents VALUES (?, ?)",
                (document.doc_id, json.dumps(payload, sort_keys=True, ensure_ascii=False)),
            )
            self._conn.commit()

    def get_document(self, doc_id: str) -> Document | None:
        row = self._conn.execute(
            "SELECT doc_json FROM documents WHERE doc_id = ?", (doc_id,)
        ).fetchone()
        if row is None:
            return None
        payload = json.loads(row[0])
        sections = payload.get("sections")
        return Document(
            doc_id=payload["doc_id"],
            source_format=SourceFormat(payload["source_format"]),
            title=payload["title"],
            body=payload["body"],
            ingested_at=datetime.fromisoformat(payload["ingested_at"]),
            sections=tuple((h, b) for h, b in sections) if sections else None,
        )

    # -- metric snapshots ------------------------------------------------------

    def save_snapshot(self, snapshot: MetricsSnapshot) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO snapshots (snapshot_json) VALUES (?)",
                (
                    json.dumps(
                        snapshot.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
                    ),
                ),
            )
            self._conn.commit()
            self.metrics_dirty = False

    def snapshot_history(self) -> list[dict]:
        rows = self._conn.execute("SELECT snapshot_json FROM snapshots ORDER BY seq").fetchall()
        return [json.loads(row[0]) for row in rows]


_CSV_FIELDS = (
    "computed_at",
    "accuracy_pct",
    "consistency_pct",
    "avg_review_minutes",
    "error_rate_pct",
    "bias_flags",
    "agreement_pct",
)


def metrics_history_csv(snapshots: Iterable[dict]) -> str:
    """Spreadsheet export of snapshot history (values only, blank = unreported)."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for snapshot in snapshots:
        row = {"computed_at": snapshot.get("computed_at", "")}
        for fieldname in _CSV_FIELDS[1:]:
            metric = snapshot.get(fieldname)
            row[fieldname] = "" if metric is None else metric["value"]
        writer.writerow(row)
    return buffer.getvalue()


def correction_pairs(store: MonitoringStore) -> list[tuple[str, Verdict, int]]:
    """(run_id, ai_verdict, human_score) for every resolved task that carried
    an AI verdict; the feed for correction-aware bias scans."""
    pairs = []
    for entry in store.calibration_entries():
        task = store.get_task(entry["task_id"])
        if task is None or task.ai_verdict is None:
            continue
        pairs.append((task.run_id, task.ai_verdict, entry["human_score"]))
    return pairs


def truth_from_corrections(store: MonitoringStore) -> list[TruthLabel]:
    """Derive score labels from resolved review tasks (human corrections)."""
    labels = []
    for entry in store.calibration_entries():
        task = store.get_task(entry["task_id"])
        if task is None:
            continue
        run = store.get_run(task.run_id)
        if run is None:
            continue
        labels.append(
            TruthLabel(
                doc_id=run.doc_id,
                section_index=task.section_index,
                aspect=task.aspect,
                human_score=entry["human_score"],
            )
        )
    return labels


def run_record_from_dict(data: dict) -> RunRecord:
    return RunRecord(
        run_id=data["run_id"],
        doc_id=data["doc_id"],
        report=report_from_dict(data["report"]),
        provider_kind=data.get("provider_kind", "unknown"),
        wall_ms=int(data.get("wall_ms", 0)),
    )
