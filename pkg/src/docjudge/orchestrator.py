"""Pipeline: segment, assign agents, evaluate, enforce escalation policy, and
assemble the deterministic document report."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Callable

from docjudge.agents import AgentConfig, AgentKind, EvaluationInput, run_agent
from docjudge.model import Aspect, Document, SectionRecord, SectionSpec, TemplateDefinition, UNMATCHED
from docjudge.segmentation import segment_document
from docjudge.verdicts import (
    EscalationReason,
    EscalationSignal,
    Verdict,
    canonicalize_verdict,
    verdict_from_dict,
)


class ExecutionMode(str, Enum):
    PARALLEL = "parallel"
    SEQUENTIAL = "sequential"


class EmptyPlanError(ValueError):
    """Raised when no (section, agent) task can be scheduled."""


class MixedKeyError(ValueError):
    """Raised when consensus inputs disagree on (section, aspect)."""


@dataclass(frozen=True)
class EscalationPolicy:
    confidence_threshold: float = 0.7
    max_repairs: int = 2
    consensus_spread: int = 2

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")
        if self.max_repairs < 0:
            raise ValueError("max_repairs must be >= 0")
        if self.consensus_spread < 0:
            raise ValueError("consensus_spread must be >= 0")


@dataclass(frozen=True)
class PipelineConfig:
    template_ref: str
    roster: tuple[AgentConfig, ...]
    execution: ExecutionMode = ExecutionMode.SEQUENTIAL
    consensus_k: int = 1
    escalation: EscalationPolicy = field(default_factory=EscalationPolicy)

    def __post_init__(self):
        if not self.roster:
            raise ValueError("roster must not be empty")
        if self.consensus_k < 1:
            raise ValueError("consensus_k must be >= 1")


@dataclass(frozen=True)
class EscalationRecord:
    """One (section, aspect) routed to a human instead of the report body."""

    section_index: int
    aspect: Aspect
    reason: EscalationReason
    details: str
    agent_id: str | None = None
    ai_verdict: Verdict | None = None

    def __post_init__(self):
        if not self.details:
            raise ValueError("escalation details must be non-empty")


@dataclass(frozen=True)
class DocumentReport:
    """Ordered aggregation of verdicts and escalations for one document run."""

    doc_id: str
    template_id: str
    template_version: str
    verdicts: tuple[Verdict, ...]
    escalations: tuple[EscalationRecord, ...]
    overall: dict[str, float]
    started_at: datetime
    finished_at: datetime
    section_headings: tuple[str, ...] = ()


def default_roster() -> tuple[AgentConfig, ...]:
    """One deterministic agent per aspect."""
    return tuple(
        AgentConfig(agent_id=f"{aspect.value}-det", aspect=aspect, kind=AgentKind.DETERMINISTIC)
        for aspect in Aspect
    )


def plan(
    document: Document, config: PipelineConfig, template: TemplateDefinition
) -> list[tuple[SectionRecord, AgentConfig]]:
    """Deterministic task list: sections crossed with the roster agents whose
    aspect the section's spec enables. UNMATCHED sections get only compliance,
    which reports the mismatch."""
    records = segment_document(document, template)
    return plan_records(records, config, template)


def plan_records(
    records: list[SectionRecord], config: PipelineConfig, template: TemplateDefinition
) -> list[tuple[SectionRecord, AgentConfig]]:
    tasks: list[tuple[SectionRecord, AgentConfig]] = []
    for record in records:
        if record.spec_name == UNMATCHED:
            agents = [a for a in config.roster if a.aspect is Aspect.COMPLIANCE]
        else:
            spec = template.spec_for(record.spec_name)
            agents = [a for a in config.roster if spec and a.aspect in spec.aspects]
        agents.sort(key=lambda a: (a.aspect.value, a.agent_id))
        tasks.extend((record, agent) for agent in agents)
    if not tasks:
        raise EmptyPlanError("no (section, agent) tasks could be scheduled")
    return tasks


def _unmatched_compliance_verdict(record: SectionRecord, agent_id: str) -> Verdict:
    heading = record.heading or "(preamble)"
    return Verdict(
        score=1,
        comments=f"Heading {heading!r} does not match any template section.",
        missing_elements=(),
        confidence=1.0,
        aspect=Aspect.COMPLIANCE,
        agent_id=agent_id,
        section_index=record.index,
    )


def consensus(
    verdicts: list[Verdict], spread_limit: int
) -> Verdict | EscalationRecord:
    """Median-of-k with a spread gate. Ties break toward the lower score, then
    the lexicographically smaller agent_id; the merged confidence is the mean."""
    if not verdicts:
        raise ValueError("consensus needs at least one verdict")
    key = (verdicts[0].section_index, verdicts[0].aspect)
    for verdict in verdicts[1:]:
        if (verdict.section_index, verdict.aspect) != key:
            raise MixedKeyError(
                f"consensus inputs mix {key} with {(verdict.section_index, verdict.aspect)}"
            )
    if len(verdicts) == 1:
        return verdicts[0]

    scores = sorted(v.score for v in verdicts)
    spread = scores[-1] - scores[0]
    if spread > spread_limit:
        return EscalationRecord(
            section_index=key[0],
            aspect=key[1],
            reason=EscalationReason.CONSENSUS_DISAGREEMENT,
            details=f"scores {scores} spread {spread} exceeds limit {spread_limit}",
            agent_id=min(v.agent_id for v in verdicts),
        )
    median = scores[(len(scores) - 1) // 2]
    chosen = min(
        (v for v in verdicts if v.score == median), key=lambda v: v.agent_id
    )
    mean_confidence = sum(v.confidence for v in verdicts) / len(verdicts)
    return replace(chosen, confidence=mean_confidence)


def escalation_policy(
    item: Verdict | EscalationSignal,
    spec: SectionSpec | None,
    config: PipelineConfig,
    *,
    section_index: int | None = None,
    aspect: Aspect | None = None,
    agent_id: str | None = None,
) -> Verdict | EscalationRecord:
    """Keep a verdict or turn it into an EscalationRecord.

    Escalates when (a) the agent already raised a signal, (b) confidence is
    strictly below the threshold, or (c) the section is critical and scored
    at most 2."""
    if isinstance(item, EscalationSignal):
        return EscalationRecord(
            section_index=section_index if section_index is not None else -1,
            aspect=aspect if aspect is not None else Aspect.COMPLIANCE,
            reason=item.reason,
            details=item.details or f"agent failed after {item.attempts} attempts",
            agent_id=agent_id,
        )
    threshold = config.escalation.confidence_threshold
    if item.confidence < threshold:
        return EscalationRecord(
            section_index=item.section_index,
            aspect=item.aspect,
            reason=EscalationReason.LOW_CONFIDENCE,
            details=f"confidence {item.confidence:.4f} below threshold {threshold}",
            agent_id=item.agent_id,
            ai_verdict=item,
        )
    if spec is not None and spec.critical and item.score <= 2:
        return EscalationRecord(
            section_index=item.section_index,
            aspect=item.aspect,
            reason=EscalationReason.CRITICAL_SECTION,
            details=f"critical section scored {item.score}",
            agent_id=item.agent_id,
            ai_verdict=item,
        )
    return item


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def evaluate_document(
    document: Document,
    config: PipelineConfig,
    template: TemplateDefinition,
    provider=None,
    *,
    store=None,
    provider_kind: str | None = None,
    clock: Callable[[], datetime] = _utc_now,
) -> DocumentReport:
    """Run the full pipeline for one document and return its report.

    Parallel and sequential execution produce identical reports; per-task
    failures become EscalationRecords, never run failures. When a monitoring
    store is supplied the run is recorded and escalations are enqueued for
    review.
    """
    started_at = clock()
    records = segment_document(document, template)
    tasks = plan_records(records, config, template)
    records_by_index = {record.index: record for record in records}

    def evaluate_task(task: tuple[SectionRecord, AgentConfig]) -> Verdict | EscalationSignal:
        record, agent = task
        if (
            record.spec_name == UNMATCHED
            and agent.aspect is Aspect.COMPLIANCE
            and agent.kind == AgentKind.DETERMINISTIC
        ):
            return _unmatched_compliance_verdict(record, agent.agent_id)
        spec = template.spec_for(record.spec_name)
        siblings = tuple(r for r in records if r.index != record.index)
        evaluation_input = EvaluationInput(
            section=record, spec=spec, template=template, sibling_sections=siblings
        )
        try:
            return run_agent(agent, evaluation_input, provider)
        except Exception as exc:  # per-task failures must not kill the run
            return EscalationSignal(
                reason=EscalationReason.PROVIDER_FAILURE,
                attempts=1,
                details=f"agent {agent.agent_id!r} raised {type(exc).__name__}: {exc}",
            )

    if config.execution is ExecutionMode.PARALLEL and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(tasks))) as pool:
            results = list(pool.map(evaluate_task, tasks))
    else:
        results = [evaluate_task(task) for task in tasks]

    # Group task results per (section, aspect) pair; each pair resolves to
    # exactly one Verdict or one EscalationRecord.
    grouped: dict[tuple[int, Aspect], list[tuple[AgentConfig, Verdict | EscalationSignal]]] = {}
    for (record, agent), result in zip(tasks, results):
        grouped.setdefault((record.index, agent.aspect), []).append((agent, result))

    verdicts: list[Verdict] = []
    escalations: list[EscalationRecord] = []
    for (section_index, aspect), items in sorted(
        grouped.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
    ):
        record = records_by_index[section_index]
        spec = template.spec_for(record.spec_name)
        signals = [(agent, r) for agent, r in items if isinstance(r, EscalationSignal)]
        if signals:
            agent, signal = signals[0]
            escalations.append(
                escalation_policy(
                    signal,
                    spec,
                    config,
                    section_index=section_index,
                    aspect=aspect,
                    agent_id=agent.agent_id,
                )
            )
            continue
        pair_verdicts = [r for _, r in items]
        if len(pair_verdicts) > 1:
            merged = consensus(pair_verdicts, config.escalation.consensus_spread)
            if isinstance(merged, EscalationRecord):
                escalations.append(merged)
                continue
            verdict = merged
        else:
            verdict = pair_verdicts[0]
        outcome = escalation_policy(verdict, spec, config)
        if isinstance(outcome, EscalationRecord):
            escalations.append(outcome)
        else:
            verdicts.append(outcome)

    overall: dict[str, float] = {}
    for aspect in Aspect:
        scores = [v.score for v in verdicts if v.aspect is aspect]
        if scores:
            overall[aspect.value] = round(sum(scores) / len(scores), 2)

    finished_at = clock()
    report = DocumentReport(
        doc_id=document.doc_id,
        template_id=template.template_id,
        template_version=template.version,
        verdicts=tuple(verdicts),
        escalations=tuple(escalations),
        overall=overall,
        started_at=started_at,
        finished_at=finished_at,
        section_headings=tuple(record.heading for record in records),
    )
    if store is not None:
        wall_ms = int((finished_at - started_at).total_seconds() * 1000)
        kind = provider_kind or ("deterministic" if provider is None else "mock")
        store.record_run(report, provider_kind=kind, wall_ms=wall_ms)
    return report


def _escalation_payload(record: EscalationRecord) -> dict:
    return {
        "aspect": record.aspect.value,
        "details": record.details,
        "reason": record.reason.value,
        "section_index": record.section_index,
    }


def canonical_report(report: DocumentReport) -> str:
    """Byte-stable canonical form of a report: excludes wall-clock timestamps
    so identical inputs yield identical bytes across runs and execution modes."""
    verdict_parts = ",".join(canonicalize_verdict(v) for v in report.verdicts)
    escalation_parts = ",".join(
        json.dumps(_escalation_payload(e), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        for e in report.escalations
    )
    overall_parts = ",".join(
        f'"{aspect}":{report.overall[aspect]:.2f}' for aspect in sorted(report.overall)
    )
    headings = json.dumps(list(report.section_headings), ensure_ascii=False, separators=(",", ":"))
    return (
        "{"
        f'"doc_id":{json.dumps(report.doc_id, ensure_ascii=False)},'
        f'"escalations":[{escalation_parts}],'
        f'"overall":{{{overall_parts}}},'
        f'"section_headings":{headings},'
        f'"template_id":{json.dumps(report.template_id, ensure_ascii=False)},'
        f'"template_version":{json.dumps(report.template_version, ensure_ascii=False)},'
        f'"verdicts":[{verdict_parts}]'
        "}"
    )


def report_to_dict(report: DocumentReport) -> dict:
    """Full report payload, timestamps included (not byte-canonical)."""
    payload = json.loads(canonical_report(report))
    payload["started_at"] = report.started_at.isoformat()
    payload["finished_at"] = report.finished_at.isoformat()
    return payload


_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def report_from_dict(payload: dict) -> DocumentReport:
    """Rebuild a DocumentReport from report_to_dict / canonical_report output."""
    verdicts = tuple(verdict_from_dict(v) for v in payload.get("verdicts", []))
    escalations = tuple(
        EscalationRecord(
            section_index=int(e["section_index"]),
            aspect=Aspect(e["aspect"]),
            reason=EscalationReason(e["reason"]),
            details=e["details"],
        )
        for e in payload.get("escalations", [])
    )
    started = payload.get("started_at")
    finished = payload.get("finished_at")
    return DocumentReport(
        doc_id=payload["doc_id"],
        template_id=payload.get("template_id", ""),
        template_version=payload.get("template_version", ""),
        verdicts=verdicts,
        escalations=escalations,
        overall={k: float(v) for k, v in payload.get("overall", {}).items()},
        started_at=datetime.fromisoformat(started) if started else _EPOCH,
        finished_at=datetime.fromisoformat(finished) if finished else _EPOCH,
        section_headings=tuple(payload.get("section_headings", [])),
    )
