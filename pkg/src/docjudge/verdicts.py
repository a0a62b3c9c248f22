"""Verdict schema: validation and normalization of raw model output, the
bounded repair loop, and the canonical at-rest form."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

from docjudge.model import Aspect


class ViolationKind(str, Enum):
    NOT_JSON = "not_json"
    MISSING_KEY = "missing_key"
    SCORE_OUT_OF_RANGE = "score_out_of_range"
    WRONG_TYPE = "wrong_type"


@dataclass(frozen=True)
class SchemaViolation:
    """One way a raw model output failed the verdict schema."""

    kind: ViolationKind
    key: str | None = None
    value: object = None

    def describe(self) -> str:
        if self.kind is ViolationKind.NOT_JSON:
            return "output is not a JSON object"
        if self.kind is ViolationKind.MISSING_KEY:
            return f"missing required key {self.key!r}"
        if self.kind is ViolationKind.SCORE_OUT_OF_RANGE:
            return f"score {self.value!r} outside the 1-5 range"
        return f"wrong type for key {self.key!r}"


class EscalationReason(str, Enum):
    LOW_CONFIDENCE = "LowConfidence"
    SCHEMA_FAILURE = "SchemaFailure"
    PROVIDER_FAILURE = "ProviderFailure"
    CONSENSUS_DISAGREEMENT = "ConsensusDisagreement"
    CRITICAL_SECTION = "CriticalSection"


@dataclass(frozen=True)
class EscalationSignal:
    """Terminal failure of an agent invocation, routed to human review."""

    reason: EscalationReason
    attempts: int
    details: str = ""


@dataclass(frozen=True)
class RawModelOutput:
    """Unvalidated model text, tagged with its producer and attempt number."""

    text: str
    produced_by: str
    attempt: int = 1


@dataclass(frozen=True)
class Verdict:
    """One agent's structured evaluation of one section."""

    score: int
    comments: str
    missing_elements: tuple[str, ...]
    confidence: float
    aspect: Aspect
    agent_id: str
    section_index: int
    repairs_used: int = 0


_FENCED_RE = re.compile(r"```(?:json)?\s*\n(.*?)\n\s*```", re.DOTALL)
_DEFAULT_CONFIDENCE = 0.5


def _extract_object(text: str) -> dict | None:
    """Pull a JSON object out of model text, tolerating markdown fences."""
    candidates = [text.strip()]
    fenced = _FENCED_RE.search(text)
    if fenced:
        candidates.append(fenced.group(1).strip())
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        try:
            parsed = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, dict):
            return parsed
    return None


def _coerce_score(value: object) -> tuple[int | None, SchemaViolation | None]:
    if isinstance(value, bool):
        return None, SchemaViolation(ViolationKind.WRONG_TYPE, key="score", value=value)
    if isinstance(value, int):
        score = value
    elif isinstance(value, float) and value.is_integer():
        score = int(value)
    elif isinstance(value, str):
        try:
            score = int(value.strip())
        except ValueError:
            return None, SchemaViolation(ViolationKind.WRONG_TYPE, key="score", value=value)
    else:
        return None, SchemaViolation(ViolationKind.WRONG_TYPE, key="score", value=value)
    if not 1 <= score <= 5:
        return None, SchemaViolation(ViolationKind.SCORE_OUT_OF_RANGE, key="score", value=score)
    return score, None


def _dedupe(items: list[str]) -> tuple[str, ...]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return tuple(out)


def validate_verdict(
    raw: RawModelOutput,
    *,
    aspect: Aspect | None = None,
    agent_id: str | None = None,
    section_index: int | None = None,
) -> Verdict | list[SchemaViolation]:
    """Validate and normalize raw model output into a Verdict.

    Normalization: the ``missing_sections`` alias is renamed to
    ``missing_elements``, an absent ``confidence`` defaults to 0.5, and
    string-encoded integer scores are coerced. Keyword arguments supply
    context not present in the payload; payload keys win when both exist.
    Returns the list of SchemaViolations instead of raising on bad output.
    """
    data = _extract_object(raw.text)
    if data is None:
        return [SchemaViolation(ViolationKind.NOT_JSON)]

    violations: list[SchemaViolation] = []
    if "missing_sections" in data and "missing_elements" not in data:
        data = dict(data)
        data["missing_elements"] = data.pop("missing_sections")

    if "score" not in data:
        violations.append(SchemaViolation(ViolationKind.MISSING_KEY, key="score"))
        score = None
    else:
        score, violation = _coerce_score(data["score"])
        if violation:
            violations.append(violation)

    if "comments" not in data:
        violations.append(SchemaViolation(ViolationKind.MISSING_KEY, key="comments"))
        comments = ""
    elif not isinstance(data["comments"], str):
        violations.append(
            SchemaViolation(ViolationKind.WRONG_TYPE, key="comments", value=data["comments"])
        )
        comments = ""
    else:
        comments = data["comments"]

    missing_raw = data.get("missing_elements", [])
    if not isinstance(missing_raw, list) or not all(isinstance(m, str) for m in missing_raw):
        violations.append(
            SchemaViolation(ViolationKind.WRONG_TYPE, key="missing_elements", value=missing_raw)
        )
        missing: tuple[str, ...] = ()
    else:
        missing = _dedupe(missing_raw)

    confidence_raw = data.get("confidence", _DEFAULT_CONFIDENCE)
    if (
        isinstance(confidence_raw, bool)
        or not isinstance(confidence_raw, (int, float))
        or not 0.0 <= float(confidence_raw) <= 1.0
    ):
        violations.append(
            SchemaViolation(ViolationKind.WRONG_TYPE, key="confidence", value=confidence_raw)
        )
        confidence = _DEFAULT_CONFIDENCE
    else:
        confidence = float(confidence_raw)

    aspect_value = data.get("aspect")
    if aspect_value is not None:
        try:
            aspect = Aspect(aspect_value)
        except ValueError:
            violations.append(
                SchemaViolation(ViolationKind.WRONG_TYPE, key="aspect", value=aspect_value)
            )
    if aspect is None:
        aspect = Aspect.COMPLETENESS

    index_value = data.get("section_index")
    if index_value is not None:
        if isinstance(index_value, bool) or not isinstance(index_value, int) or index_value < 0:
            violations.append(
                SchemaViolation(ViolationKind.WRONG_TYPE, key="section_index", value=index_value)
            )
        else:
            section_index = index_value
    if section_index is None:
        section_index = 0

    repairs_value = data.get("repairs_used", 0)
    if isinstance(repairs_value, bool) or not isinstance(repairs_value, int) or repairs_value < 0:
        violations.append(
            SchemaViolation(ViolationKind.WRONG_TYPE, key="repairs_used", value=repairs_value)
        )
        repairs_value = 0

    if violations:
        return violations
    return Verdict(
        score=score,  # type: ignore[arg-type]
        comments=comments,
        missing_elements=missing,
        confidence=confidence,
        aspect=aspect,
        agent_id=data.get("agent_id") or agent_id or raw.produced_by,
        section_index=section_index,
        repairs_used=repairs_value,
    )


#: Generator contract for the repair loop: (prompt, violations) -> RawModelOutput.
Generator = Callable[[object, list[SchemaViolation]], RawModelOutput]


def repair_loop(
    generate: Generator,
    prompt: object,
    max_repairs: int = 2,
    *,
    aspect: Aspect | None = None,
    agent_id: str | None = None,
    section_index: int | None = None,
) -> Verdict | EscalationSignal:
    """Call ``generate`` up to 1 + max_repairs times, feeding schema violations
    back into each re-prompt. The first valid output wins and records how many
    repairs it took; exhaustion or a provider failure yields an EscalationSignal.
    """
    from docjudge.provider import ProviderError  # local import breaks the module cycle

    if max_repairs < 0:
        raise ValueError("max_repairs must be >= 0")
    violations: list[SchemaViolation] = []
    attempts = 1 + max_repairs
    for attempt in range(1, attempts + 1):
        try:
            raw = generate(prompt, violations)
        except ProviderError as exc:
            return EscalationSignal(
                reason=EscalationReason.PROVIDER_FAILURE, attempts=attempt, details=str(exc)
            )
        result = validate_verdict(
            raw, aspect=aspect, agent_id=agent_id, section_index=section_index
        )
        if isinstance(result, Verdict):
            return replace(result, repairs_used=attempt - 1)
        violations = result
    summary = "; ".join(v.describe() for v in violations)
    return EscalationSignal(
        reason=EscalationReason.SCHEMA_FAILURE,
        attempts=attempts,
        details=f"schema invalid after {attempts} attempts: {summary}",
    )


def verdict_from_dict(data: dict) -> Verdict:
    """Rebuild a Verdict from its canonical payload (inverse of canonicalize)."""
    return Verdict(
        score=int(data["score"]),
        comments=data["comments"],
        missing_elements=tuple(data.get("missing_elements", [])),
        confidence=float(data.get("confidence", _DEFAULT_CONFIDENCE)),
        aspect=Aspect(data["aspect"]),
        agent_id=data["agent_id"],
        section_index=int(data["section_index"]),
        repairs_used=int(data.get("repairs_used", 0)),
    )


def canonicalize_verdict(verdict: Verdict) -> str:
    """Byte-stable canonical JSON for a verdict (sorted keys, confidence at
    4 decimal places). Equal verdicts canonicalize to identical bytes."""
    fields = [
        ("agent_id", json.dumps(verdict.agent_id, ensure_ascii=False)),
        ("aspect", json.dumps(verdict.aspect.value)),
        ("comments", json.dumps(verdict.comments, ensure_ascii=False)),
        ("confidence", f"{verdict.confidence:.4f}"),
        (
            "missing_elements",
            json.dumps(list(verdict.missing_elements), ensure_ascii=False, separators=(",", ":")),
        ),
        ("repairs_used", str(verdict.repairs_used)),
        ("score", str(verdict.score)),
        ("section_index", str(verdict.section_index)),
    ]
    return "{" + ",".join(f'"{name}":{value}' for name, value in fields) + "}"
