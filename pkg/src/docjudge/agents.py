"""Specialized section evaluators, one per aspect.

Each aspect ships as a deterministic rule-based agent (pure function of its
input, confidence 1.0) and as an LLM-backed variant behind the same Verdict
interface. Coverage-style agents share one scoring rule: with r the fraction
of required elements satisfied, score = 1 + round(4 r), rounding halves up.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations

from docjudge.model import Aspect, SectionRecord, SectionSpec, TemplateDefinition, UNMATCHED, normalize_decimal
from docjudge.provider import (
    RawModelOutput,
    RenderedPrompt,
    default_template,
    redact,
    render_prompt,
    repair_feedback,
    restore,
)
from docjudge.verdicts import EscalationSignal, SchemaViolation, Verdict, repair_loop


class UnboundSectionError(ValueError):
    """Raised when an agent that needs a template binding gets an UNMATCHED section."""


class AgentKind(str):
    DETERMINISTIC = "deterministic"
    LLM = "llm"


@dataclass(frozen=True)
class AgentConfig:
    """Roster entry: which aspect an agent covers and how it is implemented."""

    agent_id: str
    aspect: Aspect
    kind: str = AgentKind.DETERMINISTIC
    parameters: dict | None = None
    prompt_version: int = 1

    def __post_init__(self):
        if self.kind not in (AgentKind.DETERMINISTIC, AgentKind.LLM):
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.prompt_version < 1:
            raise ValueError("prompt_version must be >= 1")
        params = self.parameters or {}
        threshold = params.get("jaccard_threshold")
        if threshold is not None and not 0 < float(threshold) <= 1:
            raise ValueError("jaccard_threshold must be in (0, 1]")
        shingle = params.get("shingle_size")
        if shingle is not None and int(shingle) < 1:
            raise ValueError("shingle_size must be >= 1")

    def param(self, name: str, fallback):
        return (self.parameters or {}).get(name, fallback)


@dataclass(frozen=True)
class EvaluationInput:
    """Everything one agent sees: the section, its spec binding, the template,
    and read-only sibling sections for cross-reference checks."""

    section: SectionRecord
    spec: SectionSpec | None
    template: TemplateDefinition
    sibling_sections: tuple[SectionRecord, ...] = ()


def _norm(text: str) -> str:
    return " ".join(text.split()).lower()


def _coverage_score(satisfied: int, required: int) -> int:
    """score = 1 + round(4 * satisfied/required), half-up, exact arithmetic."""
    if required == 0:
        return 5
    return 1 + int(Fraction(4 * satisfied, required) + Fraction(1, 2))


def _require_bound(evaluation_input: EvaluationInput) -> SectionSpec:
    spec = evaluation_input.spec
    if spec is None or evaluation_input.section.spec_name == UNMATCHED:
        raise UnboundSectionError(
            f"section {evaluation_input.section.index} is not bound to a template section"
        )
    return spec


def _find_elements(body: str, labels: tuple[str, ...]) -> tuple[list[str], list[str]]:
    """Split required-element labels into (present, missing) by normalized
    case-insensitive substring match against the section body."""
    haystack = _norm(body)
    present, missing = [], []
    for label in labels:
        (present if _norm(label) in haystack else missing).append(label)
    return present, missing


def eval_compliance(evaluation_input: EvaluationInput, agent_id: str = "compliance") -> Verdict:
    """Template-compliance check: required-element coverage with a one-element
    penalty when the segmenter flagged the section as out of template order."""
    spec = _require_bound(evaluation_input)
    section = evaluation_input.section
    present, missing = _find_elements(section.body, spec.required_elements)
    required = len(spec.required_elements)

    satisfied = len(present)
    if section.order_violation and required > 0:
        satisfied = max(0, satisfied - 1)
    score = _coverage_score(satisfied, required)

    notes = []
    if missing:
        notes.append(f"Missing required parts: {', '.join(missing)}.")
    else:
        notes.append("All required parts are present.")
    if section.order_violation:
        notes.append("Section appears out of the template's order.")
    return Verdict(
        score=score,
        comments=" ".join(notes),
        missing_elements=tuple(missing),
        confidence=1.0,
        aspect=Aspect.COMPLIANCE,
        agent_id=agent_id,
        section_index=section.index,
    )


def eval_completeness(evaluation_input: EvaluationInput, agent_id: str = "completeness") -> Verdict:
    """Completeness check: required-element coverage, no order penalty."""
    spec = _require_bound(evaluation_input)
    section = evaluation_input.section
    present, missing = _find_elements(section.body, spec.required_elements)
    score = _coverage_score(len(present), len(spec.required_elements))

    if len(missing) == 1:
        comments = f"All key fields are present except {missing[0]}."
    elif missing:
        comments = (
            f"Missing {len(missing)} of {len(spec.required_elements)} required elements: "
            f"{', '.join(missing)}."
        )
    else:
        comments = "All required elements are present."
    return Verdict(
        score=score,
        comments=comments,
        missing_elements=tuple(missing),
        confidence=1.0,
        aspect=Aspect.COMPLETENESS,
        agent_id=agent_id,
        section_index=section.index,
    )


def _terminology_score(violation_count: int) -> int:
    if violation_count == 0:
        return 5
    if violation_count <= 2:
        return 4
    if violation_count <= 5:
        return 3
    if violation_count <= 10:
        return 2
    return 1


def eval_terminology(evaluation_input: EvaluationInput, agent_id: str = "terminology") -> Verdict:
    """Glossary check: counts word-boundary occurrences of forbidden variants."""
    section = evaluation_input.section
    offenders: list[str] = []
    total = 0
    for rule in evaluation_input.template.glossary:
        for variant in rule.forbidden_variants:
            count = len(re.findall(rf"\b{re.escape(variant)}\b", section.body, re.IGNORECASE))
            if count:
                offenders.append(f"{variant}({count})")
                total += count
    score = _terminology_score(total)
    comments = (
        "No forbidden term variants found."
        if total == 0
        else f"Found {total} forbidden term occurrence(s): {', '.join(offenders)}."
    )
    return Verdict(
        score=score,
        comments=comments,
        missing_elements=tuple(offenders),
        confidence=1.0,
        aspect=Aspect.TERMINOLOGY,
        agent_id=agent_id,
        section_index=section.index,
    )


_SENTENCE_SPLIT_RE = re.compile(r"[.?!]+\s+")
_TOKEN_SPLIT_RE = re.compile(r"[^0-9a-z]+")


def split_sentences(text: str) -> list[str]:
    """Sentences split on punctuation-runs followed by whitespace."""
    return [s for s in (part.strip() for part in _SENTENCE_SPLIT_RE.split(text)) if s]


def sentence_shingles(sentence: str, size: int = 3) -> frozenset[tuple[str, ...]]:
    tokens = [t for t in _TOKEN_SPLIT_RE.split(sentence.lower()) if t]
    if len(tokens) < size:
        return frozenset()
    return frozenset(tuple(tokens[i : i + size]) for i in range(len(tokens) - size + 1))


def jaccard(a: frozenset, b: frozenset) -> Fraction:
    """Exact Jaccard similarity; 0 when either shingle set is empty."""
    if not a or not b:
        return Fraction(0)
    return Fraction(len(a & b), len(a | b))


def _truncate(text: str, limit: int = 60) -> str:
    return text[:limit]


def eval_redundancy(
    evaluation_input: EvaluationInput,
    agent_id: str = "redundancy",
    jaccard_threshold: float = 0.8,
    shingle_size: int = 3,
) -> Verdict:
    """Near-duplicate detection: token shingles, Jaccard >= threshold
    (inclusive) over sentence pairs within the section and against siblings.
    score = max(1, 5 - duplicate_pair_count)."""
    section = evaluation_input.section

    own = [(s, sentence_shingles(s, shingle_size)) for s in split_sentences(section.body)]
    sibling = [
        (s, sentence_shingles(s, shingle_size))
        for record in evaluation_input.sibling_sections
        for s in split_sentences(record.body)
    ]
    threshold = Fraction(str(jaccard_threshold))

    duplicates = 0
    pair_texts: list[str] = []
    for (s1, sh1), (s2, sh2) in combinations(own, 2):
        if jaccard(sh1, sh2) >= threshold:
            duplicates += 1
            pair_texts.append(f"{_truncate(s1)} | {_truncate(s2)}")
    for s1, sh1 in own:
        for s2, sh2 in sibling:
            if jaccard(sh1, sh2) >= threshold:
                duplicates += 1
                pair_texts.append(f"{_truncate(s1)} | {_truncate(s2)}")

    seen: set[str] = set()
    unique_pairs = tuple(p for p in pair_texts if not (p in seen or seen.add(p)))
    score = max(1, 5 - duplicates)
    comments = (
        "No duplicated statements found."
        if duplicates == 0
        else f"Found {duplicates} near-duplicate sentence pair(s)."
    )
    return Verdict(
        score=score,
        comments=comments,
        missing_elements=unique_pairs,
        confidence=1.0,
        aspect=Aspect.REDUNDANCY,
        agent_id=agent_id,
        section_index=section.index,
    )


_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


def _quantified_phrase(sentence: str) -> tuple[str, tuple[str, ...]]:
    """(numeric-token-masked normalized sentence, normalized value tuple)."""
    values = tuple(normalize_decimal(m) for m in _NUMBER_RE.findall(sentence))
    masked = _norm(_NUMBER_RE.sub("#", sentence))
    return masked, values


def eval_factual(evaluation_input: EvaluationInput, agent_id: str = "factual") -> Verdict:
    """Fact check against the template fact store plus cross-section numeric
    consistency. A fact contradicts when its subject and predicate share a
    sentence with a value different from the expected one; two sections
    contradict each other when the same number-masked phrase carries different
    values. score = 5 - min(4, contradiction_count)."""
    section = evaluation_input.section
    template = evaluation_input.template
    findings: list[str] = []
    contradictions = 0

    own_sentences = split_sentences(section.body)
    for sentence in own_sentences:
        normalized = _norm(sentence)
        numbers = [normalize_decimal(m) for m in _NUMBER_RE.findall(sentence)]
        for fact in template.facts:
            if _norm(fact.subject) not in normalized or _norm(fact.predicate) not in normalized:
                continue
            expected = fact.expected_value
            if _is_numeric(expected):
                if not numbers:
                    continue  # phrase present but no value stated
                if expected not in numbers:
                    contradictions += 1
                    findings.append(
                        f"{fact.subject}.{fact.predicate}: found={numbers[0]} expected={expected}"
                    )
            else:
                if _norm(expected) not in normalized:
                    contradictions += 1
                    findings.append(
                        f"{fact.subject}.{fact.predicate}: found=unstated expected={expected}"
                    )

    own_quantified = [_quantified_phrase(s) for s in own_sentences]
    own_quantified = [(p, v) for p, v in own_quantified if v]
    for record in evaluation_input.sibling_sections:
        for sibling_sentence in split_sentences(record.body):
            sibling_phrase, sibling_values = _quantified_phrase(sibling_sentence)
            if not sibling_values:
                continue
            for phrase, values in own_quantified:
                if phrase == sibling_phrase and values != sibling_values:
                    contradictions += 1
                    findings.append(
                        f"{_truncate(phrase)}: {' '.join(values)} != {' '.join(sibling_values)}"
                    )

    seen: set[str] = set()
    unique_findings = tuple(f for f in findings if not (f in seen or seen.add(f)))
    score = 5 - min(4, contradictions)
    comments = (
        "No factual contradictions found."
        if contradictions == 0
        else f"Found {contradictions} factual contradiction(s)."
    )
    return Verdict(
        score=score,
        comments=comments,
        missing_elements=unique_findings,
        confidence=1.0,
        aspect=Aspect.FACTUAL,
        agent_id=agent_id,
        section_index=section.index,
    )


def _is_numeric(value: str) -> bool:
    return bool(re.fullmatch(r"-?\d+(?:\.\d+)?", value))


_DETERMINISTIC_EVALUATORS = {
    Aspect.COMPLIANCE: eval_compliance,
    Aspect.COMPLETENESS: eval_completeness,
    Aspect.TERMINOLOGY: eval_terminology,
    Aspect.REDUNDANCY: eval_redundancy,
    Aspect.FACTUAL: eval_factual,
}


def eval_llm(
    evaluation_input: EvaluationInput,
    config: AgentConfig,
    provider,
) -> Verdict | EscalationSignal:
    """Run one LLM-backed evaluation: render the aspect's prompt, redact PII,
    drive the repair loop against the provider, and restore redacted tokens in
    the resulting verdict."""
    if config.kind != AgentKind.LLM:
        raise ValueError(f"agent {config.agent_id!r} is not an llm agent")
    template = default_template(config.aspect, version=config.prompt_version)
    rendered = render_prompt(template, evaluation_input)
    redacted_text, redaction_map = redact(rendered.text)
    prompt = RenderedPrompt(
        text=redacted_text,
        aspect=rendered.aspect,
        prompt_version=rendered.prompt_version,
        redaction_map_id=redaction_map.map_id,
    )

    attempt_counter = {"n": 0}

    def generate(current_prompt: RenderedPrompt, violations: list[SchemaViolation]) -> RawModelOutput:
        attempt_counter["n"] += 1
        text = current_prompt.text
        if violations:
            text += repair_feedback(violations)
        reply = provider.complete_text(text)
        return RawModelOutput(text=reply, produced_by=config.agent_id, attempt=attempt_counter["n"])

    result = repair_loop(
        generate,
        prompt,
        max_repairs=int(config.param("max_repairs", 2)),
        aspect=config.aspect,
        agent_id=config.agent_id,
        section_index=evaluation_input.section.index,
    )
    if isinstance(result, EscalationSignal):
        return result
    return replace(
        result,
        comments=restore(result.comments, redaction_map),
        missing_elements=tuple(restore(m, redaction_map) for m in result.missing_elements),
    )


def run_agent(
    config: AgentConfig,
    evaluation_input: EvaluationInput,
    provider=None,
) -> Verdict | EscalationSignal:
    """Dispatch an evaluation to the configured implementation."""
    if config.kind == AgentKind.LLM:
        if provider is None:
            raise ValueError(f"agent {config.agent_id!r} needs a provider")
        return eval_llm(evaluation_input, config, provider)
    if config.aspect is Aspect.REDUNDANCY:
        return eval_redundancy(
            evaluation_input,
            agent_id=config.agent_id,
            jaccard_threshold=float(config.param("jaccard_threshold", 0.8)),
            shingle_size=int(config.param("shingle_size", 3)),
        )
    evaluator = _DETERMINISTIC_EVALUATORS[config.aspect]
    return evaluator(evaluation_input, agent_id=config.agent_id)
