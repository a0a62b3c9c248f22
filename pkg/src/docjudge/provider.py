"""Prompt rendering, PII redaction, and the chat-completion provider interface
(HTTP client plus a deterministic scripted mock for desk-scale testing)."""

from __future__ import annotations

import hashlib
import os
import re
import threading
from dataclasses import dataclass, field

import requests

from docjudge.model import Aspect
from docjudge.verdicts import RawModelOutput, SchemaViolation

#: Exact schema sentence every rendered prompt carries.
SCHEMA_INSTRUCTION = (
    "Return your answer as a JSON with: score (1-5), comments, missing_elements (list)."
)

_PLACEHOLDERS = ("{section_name}", "{section_body}", "{required_elements}", "{schema_instruction}")


class PatternError(ValueError):
    """Raised at config load when a redaction pattern does not compile."""


class MissingPlaceholderDataError(ValueError):
    """Raised when a prompt placeholder has no value to substitute."""


class RedactionEnforcementError(RuntimeError):
    """Raised when an unredacted PII match would reach an external endpoint."""


class ProviderError(RuntimeError):
    """Provider call failure. ``kind`` is one of timeout, transport,
    http_status, malformed."""

    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail


@dataclass(frozen=True)
class PromptTemplate:
    """Aspect-specific review question with the four mandatory placeholders."""

    aspect: Aspect
    version: int
    text: str

    def __post_init__(self):
        for placeholder in _PLACEHOLDERS:
            count = self.text.count(placeholder)
            if count != 1:
                raise ValueError(
                    f"template for {self.aspect.value} must contain {placeholder} exactly once"
                    f" (found {count})"
                )


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    aspect: Aspect
    prompt_version: int
    redaction_map_id: str | None = None


@dataclass(frozen=True)
class RedactionMap:
    """Ordered placeholder-token-to-original mapping; stored locally only."""

    map_id: str
    entries: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class PiiPattern:
    name: str
    regex: re.Pattern[str]


def compile_patterns(specs: list[tuple[str, str]]) -> tuple[PiiPattern, ...]:
    """Compile named redaction patterns, raising PatternError at load time."""
    compiled = []
    for name, pattern in specs:
        try:
            compiled.append(PiiPattern(name=name, regex=re.compile(pattern)))
        except re.error as exc:
            raise PatternError(f"pattern {name!r} does not compile: {exc}") from exc
    return tuple(compiled)


DEFAULT_PII_PATTERNS = compile_patterns(
    [
        ("email", r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"),
        ("phone", r"\+[1-9]\d{7,14}"),
    ]
)


_TEMPLATE_TEXTS = {
    Aspect.COMPLIANCE: (
        "As a documentation expert, review the '{section_name}' section. "
        "List any missing required parts and rate overall compliance (1=bad, 5=perfect). "
        "The template expects these elements: {required_elements}.\n\n"
        "Section text:\n{section_body}\n\n{schema_instruction}"
    ),
    Aspect.COMPLETENESS: (
        "You are a business document reviewer. Check this section for completeness. "
        "The '{section_name}' section is expected to cover: {required_elements}.\n\n"
        "Section text:\n{section_body}\n\n{schema_instruction}"
    ),
    Aspect.TERMINOLOGY: (
        "You are a business document reviewer. Check the '{section_name}' section for "
        "correct terminology and clear wording; flag any forbidden term variants. "
        "Expected elements, if any: {required_elements}.\n\n"
        "Section text:\n{section_body}\n\n{schema_instruction}"
    ),
    Aspect.REDUNDANCY: (
        "You are a business document reviewer. Check the '{section_name}' section for "
        "redundancy: repeated or near-duplicate statements within the section or "
        "against the rest of the document. Expected elements, if any: {required_elements}.\n\n"
        "Section text:\n{section_body}\n\n{schema_instruction}"
    ),
    Aspect.FACTUAL: (
        "You are a business document reviewer. Check the '{section_name}' section for "
        "factual accuracy against the approved fact store and for internally "
        "consistent figures. Expected elements, if any: {required_elements}.\n\n"
        "Section text:\n{section_body}\n\n{schema_instruction}"
    ),
}


def default_template(aspect: Aspect, version: int = 1) -> PromptTemplate:
    return PromptTemplate(aspect=aspect, version=version, text=_TEMPLATE_TEXTS[aspect])


def render_prompt(template: PromptTemplate, evaluation_input) -> RenderedPrompt:
    """Deterministically substitute the evaluation input into the template.

    ``evaluation_input`` is an agents.EvaluationInput; the section name falls
    back to the raw heading for unbound sections.
    """
    section = evaluation_input.section
    spec = evaluation_input.spec
    name = spec.name if spec is not None else (section.heading or "(untitled section)")
    if section.body is None:
        raise MissingPlaceholderDataError("section has no body to substitute")
    elements = ", ".join(spec.required_elements) if spec and spec.required_elements else "(none specified)"

    # Document-controlled text goes in last so placeholder tokens inside the
    # section body are never expanded.
    text = template.text
    text = text.replace("{section_name}", name)
    text = text.replace("{required_elements}", elements)
    text = text.replace("{schema_instruction}", SCHEMA_INSTRUCTION)
    text = text.replace("{section_body}", section.body)
    return RenderedPrompt(text=text, aspect=template.aspect, prompt_version=template.version)


def redact(
    text: str, patterns: tuple[PiiPattern, ...] = DEFAULT_PII_PATTERNS
) -> tuple[str, RedactionMap]:
    """Replace every pattern match, left to right, with an indexed placeholder
    token; the returned map restores the originals."""
    matches: list[tuple[int, int, str]] = []
    for pattern in patterns:
        for m in pattern.regex.finditer(text):
            matches.append((m.start(), m.end(), m.group(0)))
    matches.sort(key=lambda item: (item[0], -item[1]))

    taken_until = -1
    entries: list[tuple[str, str]] = []
    pieces: list[str] = []
    cursor = 0
    k = 0
    for start, end, original in matches:
        if start < taken_until:
            continue  # overlapping match already replaced
        k += 1
        token = f"⟨PII-{k}⟩"
        pieces.append(text[cursor:start])
        pieces.append(token)
        entries.append((token, original))
        cursor = end
        taken_until = end
    pieces.append(text[cursor:])
    redacted = "".join(pieces)
    map_id = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    return redacted, RedactionMap(map_id=map_id, entries=tuple(entries))


def restore(text: str, redaction_map: RedactionMap) -> str:
    """Replace every placeholder token occurrence with its original text."""
    for token, original in redaction_map.entries:
        text = text.replace(token, original)
    return text


def find_pii(text: str, patterns: tuple[PiiPattern, ...] = DEFAULT_PII_PATTERNS) -> list[str]:
    """All pattern matches in a payload; used to enforce redaction."""
    found = []
    for pattern in patterns:
        found.extend(m.group(0) for m in pattern.regex.finditer(text))
    return found


@dataclass(frozen=True)
class ProviderEndpoint:
    """Chat-completion endpoint config. The API key comes from the named
    environment variable only, never from files."""

    base_url: str
    model: str
    api_key_env: str = ""
    external: bool = True
    timeout_s: float = 30.0
    max_parallel: int = 4


_endpoint_semaphores: dict[tuple[str, str], threading.Semaphore] = {}
_semaphore_lock = threading.Lock()


def _semaphore_for(endpoint: ProviderEndpoint) -> threading.Semaphore:
    key = (endpoint.base_url, endpoint.model)
    with _semaphore_lock:
        if key not in _endpoint_semaphores:
            _endpoint_semaphores[key] = threading.Semaphore(endpoint.max_parallel)
        return _endpoint_semaphores[key]


def complete(prompt: RenderedPrompt, endpoint: ProviderEndpoint) -> RawModelOutput:
    """Send a single-message, temperature-0 chat completion and return the text.

    Applies the configured timeout and one retry on transport errors. External
    endpoints refuse payloads containing unredacted PII matches.
    """
    if endpoint.external:
        leaked = find_pii(prompt.text)
        if leaked:
            raise RedactionEnforcementError(
                f"refusing to send unredacted PII to external endpoint: {leaked[:3]}"
            )
    payload = {
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt.text}],
        "temperature": 0,
    }
    headers = {"Content-Type": "application/json"}
    if endpoint.api_key_env:
        key = os.environ.get(endpoint.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"

    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    semaphore = _semaphore_for(endpoint)
    last_error: ProviderError | None = None
    for attempt in (1, 2):
        with semaphore:
            try:
                response = requests.post(
                    url, json=payload, headers=headers, timeout=endpoint.timeout_s
                )
            except requests.Timeout as exc:
                last_error = ProviderError("timeout", str(exc))
                continue
            except requests.RequestException as exc:
                last_error = ProviderError("transport", str(exc))
                continue
        if response.status_code != 200:
            raise ProviderError("http_status", f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            text = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError("malformed", f"unexpected response shape: {exc}") from exc
        if not isinstance(text, str):
            raise ProviderError("malformed", "message content is not a string")
        return RawModelOutput(text=text, produced_by=endpoint.model, attempt=attempt)
    raise last_error  # type: ignore[misc]  # both attempts failed


class MockProvider:
    """Scripted provider: returns canned outputs in order, then repeats the
    last one. Keeps a totally ordered call log for assertions; externally
    marked mocks also append to the class-level outbound log so the whole
    suite can be audited for redaction leaks."""

    external_outbound_log: list[str] = []

    def __init__(self, script: list[str], external: bool = False):
        if not script:
            raise ValueError("mock provider script must be non-empty")
        self.script = list(script)
        self.external = external
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def complete_text(self, prompt_text: str) -> str:
        with self._lock:
            index = len(self.calls)
            self.calls.append(prompt_text)
            if self.external:
                MockProvider.external_outbound_log.append(prompt_text)
        return self.script[min(index, len(self.script) - 1)]


class HTTPProvider:
    """ProviderHandle over a real chat-completion endpoint."""

    def __init__(self, endpoint: ProviderEndpoint):
        self.endpoint = endpoint
        self.external = endpoint.external
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def complete_text(self, prompt_text: str) -> str:
        with self._lock:
            self.calls.append(prompt_text)
        prompt = RenderedPrompt(text=prompt_text, aspect=Aspect.COMPLETENESS, prompt_version=0)
        return complete(prompt, self.endpoint).text


def mock_provider(script: list[str], external: bool = False) -> MockProvider:
    return MockProvider(script, external=external)


def repair_feedback(violations: list[SchemaViolation]) -> str:
    """Re-prompt suffix describing why the previous answer was rejected."""
    problems = "; ".join(v.describe() for v in violations)
    return (
        f"\n\nYour previous answer was rejected: {problems}. "
        f"Answer again. {SCHEMA_INSTRUCTION}"
    )
