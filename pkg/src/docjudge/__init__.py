"""docjudge: section-by-section evaluation of template-based business documents.

A configurable roster of specialized agents scores each section on compliance,
completeness, terminology, redundancy, and factual accuracy; raw model output
is forced through a verdict schema with a bounded repair loop; uncertain
results escalate to a human review queue; and every run feeds drift and
quality dashboards.
"""

from docjudge.agents import (
    AgentConfig,
    EvaluationInput,
    eval_compliance,
    eval_completeness,
    eval_factual,
    eval_llm,
    eval_redundancy,
    eval_terminology,
    run_agent,
)
from docjudge.model import (
    Aspect,
    Document,
    FactAssertion,
    SectionRecord,
    SectionSpec,
    SourceFormat,
    TemplateDefinition,
    TermRule,
    UNMATCHED,
    parse_template,
    serialize_template,
    validate_template,
)
from docjudge.monitoring import (
    Correction,
    GoldenCase,
    MetricsSnapshot,
    MonitoringStore,
    ReviewTask,
    RunRecord,
    bias_scan,
    compute_metrics,
    drift_check,
)
from docjudge.orchestrator import (
    DocumentReport,
    EscalationPolicy,
    EscalationRecord,
    ExecutionMode,
    PipelineConfig,
    canonical_report,
    consensus,
    default_roster,
    escalation_policy,
    evaluate_document,
    plan,
)
from docjudge.provider import (
    MockProvider,
    PromptTemplate,
    ProviderEndpoint,
    ProviderError,
    RedactionMap,
    complete,
    mock_provider,
    redact,
    render_prompt,
    restore,
)
from docjudge.segmentation import export_sections, load_document, segment_document
from docjudge.verdicts import (
    EscalationReason,
    EscalationSignal,
    RawModelOutput,
    SchemaViolation,
    Verdict,
    canonicalize_verdict,
    repair_loop,
    validate_verdict,
)

__version__ = "0.1.0"
