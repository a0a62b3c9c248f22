"""Command-line front door: batch evaluation, the API server, metrics over an
exported run log, and golden-set regression runs."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from docjudge.model import parse_template
from docjudge.monitoring import (
    EmptyDenominatorError,
    RunRecord,
    compute_metrics,
    drift_check,
    golden_case_from_dict,
    metrics_history_csv,
    run_record_from_dict,
    truth_from_dict,
)
from docjudge.orchestrator import (
    PipelineConfig,
    canonical_report,
    default_roster,
    evaluate_document,
    report_to_dict,
)
from docjudge.segmentation import load_document
from docjudge.service import load_pipeline_config, make_provider, serve

_FORMAT_SUFFIX = {"markdown": ".md", "sections-json": ".json"}


def _load_run_config(config_path: str | None, template_id: str) -> tuple[PipelineConfig, object]:
    if config_path is None:
        return (
            PipelineConfig(template_ref=template_id, roster=default_roster()),
            None,
        )
    data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    pipeline = load_pipeline_config(data.get("pipeline", {}), template_ref=template_id)
    provider = make_provider(data.get("provider"))
    return pipeline, provider


def _evaluate_one(doc_path: Path, args, pipeline, provider, template) -> tuple[str, dict]:
    raw = doc_path.read_bytes()
    document = load_document(raw, args.format, doc_path.stem)
    start = time.monotonic()
    report = evaluate_document(document, pipeline, template, provider)
    wall_ms = int((time.monotonic() - start) * 1000)
    run_payload = {
        "run_id": doc_path.stem,
        "doc_id": document.doc_id,
        "provider_kind": "deterministic" if provider is None else "mock",
        "wall_ms": wall_ms,
        "report": report_to_dict(report),
    }
    return canonical_report(report), run_payload


def _cmd_evaluate(args) -> int:
    template = parse_template(Path(args.template).read_text(encoding="utf-8"))
    pipeline, provider = _load_run_config(args.config, template.template_id)
    doc_path = Path(args.doc)
    out_path = Path(args.out)
    try:
        if doc_path.is_dir():
            suffix = _FORMAT_SUFFIX[args.format]
            doc_files = sorted(doc_path.glob(f"*{suffix}"))
            if not doc_files:
                print(f"no {suffix} documents found in {doc_path}", file=sys.stderr)
                return 1
            out_path.mkdir(parents=True, exist_ok=True)
            for file in doc_files:
                canonical, run_payload = _evaluate_one(file, args, pipeline, provider, template)
                (out_path / f"{file.stem}.report.json").write_text(canonical, encoding="utf-8")
                (out_path / f"{file.stem}.run.json").write_text(
                    json.dumps(run_payload, sort_keys=True, ensure_ascii=False), encoding="utf-8"
                )
            print(f"evaluated {len(doc_files)} documents into {out_path}")
            return 0
        canonical, _ = _evaluate_one(doc_path, args, pipeline, provider, template)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(canonical, encoding="utf-8")
        print(f"report written to {out_path}")
        return 0
    except (OSError, ValueError) as exc:
        print(f"evaluation failed: {exc}", file=sys.stderr)
        return 1


def _cmd_serve(args) -> int:
    try:
        print(f"serving on port {args.port}", file=sys.stderr)
        serve(args.config, args.port)
    except OSError as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_metrics(args) -> int:
    runs_dir = Path(args.runs)
    run_files = sorted(runs_dir.glob("*.run.json"))
    runs: list[RunRecord] = []
    for file in run_files:
        runs.append(run_record_from_dict(json.loads(file.read_text(encoding="utf-8"))))
    truth = []
    if args.truth:
        truth = truth_from_dict(json.loads(Path(args.truth).read_text(encoding="utf-8")))
    try:
        snapshot = compute_metrics(runs, truth)
    except EmptyDenominatorError as exc:
        print(f"cannot compute metrics: {exc}", file=sys.stderr)
        return 1
    if args.csv:
        print(metrics_history_csv([snapshot.to_dict()]), end="")
    else:
        print(json.dumps(snapshot.to_dict(), sort_keys=True, ensure_ascii=False, indent=2))
    return 0


def _cmd_golden_run(args) -> int:
    cases_dir = Path(args.cases)
    case_files = sorted(cases_dir.glob("*.json"))
    if not case_files:
        print(f"no golden cases found in {cases_dir}", file=sys.stderr)
        return 1
    any_drift = False
    for case_file in case_files:
        spec = json.loads(case_file.read_text(encoding="utf-8"))
        template = parse_template(
            (cases_dir / spec["template"]).read_text(encoding="utf-8")
        )
        doc_file = cases_dir / spec["doc"]
        document = load_document(doc_file.read_bytes(), spec.get("format", "markdown"), case_file.stem)
        pipeline = PipelineConfig(template_ref=template.template_id, roster=default_roster())
        report = evaluate_document(document, pipeline, template)
        run = RunRecord(
            run_id=case_file.stem,
            doc_id=document.doc_id,
            report=report,
            provider_kind="deterministic",
            wall_ms=0,
        )
        case = golden_case_from_dict({"doc_ref": document.doc_id, **spec})
        flags = drift_check(run, [case], tolerance=float(spec.get("tolerance", 0.5)))
        if flags:
            any_drift = True
            for flag in flags:
                observed = "missing" if flag.observed_score is None else flag.observed_score
                print(
                    f"DRIFT {case_file.stem} section={flag.section_index} "
                    f"aspect={flag.aspect.value} expected={flag.expected_score} "
                    f"observed={observed}"
                )
        else:
            print(f"ok {case_file.stem}")
    return 1 if any_drift else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docjudge",
        description="Evaluate template-based business documents section by section.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    evaluate = sub.add_parser("evaluate", help="evaluate a document or directory, no service")
    evaluate.add_argument("--template", required=True, help="template definition JSON")
    evaluate.add_argument("--doc", required=True, help="document file or directory")
    evaluate.add_argument("--format", required=True, choices=["markdown", "sections-json"])
    evaluate.add_argument("--out", required=True, help="report file (or directory for batches)")
    evaluate.add_argument("--config", help="pipeline/provider config JSON")
    evaluate.set_defaults(func=_cmd_evaluate)

    server = sub.add_parser("serve", help="run the HTTP API")
    server.add_argument("--port", type=int, required=True)
    server.add_argument("--config", required=True)
    server.set_defaults(func=_cmd_serve)

    metrics = sub.add_parser("metrics", help="compute metrics over exported runs")
    metrics.add_argument("--runs", required=True, help="directory of *.run.json files")
    metrics.add_argument("--truth", help="ground-truth labels JSON")
    metrics.add_argument("--csv", action="store_true", help="emit CSV instead of JSON")
    metrics.set_defaults(func=_cmd_metrics)

    golden = sub.add_parser("golden", help="golden-set operations")
    golden_sub = golden.add_subparsers(dest="golden_command", required=True)
    golden_run = golden_sub.add_parser("run", help="re-evaluate golden cases and flag drift")
    golden_run.add_argument("--cases", required=True, help="directory of golden case JSON files")
    golden_run.set_defaults(func=_cmd_golden_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
