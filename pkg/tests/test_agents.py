from __future__ import annotations

import json
import random

import pytest

from docjudge.agents import (
    AgentConfig,
    EvaluationInput,
    UnboundSectionError,
    eval_compliance,
    eval_completeness,
    eval_factual,
    eval_llm,
    eval_redundancy,
    eval_terminology,
)
from docjudge.model import (
    Aspect,
    FactAssertion,
    SectionRecord,
    SectionSpec,
    TemplateDefinition,
    TermRule,
    UNMATCHED,
)
from docjudge.provider import MockProvider
from docjudge.verdicts import EscalationSignal, RawModelOutput, Verdict, canonicalize_verdict, validate_verdict
from tests import oracles

SOLUTION_OVERVIEW_ELEMENTS = (
    "technical approach",
    "integration points",
    "Delivery phases",
    "Assumptions",
    "Constraints",
)


def make_input(
    body: str,
    required=(),
    glossary=(),
    facts=(),
    siblings=(),
    order_violation=False,
    spec_name="Solution Overview",
) -> EvaluationInput:
    spec = SectionSpec(name=spec_name, required_elements=tuple(required))
    template = TemplateDefinition(
        template_id="t",
        version="1",
        sections=(spec,),
        glossary=tuple(glossary),
        facts=tuple(facts),
    )
    record = SectionRecord(
        doc_id="d",
        index=0,
        heading=spec_name,
        body=body,
        spec_name=spec_name,
        order_violation=order_violation,
    )
    sibling_records = tuple(
        SectionRecord(doc_id="d", index=i + 1, heading=f"S{i}", body=text, spec_name=UNMATCHED)
        for i, text in enumerate(siblings)
    )
    return EvaluationInput(
        section=record, spec=spec, template=template, sibling_sections=sibling_records
    )


class TestCompliance:
    def test_three_of_five_elements_scores_three(self):
        body = (
            "The technical approach is sound, the integration points are listed, "
            "and the delivery phases are planned."
        )
        verdict = eval_compliance(make_input(body, SOLUTION_OVERVIEW_ELEMENTS))
        assert verdict.score == 3
        assert verdict.missing_elements == ("Assumptions", "Constraints")

    def test_all_elements_present_scores_five(self):
        body = "technical approach integration points delivery phases assumptions constraints"
        verdict = eval_compliance(make_input(body, SOLUTION_OVERVIEW_ELEMENTS))
        assert verdict.score == 5
        assert verdict.missing_elements == ()

    def test_none_present_scores_one(self):
        verdict = eval_compliance(make_input("empty shell", SOLUTION_OVERVIEW_ELEMENTS))
        assert verdict.score == 1

    def test_order_violation_costs_one_element(self):
        body = "technical approach integration points delivery phases assumptions constraints"
        verdict = eval_compliance(
            make_input(body, SOLUTION_OVERVIEW_ELEMENTS, order_violation=True)
        )
        assert verdict.score == 4  # 4/5 after the penalty

    def test_unbound_section_raises(self):
        evaluation_input = make_input("text", SOLUTION_OVERVIEW_ELEMENTS)
        record = evaluation_input.section
        unbound = EvaluationInput(
            section=SectionRecord(
                doc_id=record.doc_id,
                index=record.index,
                heading=record.heading,
                body=record.body,
                spec_name=UNMATCHED,
            ),
            spec=None,
            template=evaluation_input.template,
        )
        with pytest.raises(UnboundSectionError):
            eval_compliance(unbound)

    def test_deterministic_and_schema_closed(self):
        body = "technical approach only"
        first = eval_compliance(make_input(body, SOLUTION_OVERVIEW_ELEMENTS))
        second = eval_compliance(make_input(body, SOLUTION_OVERVIEW_ELEMENTS))
        assert canonicalize_verdict(first) == canonicalize_verdict(second)
        revalidated = validate_verdict(
            RawModelOutput(text=canonicalize_verdict(first), produced_by="audit")
        )
        assert isinstance(revalidated, Verdict)


class TestCompleteness:
    ASSUMPTION_ELEMENTS = (
        "user data currency",
        "access rights",
        "team availability",
        "budget envelope",
        "Risk factors",
    )

    def test_four_of_five_missing_risk_analysis(self):
        elements = ("overview", "owners", "dates", "budget", "risk analysis")
        body = "The overview names the owners, the dates, and the budget."
        verdict = eval_completeness(make_input(body, elements))
        assert verdict.score == 4
        assert verdict.missing_elements == ("risk analysis",)
        assert verdict.comments == "All key fields are present except risk analysis."

    def test_assumptions_section_missing_risk_factors(self):
        body = (
            "This solution assumes user data currency is maintained, access rights are "
            "granted, team availability holds, and the budget envelope is fixed."
        )
        verdict = eval_completeness(make_input(body, self.ASSUMPTION_ELEMENTS, spec_name="Assumptions"))
        assert verdict.score == 4
        assert verdict.missing_elements == ("Risk factors",)

    def test_empty_requirements_scores_five(self):
        verdict = eval_completeness(make_input("anything at all", ()))
        assert verdict.score == 5
        assert verdict.missing_elements == ()

    def test_score_monotone_under_element_addition(self):
        rng = random.Random(7)
        elements = ("alpha", "beta", "gamma", "delta")
        for _ in range(50):
            present = [e for e in elements if rng.random() < 0.5]
            body = " ".join(present)
            before = eval_completeness(make_input(body, elements))
            missing = [e for e in elements if e not in present]
            if not missing:
                continue
            added = rng.choice(missing)
            after = eval_completeness(make_input(body + " " + added, elements))
            assert after.score >= before.score


class TestTerminology:
    GLOSSARY = (TermRule(canonical="client", forbidden_variants=("customer", "buyer")),)

    def test_clean_text_scores_five(self):
        verdict = eval_terminology(make_input("the client is happy", glossary=self.GLOSSARY))
        assert verdict.score == 5
        assert verdict.missing_elements == ()

    def test_two_occurrences_score_four(self):
        body = "The customer signed. The customer paid."
        verdict = eval_terminology(make_input(body, glossary=self.GLOSSARY))
        assert verdict.score == 4
        assert verdict.missing_elements == ("customer(2)",)

    def test_eleven_occurrences_score_one(self):
        body = " ".join(["customer"] * 11)
        verdict = eval_terminology(make_input(body, glossary=self.GLOSSARY))
        assert verdict.score == 1
        # oracle: literal token scan
        assert oracles.count_word_boundary(body, "customer") == 11

    def test_word_boundary_excludes_substrings(self):
        verdict = eval_terminology(make_input("customers customize", glossary=self.GLOSSARY))
        assert verdict.score == 5

    def test_matches_token_scan_oracle(self):
        body = "Customer value; the buyer, one customer-led fix. BUYER!"
        verdict = eval_terminology(make_input(body, glossary=self.GLOSSARY))
        score, offenders = oracles.oracle_terminology(body, self.GLOSSARY)
        assert verdict.score == score
        assert verdict.missing_elements == offenders


class TestRedundancy:
    def test_distinct_sentences_score_five(self):
        body = "The plan is staged by region. Funding is approved quarterly."
        verdict = eval_redundancy(make_input(body))
        assert verdict.score == 5

    def test_verbatim_repeat_scores_four(self):
        body = "The rollout takes twelve weeks overall. The rollout takes twelve weeks overall."
        verdict = eval_redundancy(make_input(body))
        assert verdict.score == 4
        assert len(verdict.missing_elements) == 1
        score, pairs = oracles.oracle_redundancy(body, [])
        assert (verdict.score, verdict.missing_elements) == (score, pairs)

    def test_jaccard_exactly_point_eight_counts(self):
        body = "alpha bravo charlie delta echo foxtrot golf. alpha bravo charlie delta echo foxtrot."
        verdict = eval_redundancy(make_input(body))
        assert verdict.score == 4
        # oracle confirms the engineered pair sits exactly on the threshold
        from fractions import Fraction

        s1 = oracles._shingles("alpha bravo charlie delta echo foxtrot golf")
        s2 = oracles._shingles("alpha bravo charlie delta echo foxtrot")
        assert Fraction(len(s1 & s2), len(s1 | s2)) == Fraction(4, 5)

    def test_sibling_duplicate_symmetry(self):
        sentence = "The rollout takes twelve weeks overall."
        own = eval_redundancy(make_input(sentence, siblings=("Unrelated text here. " + sentence,)))
        other = eval_redundancy(
            make_input("Unrelated text here. " + sentence, siblings=(sentence,))
        )
        assert own.score == other.score == 4

    def test_truncates_pair_text_to_sixty_chars(self):
        long_sentence = "state " + " ".join(["alignment"] * 12) + " end"
        body = f"{long_sentence}. {long_sentence}."
        verdict = eval_redundancy(make_input(body))
        left, _, right = verdict.missing_elements[0].partition(" | ")
        assert len(left) <= 60 and len(right) <= 60


class TestFactual:
    FACTS = (
        FactAssertion(subject="SLA", predicate="availability", expected_value="99.9"),
        FactAssertion(subject="delivery", predicate="timeline", expected_value="12"),
    )

    def test_no_facts_no_repeats_scores_five(self):
        verdict = eval_factual(make_input("Nothing quantified here."))
        assert verdict.score == 5
        assert verdict.missing_elements == ()

    def test_fact_contradiction(self):
        body = "The SLA availability commitment is 99.5 percent."
        verdict = eval_factual(make_input(body, facts=self.FACTS))
        assert verdict.score == 4
        assert verdict.missing_elements == ("SLA.availability: found=99.5 expected=99.9",)

    def test_matching_value_is_not_a_contradiction(self):
        body = "The SLA availability commitment is 99.90 percent."
        verdict = eval_factual(make_input(body, facts=self.FACTS))
        assert verdict.score == 5

    def test_internal_inconsistency_across_sections(self):
        verdict = eval_factual(
            make_input(
                "The delivery timeline is 12 weeks.",
                siblings=("The delivery timeline is 14 weeks.",),
            )
        )
        assert verdict.score == 4
        assert len(verdict.missing_elements) == 1
        assert "12" in verdict.missing_elements[0] and "14" in verdict.missing_elements[0]

    def test_score_floor_at_one(self):
        body = ". ".join(f"The SLA availability is 9{i}.0 percent" for i in range(6)) + "."
        verdict = eval_factual(make_input(body, facts=self.FACTS))
        assert verdict.score == 1

    def test_matches_sentence_scan_oracle(self):
        body = (
            "The SLA availability target is 98.5 percent. "
            "The delivery timeline is 12 weeks. Budget is framed elsewhere."
        )
        siblings = ["The delivery timeline is 14 weeks. The SLA availability is 99.9 percent."]
        verdict = eval_factual(make_input(body, facts=self.FACTS, siblings=tuple(siblings)))
        score, findings = oracles.oracle_factual(body, siblings, self.FACTS)
        assert (verdict.score, verdict.missing_elements) == (score, findings)


SAMPLE_OUTPUT = json.dumps(
    {
        "score": 4,
        "comments": "All key fields are present except a detailed risk analysis.",
        "missing_elements": ["risk analysis"],
    }
)


class TestLlmAgent:
    CFG = AgentConfig(agent_id="llm-completeness", aspect=Aspect.COMPLETENESS, kind="llm")

    def test_scripted_sample_output_becomes_verdict(self):
        provider = MockProvider([SAMPLE_OUTPUT])
        verdict = eval_llm(make_input("body text", ("risk analysis",)), self.CFG, provider)
        assert isinstance(verdict, Verdict)
        assert verdict.score == 4
        assert verdict.missing_elements == ("risk analysis",)
        assert verdict.aspect is Aspect.COMPLETENESS
        assert verdict.agent_id == "llm-completeness"

    def test_invalid_then_valid_records_one_repair(self):
        provider = MockProvider(["garbage", SAMPLE_OUTPUT])
        verdict = eval_llm(make_input("body"), self.CFG, provider)
        assert verdict.repairs_used == 1
        assert len(provider.calls) == 2
        assert "previous answer was rejected" in provider.calls[1]

    def test_always_invalid_escalates(self):
        provider = MockProvider(["garbage"])
        signal = eval_llm(make_input("body"), self.CFG, provider)
        assert isinstance(signal, EscalationSignal)
        assert len(provider.calls) == 3

    def test_redacts_prompt_and_restores_comments(self):
        provider = MockProvider(
            ['{"score": 5, "comments": "Reached \\u27e8PII-1\\u27e9 for sign-off.", "missing_elements": []}']
        )
        body = "Contact maria.lopez@acme-corp.com for the data."
        verdict = eval_llm(make_input(body), self.CFG, provider)
        assert "maria.lopez@acme-corp.com" not in provider.calls[0]
        assert "⟨PII-1⟩" in provider.calls[0]
        assert verdict.comments == "Reached maria.lopez@acme-corp.com for sign-off."


def test_agent_config_validates_parameters():
    with pytest.raises(ValueError):
        AgentConfig(agent_id="x", aspect=Aspect.REDUNDANCY, parameters={"jaccard_threshold": 2})
    with pytest.raises(ValueError):
        AgentConfig(agent_id="x", aspect=Aspect.COMPLIANCE, kind="psychic")
    with pytest.raises(ValueError):
        AgentConfig(agent_id="x", aspect=Aspect.COMPLIANCE, prompt_version=0)
