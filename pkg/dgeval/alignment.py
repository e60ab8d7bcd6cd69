from __future__ import annotations

import asyncio
import math
import re
from collections import Counter
from typing import TYPE_CHECKING, Optional

from pydantic import BaseModel, Field

from .constants import MATCH_THRESHOLD, Polarity, RecordStatus, Severity, TemplateId
from .exceptions import JudgeError, NoGoldenFactsError
from .models import (
    Alignment,
    AtomicFact,
    ContradictionVerdict,
    EvalRecord,
    FactComponents,
    MatchPair,
    MatchSet,
    NumericRange,
    RuleOutcome,
    f1,
)
from .normalize import normalize_text, range_overlap_fraction
from .utils import canonical_json

if TYPE_CHECKING:
    from .judge import JudgeClient

OPPOSITE_POLARITIES = {Polarity.AFFIRM, Polarity.NEGATE}
SMALL_SCALE_CUES = re.compile(r"\b(?:manual|manually|by hand|small[- ]scale|smallholder)\b")
LARGE_SCALE_CUES = re.compile(r"\b(?:large[- ]scale|mechani[sz]ed|mechanical|tractor|machine|machinery)\b")
OVERLAP_LIMIT = 0.5
RATIO_LIMIT = 2.0
FACT_RATE_CAVEAT = (
    "Per-fact rates depend on how many facts a model generates; a verbose model spreads the same verdicts "
    "over more facts. Compare per-response rates across models."
)


class ContradictionSummary(BaseModel):
    responses: int = 0
    contradicted_responses: int = 0
    per_response_rate: float = 0.0
    generated_facts: int = 0
    verdicts: int = 0
    per_fact_rate: float = 0.0
    severity_histogram: dict[str, int] = Field(default_factory=lambda: {severity.value: 0 for severity in Severity})
    caveat: str = FACT_RATE_CAVEAT


def _slot(value: Optional[str]) -> str:
    return normalize_text(value or "")


def _same_subject(a: FactComponents, b: FactComponents) -> Optional[bool]:
    """True or False when the subjects can be compared, None when only one side names a subject."""
    subject_a, subject_b = _slot(a.subject), _slot(b.subject)
    if subject_a and subject_b:
        return subject_a == subject_b
    if not subject_a and not subject_b:
        attribute_a = _slot(a.attribute)
        return bool(attribute_a) and attribute_a == _slot(b.attribute)
    return None


def _scale(method: str) -> Optional[str]:
    if SMALL_SCALE_CUES.search(method):
        return "small"
    if LARGE_SCALE_CUES.search(method):
        return "large"
    return None


def _contains(outer: NumericRange, inner: NumericRange) -> bool:
    return outer.lo <= inner.lo and inner.hi <= outer.hi


def _quantity_rule(a: FactComponents, b: FactComponents) -> Optional[RuleOutcome]:
    if a.quantity is None or b.quantity is None:
        return None
    overlap = range_overlap_fraction(a.quantity, b.quantity)
    if overlap is None:
        return None

    method_a, method_b = _slot(a.method), _slot(b.method)
    if method_a and method_b and method_a != method_b:
        return None
    attribute_a, attribute_b = _slot(a.attribute), _slot(b.attribute)
    if attribute_a and attribute_b and attribute_a != attribute_b:
        return None

    low, high = sorted([a.quantity.midpoint, b.quantity.midpoint])
    ratio = math.inf if low <= 0 < high else (high / low if low > 0 else 1.0)
    described = f"{a.quantity} vs {b.quantity}"

    if overlap == 0:
        if a.quantity.is_point and b.quantity.is_point and ratio <= RATIO_LIMIT:
            return RuleOutcome(rule_id=2, severity=Severity.MEDIUM, rationale=f"different values {described}")
        return RuleOutcome(rule_id=2, severity=Severity.HIGH, rationale=f"non-overlapping quantities {described}")
    if overlap < OVERLAP_LIMIT:
        return RuleOutcome(rule_id=2, severity=Severity.MEDIUM, rationale=f"small overlap ({overlap:.0%}) {described}")
    if _contains(a.quantity, b.quantity) or _contains(b.quantity, a.quantity):
        return None
    if ratio > RATIO_LIMIT:
        rationale = f"quantities differ by {ratio:.1f}x {described}"
        return RuleOutcome(rule_id=2, severity=Severity.MEDIUM, rationale=rationale)
    return None


def evaluate_rules(a: FactComponents, b: FactComponents) -> RuleOutcome:
    """Apply the ordered comparison rules and return the one that decided the pair.

    Rules 1 to 4 only apply to facts about the same subject and yield a severity; rules 5 to 7
    explain why a pair is not a contradiction. Every condition is symmetric, so swapping the
    arguments never changes the outcome.
    """
    same_subject = _same_subject(a, b)
    if same_subject is False:
        return RuleOutcome(rule_id=6, rationale="different subjects")
    if same_subject is None:
        return RuleOutcome(rationale="subjects cannot be compared")

    opposite = {a.polarity, b.polarity} == OPPOSITE_POLARITIES
    attribute_a, attribute_b = _slot(a.attribute), _slot(b.attribute)
    method_a, method_b = _slot(a.method), _slot(b.method)
    timing_a, timing_b = _slot(a.timing), _slot(b.timing)

    if opposite and attribute_a and attribute_a == attribute_b:
        return RuleOutcome(rule_id=1, severity=Severity.HIGH, rationale=f"opposite polarity on '{attribute_a}'")

    quantity_outcome = _quantity_rule(a, b)
    if quantity_outcome:
        return quantity_outcome

    if opposite and (a.absolute or b.absolute) and method_a and method_a == method_b:
        return RuleOutcome(rule_id=3, severity=Severity.MEDIUM, rationale=f"absolute statement opposed on '{method_a}'")

    if opposite and method_a and method_a == method_b and timing_a and timing_a == timing_b:
        return RuleOutcome(
            rule_id=4, severity=Severity.HIGH, rationale=f"'{method_a}' {timing_a} both recommended and discouraged"
        )

    if method_a and method_b and method_a != method_b:
        if _scale(method_a) and _scale(method_b) and _scale(method_a) != _scale(method_b):
            return RuleOutcome(rule_id=7, rationale="different scale of operation")
        return RuleOutcome(rule_id=5, rationale="different methods for the same goal")

    return RuleOutcome(rationale="no conflicting component")


def detect_contradiction(
    a: FactComponents, b: FactComponents, golden_id: str = "", generated_id: str = ""
) -> Optional[ContradictionVerdict]:
    outcome = evaluate_rules(a, b)
    if not outcome.is_contradiction or outcome.rule_id is None or outcome.severity is None:
        return None
    return ContradictionVerdict(
        golden_id=golden_id,
        generated_id=generated_id,
        rule_id=outcome.rule_id,
        severity=outcome.severity,
        rationale=outcome.rationale,
    )


def find_contradictions(golden: list[AtomicFact], generated: list[AtomicFact]) -> list[ContradictionVerdict]:
    verdicts = []
    for golden_fact in sorted(golden, key=lambda fact: fact.id):
        for generated_fact in sorted(generated, key=lambda fact: fact.id):
            verdict = detect_contradiction(
                golden_fact.components,
                generated_fact.components,
                golden_id=golden_fact.id,
                generated_id=generated_fact.id,
            )
            if verdict:
                verdicts.append(verdict)
    return verdicts


async def judge_contradictions(
    reference: AtomicFact, candidates: list[AtomicFact], judge: JudgeClient
) -> list[ContradictionVerdict]:
    """Ask the judge for context-dependent conflicts the rule engine can't decide, always graded low."""
    if not candidates:
        return []

    ordered = sorted(candidates, key=lambda fact: fact.id)
    known = {fact.id for fact in ordered}
    output = await judge.complete(
        TemplateId.CONTRADICTION,
        {
            "reference_fact": reference.text,
            "candidate_facts": canonical_json([{"id": fact.id, "text": fact.text} for fact in ordered]),
        },
    )
    verdicts = {
        item.id: ContradictionVerdict(
            golden_id=reference.id,
            generated_id=item.id,
            rule_id=3,
            severity=Severity.LOW,
            rationale=item.rationale or "context-dependent conflict",
        )
        for item in output.contradictions
        if item.id in known
    }
    return [verdicts[key] for key in sorted(verdicts)]


async def _judge_pairs(
    golden_fact: AtomicFact, generated: list[AtomicFact], judge: JudgeClient, threshold: float
) -> list[MatchPair]:
    known = {fact.id for fact in generated}
    output = await judge.complete(
        TemplateId.FACT_MATCHING,
        {
            "golden_fact": golden_fact.text,
            "candidate_facts": canonical_json([{"id": fact.id, "text": fact.text} for fact in generated]),
        },
    )
    return [
        MatchPair(golden_id=golden_fact.id, generated_id=match.id, confidence=match.confidence)
        for match in output.matches
        if match.id in known and match.confidence >= threshold
    ]


async def match_facts(
    golden: list[AtomicFact], generated: list[AtomicFact], judge: JudgeClient, threshold: float = MATCH_THRESHOLD
) -> MatchSet:
    """One-to-one matching of golden and generated facts.

    Normalized duplicates pair at confidence 1.0 without asking the judge. Every other golden
    fact is scored against the generated facts by the judge, pairs under the threshold are
    dropped and the rest is resolved greedily by descending confidence, ties broken by ids.
    """
    golden = sorted(golden, key=lambda fact: fact.id)
    generated = sorted(generated, key=lambda fact: fact.id)

    candidates: list[MatchPair] = []
    generated_texts: dict[str, list[str]] = {}
    for fact in generated:
        generated_texts.setdefault(normalize_text(fact.text), []).append(fact.id)

    to_judge = []
    for fact in golden:
        exact = generated_texts.get(normalize_text(fact.text), [])
        candidates.extend(MatchPair(golden_id=fact.id, generated_id=other, confidence=1.0) for other in exact)
        if not exact and generated:
            to_judge.append(fact)

    partial = False
    outcomes = await asyncio.gather(
        *[_judge_pairs(fact, generated, judge, threshold) for fact in to_judge], return_exceptions=True
    )
    for fact, outcome in zip(to_judge, outcomes):
        if isinstance(outcome, JudgeError):
            judge.log.warning(f"Matching of golden fact {fact.id} failed, counted as unmatched: {outcome}")
            partial = True
            continue
        if isinstance(outcome, BaseException):
            raise outcome
        candidates.extend(outcome)

    pairs: list[MatchPair] = []
    used_golden: set[str] = set()
    used_generated: set[str] = set()
    for pair in sorted(candidates, key=lambda item: (-item.confidence, item.golden_id, item.generated_id)):
        if pair.golden_id in used_golden or pair.generated_id in used_generated:
            continue
        pairs.append(pair)
        used_golden.add(pair.golden_id)
        used_generated.add(pair.generated_id)

    return MatchSet(
        pairs=sorted(pairs, key=lambda pair: pair.golden_id),
        unmatched_golden=[fact.id for fact in golden if fact.id not in used_golden],
        unmatched_generated=[fact.id for fact in generated if fact.id not in used_generated],
        partial=partial,
        threshold=threshold,
    )


def compute_prf(match_set: MatchSet, golden_size: int, generated_size: int) -> Alignment:
    if golden_size <= 0:
        raise NoGoldenFactsError()

    matched = len(match_set.pairs)
    recall = matched / golden_size
    precision = matched / generated_size if generated_size else 0.0
    return Alignment(
        recall=recall,
        precision=precision,
        f1=f1(recall, precision),
        matched=matched,
        golden_size=golden_size,
        generated_size=generated_size,
        degenerate=generated_size == 0 or recall + precision == 0,
    )


def contradiction_report(records: list[EvalRecord]) -> ContradictionSummary:
    counted = [record for record in records if record.status in (RecordStatus.EVALUATED, RecordStatus.PARTIAL)]
    verdicts = [verdict for record in counted for verdict in record.contradictions]
    generated_facts = sum(record.generated_facts for record in counted)
    contradicted = sum(1 for record in counted if record.is_contradicted)

    histogram = {severity.value: 0 for severity in Severity}
    histogram.update(Counter(verdict.severity.value for verdict in verdicts))

    return ContradictionSummary(
        responses=len(counted),
        contradicted_responses=contradicted,
        per_response_rate=contradicted / len(counted) if counted else 0.0,
        generated_facts=generated_facts,
        verdicts=len(verdicts),
        per_fact_rate=len(verdicts) / generated_facts if generated_facts else 0.0,
        severity_histogram=histogram,
    )
