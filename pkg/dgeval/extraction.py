from __future__ import annotations

import asyncio
import re
from collections import defaultdict
from typing import TYPE_CHECKING, Optional

from pydantic import BaseModel, Field

from .alignment import detect_contradiction
from .constants import MATCH_THRESHOLD, Provenance, Severity, TemplateId
from .exceptions import ExtractionError, JudgeError
from .models import AtomicFact, ContradictionVerdict, QualityScore, QualityThresholds
from .normalize import decompose_components, normalize_text
from .utils import canonical_json

if TYPE_CHECKING:
    from .judge import JudgeClient

SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
EXCLUSION_PATTERNS = [
    re.compile(r"^(?:hello|hi|hey|namaste|greetings|dear farmer|good (?:morning|afternoon|evening))\b[\w ,]{0,30}$"),
    re.compile(r"^(?:based on|according to) (?:the )?(?:context|information|provided)"),
    re.compile(r"\bas an ai\b"),
    re.compile(
        r"\b(?:please )?consult (?:an|a local|your local|the local|with an?) "
        r"(?:expert|agricultural|extension|agronomist)"
    ),
    re.compile(r"^(?:i hope this helps|hope this helps|thank you|thanks|wishing you|good luck|happy farming)\b"),
    re.compile(r"^(?:i think|in my opinion|i believe)\b"),
    re.compile(r"^(?:you asked|your question is|the question is)\b"),
]


def is_excluded(text: str) -> bool:
    """Greetings, meta statements, opinions, disclaimers and fillers don't make a fact."""
    normalized = normalize_text(text)
    if not normalized:
        return True
    return any(pattern.search(normalized) for pattern in EXCLUSION_PATTERNS)


class FactGroup(BaseModel):
    members: list[AtomicFact] = Field(default_factory=list)
    flagged: bool = False

    @property
    def representative(self) -> AtomicFact:
        return select_representative(self.members)

    @property
    def normalized_texts(self) -> set[str]:
        return {normalize_text(member.text) for member in self.members}


class ExcludedFact(BaseModel):
    fact: AtomicFact
    reason: str


class GoldenFactSet(BaseModel):
    facts: list[AtomicFact] = Field(default_factory=list)
    excluded: list[ExcludedFact] = Field(default_factory=list)
    review_queue: list[ContradictionVerdict] = Field(default_factory=list)
    failures: dict[str, str] = Field(default_factory=dict)
    flagged_groups: int = 0
    extracted: int = 0


def select_representative(members: list[AtomicFact]) -> AtomicFact:
    """Most filled component slots, then the longest text, then the lowest id."""
    if not members:
        raise ValueError("a group needs at least one member")
    return min(members, key=lambda fact: (-fact.components.filled_slots, -len(fact.text), fact.id))


async def extract_atomic_facts(
    answer: str,
    judge: JudgeClient,
    id_prefix: str = "f",
    query_id: Optional[str] = None,
    provenance: Provenance = Provenance.MODEL_OUTPUT,
) -> list[AtomicFact]:
    """Decompose an answer into atomic facts with their components populated.

    Raises:
        ExtractionError: the judge couldn't produce a usable list of facts
    """
    if not answer.strip():
        return []

    sentences = [sentence for sentence in SENTENCE_SPLIT.split(answer.strip()) if sentence.strip()]
    if all(is_excluded(sentence) for sentence in sentences):
        return []

    try:
        output = await judge.complete(TemplateId.FACT_GENERATION, {"answer": answer})
    except JudgeError as exc:
        raise ExtractionError(message=f"Unable to extract facts: {exc.message}", cause=exc) from exc

    facts = [
        AtomicFact(
            id=f"{id_prefix}{index:03d}",
            text=item.text.strip(),
            confidence=item.confidence,
            provenance=provenance,
            query_id=query_id,
            category=item.category,
        )
        for index, item in enumerate(
            (item for item in output.facts if item.text.strip() and not is_excluded(item.text)), start=1
        )
    ]

    components = await asyncio.gather(*[decompose_components(fact, judge) for fact in facts])
    return [fact.model_copy(update={"components": component}) for fact, component in zip(facts, components)]


async def semantic_group(
    facts: list[AtomicFact], judge: JudgeClient, threshold: float = MATCH_THRESHOLD
) -> list[FactGroup]:
    """Merge facts that state the same recommendation.

    Facts are visited in id order and compared with the representative of every existing group,
    exact duplicates after normalization always merge. When the judge fails no merging happens
    and every fact comes back as a flagged singleton.
    """
    ordered = sorted(facts, key=lambda fact: fact.id)
    groups: list[FactGroup] = []

    try:
        for fact in ordered:
            target = await _find_group(fact, groups, judge, threshold)
            if target is None:
                groups.append(FactGroup(members=[fact]))
            else:
                target.members.append(fact)
    except JudgeError as exc:
        judge.log.warning(f"Semantic grouping failed, keeping {len(ordered)} fact(s) ungrouped: {exc}")
        return [FactGroup(members=[fact], flagged=True) for fact in ordered]

    return groups


async def _find_group(
    fact: AtomicFact, groups: list[FactGroup], judge: JudgeClient, threshold: float
) -> Optional[FactGroup]:
    normalized = normalize_text(fact.text)
    for group in groups:
        if normalized in group.normalized_texts:
            return group

    if not groups:
        return None

    representatives = {group.representative.id: group for group in groups}
    candidates = [{"id": rep_id, "text": group.representative.text} for rep_id, group in representatives.items()]
    output = await judge.complete(
        TemplateId.FACT_MATCHING, {"golden_fact": fact.text, "candidate_facts": canonical_json(candidates)}
    )

    best: Optional[tuple[float, int]] = None
    order = list(representatives)
    for match in output.matches:
        if match.id not in representatives or match.confidence < threshold:
            continue
        rank = (-match.confidence, order.index(match.id))
        if best is None or rank < best:
            best = rank
    if best is None:
        return None
    return representatives[order[best[1]]]


def screen_contradictions(facts: list[AtomicFact]) -> list[ContradictionVerdict]:
    """Check every unordered pair of facts with the rule engine."""
    ordered = sorted(facts, key=lambda fact: fact.id)
    verdicts = []
    for index, first in enumerate(ordered):
        for second in ordered[index + 1 :]:
            verdict = detect_contradiction(
                first.components, second.components, golden_id=first.id, generated_id=second.id
            )
            if verdict:
                verdicts.append(verdict)
    return sorted(verdicts, key=lambda verdict: (verdict.golden_id, verdict.generated_id))


def finalize_facts(groups: list[FactGroup], id_prefix: str = "gf") -> list[AtomicFact]:
    """One fact per group, re-issued with the ids of the facts it was derived from."""
    finalized = []
    for index, group in enumerate(groups, start=1):
        representative = group.representative
        provenances = {member.provenance for member in group.members}
        finalized.append(
            representative.model_copy(
                update={
                    "id": f"{id_prefix}{index:03d}",
                    "sources": sorted(member.id for member in group.members),
                    "provenance": provenances.pop() if len(provenances) == 1 else Provenance.CROSS_SOURCE,
                }
            )
        )
    return finalized


async def score_quality(
    fact: AtomicFact, judge: JudgeClient, thresholds: Optional[QualityThresholds] = None
) -> QualityScore:
    thresholds = thresholds or QualityThresholds()
    try:
        output = await judge.complete(TemplateId.QUALITY_SCORING, {"fact": fact.text})
    except JudgeError as exc:
        judge.log.warning(f"Unable to score the quality of fact {fact.id}: {exc}")
        return QualityScore.unscored(reason=exc.message or type(exc).__name__)

    return QualityScore.from_scores(
        confidence=output.confidence,
        completeness=output.completeness,
        actionability=output.actionability,
        thresholds=thresholds,
    )


async def filter_by_quality(
    facts: list[AtomicFact], judge: JudgeClient, thresholds: Optional[QualityThresholds] = None
) -> tuple[list[AtomicFact], list[ExcludedFact]]:
    scores = await asyncio.gather(*[score_quality(fact, judge, thresholds) for fact in facts])

    kept: list[AtomicFact] = []
    excluded: list[ExcludedFact] = []
    for fact, score in zip(facts, scores):
        if score.passed:
            kept.append(fact)
        else:
            excluded.append(ExcludedFact(fact=fact, reason=score.reason or "below threshold"))
    return kept, excluded


async def build_golden_facts(
    answers: dict[str, str],
    judge: JudgeClient,
    corpus_wide: bool = False,
    quality: bool = False,
    thresholds: Optional[QualityThresholds] = None,
    provenance: Provenance = Provenance.HUMAN_CURATED,
) -> GoldenFactSet:
    """Produce golden facts from golden answers keyed by query id.

    Facts are grouped within their answer, or across every answer when corpus_wide is set,
    finalized, screened for contradictions within their answer (or across every answer when
    corpus_wide is set) and optionally filtered on quality.
    High severity verdicts land in the review queue; nothing is deleted automatically.
    """
    result = GoldenFactSet()
    extracted: dict[str, list[AtomicFact]] = {}

    async def _extract(query_id: str) -> tuple[str, list[AtomicFact]]:
        return query_id, await extract_atomic_facts(
            answers[query_id], judge, id_prefix=f"{query_id}-af", query_id=query_id, provenance=provenance
        )

    outcomes = await asyncio.gather(*[_extract(query_id) for query_id in sorted(answers)], return_exceptions=True)
    for query_id, outcome in zip(sorted(answers), outcomes):
        if isinstance(outcome, ExtractionError):
            judge.log.warning(f"Golden answer {query_id} could not be decomposed: {outcome.message}")
            result.failures[query_id] = outcome.message or "extraction failed"
            continue
        if isinstance(outcome, BaseException):
            raise outcome
        extracted[outcome[0]] = outcome[1]
    result.extracted = sum(len(facts) for facts in extracted.values())

    if corpus_wide:
        groups = await semantic_group([fact for facts in extracted.values() for fact in facts], judge)
        finalized = finalize_facts(groups, id_prefix="gf")
    else:
        groups, finalized = [], []
        for query_id, facts in extracted.items():
            answer_groups = await semantic_group(facts, judge)
            groups.extend(answer_groups)
            finalized.extend(finalize_facts(answer_groups, id_prefix=f"{query_id}-gf"))
    result.flagged_groups = sum(1 for group in groups if group.flagged)

    if quality:
        finalized, excluded = await filter_by_quality(finalized, judge, thresholds)
        result.excluded.extend(excluded)

    result.facts = finalized
    if corpus_wide:
        verdicts = screen_contradictions(finalized)
    else:
        by_answer: dict[Optional[str], list[AtomicFact]] = defaultdict(list)
        for fact in finalized:
            by_answer[fact.query_id].append(fact)
        verdicts = [verdict for facts in by_answer.values() for verdict in screen_contradictions(facts)]
    result.review_queue = sorted(
        (verdict for verdict in verdicts if verdict.severity == Severity.HIGH),
        key=lambda verdict: (verdict.golden_id, verdict.generated_id),
    )
    if result.review_queue:
        judge.log.warning(f"{len(result.review_queue)} high severity contradiction(s) queued for expert review")
    return result
