from __future__ import annotations

from collections.abc import Sequence
from typing import TYPE_CHECKING, Optional, Union

from .constants import ANCHOR_NAMES, TemplateId
from .exceptions import NoGoldenFactsError
from .models import AnchorResult, AtomicFact, ConversationalityScore, Query, RelevanceScore
from .normalize import normalize_text

if TYPE_CHECKING:
    from .judge import JudgeClient

MIN_RESPONSE_WORDS = 2


def classify_specificity(flags: Sequence[bool], evidence: Optional[dict[str, list[str]]] = None) -> AnchorResult:
    """Score and classify a set of anchor flags.

    Specific means at least two of the first six anchors plus the actionable anchor.
    """
    return AnchorResult(flags=tuple(flags), evidence=evidence or {})


async def detect_anchors(response: str, query: Query, judge: JudgeClient) -> AnchorResult:
    """Ask the judge which contextual anchors a response carries.

    A flag only stays true when the judge quotes at least one span found verbatim in the
    response. Responses of fewer than two words carry no anchor and don't reach the judge.
    """
    if len(normalize_text(response).split()) < MIN_RESPONSE_WORDS:
        return classify_specificity([False] * len(ANCHOR_NAMES))

    output = await judge.complete(TemplateId.SPECIFICITY, {"query": query.text, "response": response})

    flags: list[bool] = []
    evidence: dict[str, list[str]] = {}
    for name, anchor in zip(ANCHOR_NAMES, output.flags):
        spans = [span for span in anchor.evidence if span and span in response]
        present = anchor.present and bool(spans)
        if anchor.present and not spans:
            judge.log.debug(f"Anchor '{name}' dropped for query {query.id}, no verbatim evidence")
        flags.append(present)
        if present:
            evidence[name] = spans

    return classify_specificity(flags, evidence)


async def score_conversationality(query: Query, response: str, judge: JudgeClient) -> ConversationalityScore:
    output = await judge.complete(TemplateId.CONVERSATIONALITY, {"query": query.text, "response": response})
    return ConversationalityScore(**output.model_dump())


def _format_facts(facts: Sequence[AtomicFact]) -> str:
    return "\n".join(f"- {fact.text}" for fact in sorted(facts, key=lambda fact: fact.id))


async def score_relevance(
    query: Query, response: Union[str, Sequence[AtomicFact]], golden: Sequence[AtomicFact], judge: JudgeClient
) -> RelevanceScore:
    """Score a response, or the facts extracted from it, against the question and the golden facts."""
    if not golden:
        raise NoGoldenFactsError(query_id=query.id)

    response_text = response if isinstance(response, str) else _format_facts(response)
    output = await judge.complete(
        TemplateId.RELEVANCE,
        {"query": query.text, "response": response_text, "golden_facts": _format_facts(golden)},
    )
    return RelevanceScore(**output.model_dump())
