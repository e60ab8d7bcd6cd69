from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Optional

from pydantic import BaseModel, Field

from .alignment import find_contradictions, match_facts
from .constants import MATCH_THRESHOLD, Dimension, Severity, TemplateId
from .exceptions import ExtractionError, StitchingError
from .extraction import extract_atomic_facts
from .models import AtomicFact, ContradictionVerdict, PersonaConfig
from .normalize import with_components
from .utils import canonical_json, content_hash, write_to_file

if TYPE_CHECKING:
    from .judge import JudgeClient


class StitchedResponse(BaseModel):
    text: str
    word_count: int
    fact_ids: list[str] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)


class FaithfulnessResult(BaseModel):
    faithful: bool = False
    verified: bool = True
    extraneous: list[AtomicFact] = Field(default_factory=list)
    contradictions: list[ContradictionVerdict] = Field(default_factory=list)
    coverage: float = Field(default=0.0, ge=0.0, le=1.0)
    missing_quantities: list[str] = Field(default_factory=list)
    error: Optional[str] = None
    quarantined: Optional[Path] = None


def order_facts(facts: list[AtomicFact]) -> list[AtomicFact]:
    """Highest confidence first, then grouped by category, then by id."""
    return sorted(facts, key=lambda fact: (-fact.confidence, fact.category or "", fact.id))


def word_count(text: str) -> int:
    return len(text.split())


async def stitch(
    facts: list[AtomicFact],
    persona: PersonaConfig,
    judge: JudgeClient,
    word_bounds: Optional[tuple[int, int]] = None,
) -> StitchedResponse:
    """Turn verified facts into a persona response.

    A response outside the word bounds is returned with a warning, short fact lists legitimately
    produce short answers.
    """
    if not facts:
        raise StitchingError("At least one fact is required to stitch a response.")

    min_words, max_words = word_bounds or (persona.min_words, persona.max_words)
    ordered = order_facts(facts)
    output = await judge.complete(
        TemplateId.STITCHING,
        {
            "persona_name": persona.name,
            "region": persona.region,
            "tone": persona.tone,
            "greeting": persona.greeting,
            "closing": persona.closing,
            "min_words": str(min_words),
            "max_words": str(max_words),
            "facts": "\n".join(f"{index}. {fact.text}" for index, fact in enumerate(ordered, start=1)),
        },
    )

    text = output.response.strip()
    count = word_count(text)
    warnings = []
    if not min_words <= count <= max_words:
        warnings.append(f"response has {count} words, outside the {min_words}-{max_words} range")
        judge.log.warning(f"Stitched response has {count} words, expected between {min_words} and {max_words}")

    return StitchedResponse(text=text, word_count=count, fact_ids=[fact.id for fact in ordered], warnings=warnings)


def _missing_quantities(input_facts: list[AtomicFact], response_facts: list[AtomicFact]) -> list[str]:
    found = {
        (fact.components.quantity.lo, fact.components.quantity.hi, fact.components.quantity.unit)
        for fact in response_facts
        if fact.components.quantity
    }
    missing = []
    for fact in sorted(input_facts, key=lambda item: item.id):
        quantity = fact.components.quantity
        if quantity is None or quantity.dimension == Dimension.UNKNOWN:
            continue
        if (quantity.lo, quantity.hi, quantity.unit) not in found:
            missing.append(f"{fact.id}: {quantity}")
    return missing


def quarantine(
    directory: Path, response: str, input_facts: list[AtomicFact], result: FaithfulnessResult
) -> Path:
    path = directory / f"{content_hash(response)[:16]}.json"
    payload = {
        "response": response,
        "input_facts": [fact.model_dump(mode="json") for fact in sorted(input_facts, key=lambda fact: fact.id)],
        "result": result.model_dump(mode="json", exclude={"quarantined"}),
    }
    write_to_file(path, canonical_json(payload))
    return path


async def verify_faithfulness(
    input_facts: list[AtomicFact],
    response: str,
    judge: JudgeClient,
    threshold: float = MATCH_THRESHOLD,
    quarantine_directory: Optional[Path] = None,
) -> FaithfulnessResult:
    """Check that a stitched response says nothing beyond its input facts.

    Facts are re-extracted from the response and matched against the input facts. A response is
    faithful when every re-extracted fact matches an input fact, no High or Medium contradiction
    exists and every input quantity is found again. Unfaithful or unverifiable responses are
    written to the quarantine directory when one is given.
    """
    input_facts = await with_components(input_facts, judge)
    try:
        response_facts = await extract_atomic_facts(response, judge, id_prefix="sf")
    except ExtractionError as exc:
        result = FaithfulnessResult(faithful=False, verified=False, error=exc.message)
    else:
        match_set = await match_facts(input_facts, response_facts, judge, threshold=threshold)
        unmatched = set(match_set.unmatched_generated)
        extraneous = [fact for fact in response_facts if fact.id in unmatched]
        contradictions = [
            verdict
            for verdict in find_contradictions(input_facts, response_facts)
            if verdict.severity in (Severity.HIGH, Severity.MEDIUM)
        ]
        missing = _missing_quantities(input_facts, response_facts)
        result = FaithfulnessResult(
            faithful=not extraneous and not contradictions and not missing,
            verified=not match_set.partial,
            extraneous=extraneous,
            contradictions=contradictions,
            coverage=len(match_set.pairs) / len(input_facts) if input_facts else 0.0,
            missing_quantities=missing,
        )

    if quarantine_directory and (not result.faithful or not result.verified):
        path = quarantine(quarantine_directory, response, input_facts, result)
        judge.log.warning(f"Stitched response quarantined in {path}")
        result = result.model_copy(update={"quarantined": path})

    return result
