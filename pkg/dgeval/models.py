from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator
from typing_extensions import Self

from .constants import (
    ANCHOR_NAMES,
    CONVERSATIONALITY_DIMENSIONS,
    MATCH_THRESHOLD,
    RELEVANCE_DIMENSIONS,
    Dimension,
    Polarity,
    Provenance,
    RecordStatus,
    RelevanceBand,
    Severity,
    SpecificityClass,
)
from .utils import duplicates

# (lower bound, upper bound) of every confidence band, the stored value is the midpoint.
CONFIDENCE_BANDS: tuple[tuple[float, float], ...] = ((0.1, 0.2), (0.3, 0.4), (0.5, 0.6), (0.7, 0.8), (0.9, 1.0))


def f1(recall: float, precision: float) -> float:
    """Harmonic mean of recall and precision, 0 when both are 0."""
    for name, value in (("recall", recall), ("precision", precision)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be within [0, 1], got {value}")

    if recall + precision == 0:
        return 0.0
    return 2 * recall * precision / (recall + precision)


def snap_confidence(value: float) -> tuple[float, str]:
    """Return the midpoint and label of the confidence band closest to value."""
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"confidence must be within [0, 1], got {value}")

    index = min(range(len(CONFIDENCE_BANDS)), key=lambda idx: abs(sum(CONFIDENCE_BANDS[idx]) / 2 - value))
    low, high = CONFIDENCE_BANDS[index]
    return round((low + high) / 2, 2), f"{low:.1f}-{high:.1f}"


class DGEvalModel(BaseModel):
    model_config = ConfigDict(frozen=True, use_enum_values=False)


class Query(DGEvalModel):
    id: str = Field(..., min_length=1)
    text: str = Field(..., min_length=1)
    crop: str = ""
    topic: str = ""
    language: str = ""
    region: str = ""

    @field_validator("text")
    @classmethod
    def validate_text(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("query text must not be blank")
        return value


class NumericRange(DGEvalModel):
    lo: float
    hi: float
    unit: str
    dimension: Dimension

    @model_validator(mode="after")
    def validate_bounds(self) -> Self:
        if self.lo > self.hi:
            raise ValueError(f"lo ({self.lo}) must not exceed hi ({self.hi})")
        return self

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return (self.lo + self.hi) / 2

    def __str__(self) -> str:
        if self.is_point:
            return f"{self.lo:g} {self.unit}"
        return f"{self.lo:g}-{self.hi:g} {self.unit}"


class FactComponents(DGEvalModel):
    subject: str = ""
    attribute: str = ""
    polarity: Polarity = Polarity.UNKNOWN
    quantity: Optional[NumericRange] = None
    timing: Optional[str] = None
    method: Optional[str] = None
    absolute: bool = Field(default=False, description="Set when the fact uses an absolute cue like 'always'")
    partial: bool = Field(default=False, description="Only the deterministic slots could be filled")

    @property
    def filled_slots(self) -> int:
        return sum(
            1
            for value in (self.subject, self.attribute, self.quantity, self.timing, self.method)
            if value not in (None, "")
        ) + int(self.polarity != Polarity.UNKNOWN)


class AtomicFact(DGEvalModel):
    id: str = Field(..., min_length=1)
    text: str = Field(..., min_length=1)
    components: FactComponents = Field(default_factory=FactComponents)
    confidence: float = 0.95
    confidence_band: str = ""
    provenance: Provenance = Provenance.MODEL_OUTPUT
    sources: list[str] = Field(default_factory=list)
    query_id: Optional[str] = None
    category: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def snap_to_band(cls, values: Any) -> Any:
        if isinstance(values, dict):
            midpoint, band = snap_confidence(float(values.get("confidence", 0.95)))
            values = {**values, "confidence": midpoint, "confidence_band": band}
        return values


class MatchPair(DGEvalModel):
    golden_id: str
    generated_id: str
    confidence: float = Field(..., ge=0.0, le=1.0)


class MatchSet(DGEvalModel):
    pairs: list[MatchPair] = Field(default_factory=list)
    unmatched_golden: list[str] = Field(default_factory=list)
    unmatched_generated: list[str] = Field(default_factory=list)
    partial: bool = False
    threshold: float = Field(default=MATCH_THRESHOLD, ge=MATCH_THRESHOLD, le=1.0)

    @model_validator(mode="after")
    def validate_one_to_one(self) -> Self:
        golden = [pair.golden_id for pair in self.pairs] + self.unmatched_golden
        generated = [pair.generated_id for pair in self.pairs] + self.unmatched_generated
        repeated = duplicates(golden) + duplicates(generated)
        if repeated:
            raise ValueError(f"fact ids used more than once: {repeated}")
        return self

    @model_validator(mode="after")
    def validate_confidence(self) -> Self:
        weak = [f"{pair.golden_id}/{pair.generated_id}" for pair in self.pairs if pair.confidence < self.threshold]
        if weak:
            raise ValueError(f"pairs below the {self.threshold} match threshold: {weak}")
        return self


class ContradictionVerdict(DGEvalModel):
    golden_id: str
    generated_id: str
    rule_id: int = Field(..., ge=1, le=7)
    severity: Severity
    rationale: str = ""


class RuleOutcome(DGEvalModel):
    """Deciding rule of a fact pair, kept even when the rule clears the pair."""

    rule_id: Optional[int] = Field(default=None, ge=1, le=7)
    severity: Optional[Severity] = None
    rationale: str = ""

    @property
    def is_contradiction(self) -> bool:
        return self.severity is not None


class AnchorResult(DGEvalModel):
    flags: tuple[bool, bool, bool, bool, bool, bool, bool]
    evidence: dict[str, list[str]] = Field(default_factory=dict)
    score: int = 0
    classification: SpecificityClass = SpecificityClass.NOT_SPECIFIC

    @model_validator(mode="before")
    @classmethod
    def apply_decision_rule(cls, values: Any) -> Any:
        if not isinstance(values, dict) or "flags" not in values:
            return values
        flags = tuple(bool(flag) for flag in values["flags"])
        if len(flags) != len(ANCHOR_NAMES):
            raise ValueError(f"expected {len(ANCHOR_NAMES)} flags, got {len(flags)}")
        specific = sum(flags[:6]) >= 2 and flags[6]
        return {
            **values,
            "flags": flags,
            "score": sum(flags),
            "classification": SpecificityClass.SPECIFIC if specific else SpecificityClass.NOT_SPECIFIC,
        }

    @property
    def named_flags(self) -> dict[str, bool]:
        return dict(zip(ANCHOR_NAMES, self.flags))


class ConversationalityScore(DGEvalModel):
    content_quality: int = Field(..., ge=1, le=5)
    communication_style: int = Field(..., ge=1, le=5)
    practical_advice: int = Field(..., ge=1, le=5)
    safety_credibility: int = Field(..., ge=1, le=5)
    conversation_flow: int = Field(..., ge=1, le=5)
    response_format: int = Field(..., ge=1, le=5)
    rationale: dict[str, str] = Field(default_factory=dict)

    @property
    def dimensions(self) -> list[int]:
        return [getattr(self, name) for name in CONVERSATIONALITY_DIMENSIONS]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def overall(self) -> float:
        return sum(self.dimensions) / len(CONVERSATIONALITY_DIMENSIONS)


class RelevanceScore(DGEvalModel):
    direct_relevance: int = Field(..., ge=1, le=10)
    ground_truth_consistency: int = Field(..., ge=1, le=10)
    practical_implementation: int = Field(..., ge=1, le=10)
    specificity: int = Field(..., ge=1, le=10)
    agricultural_soundness: int = Field(..., ge=1, le=10)
    gaps: list[str] = Field(default_factory=list)
    farmer_applicability: str = ""

    @property
    def dimensions(self) -> list[int]:
        return [getattr(self, name) for name in RELEVANCE_DIMENSIONS]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def overall(self) -> float:
        return sum(self.dimensions) / len(RELEVANCE_DIMENSIONS)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def percentage(self) -> float:
        return self.overall * 10

    @property
    def band(self) -> RelevanceBand:
        if self.percentage >= 80:
            return RelevanceBand.HIGH
        if self.percentage >= 50:
            return RelevanceBand.MED
        return RelevanceBand.LOW


class QualityThresholds(DGEvalModel):
    confidence: float = Field(default=0.6, ge=0.0, le=1.0)
    completeness: float = Field(default=0.6, ge=0.0, le=1.0)
    actionability: float = Field(default=0.6, ge=0.0, le=1.0)


class QualityScore(DGEvalModel):
    confidence: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    completeness: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    actionability: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    passed: bool = False
    reason: Optional[str] = None

    @classmethod
    def from_scores(
        cls, confidence: float, completeness: float, actionability: float, thresholds: QualityThresholds
    ) -> QualityScore:
        scores = {"confidence": confidence, "completeness": completeness, "actionability": actionability}
        failing = [name for name, value in scores.items() if value < getattr(thresholds, name)]
        reason = f"below threshold: {', '.join(failing)}" if failing else None
        return cls(**scores, passed=not failing, reason=reason)

    @classmethod
    def unscored(cls, reason: str) -> QualityScore:
        return cls(passed=False, reason=f"unscored: {reason}")


class Alignment(DGEvalModel):
    recall: float = Field(..., ge=0.0, le=1.0)
    precision: float = Field(..., ge=0.0, le=1.0)
    f1: float = Field(..., ge=0.0, le=1.0)
    matched: int = 0
    golden_size: int = 0
    generated_size: int = 0
    degenerate: bool = False


class EvalRecord(DGEvalModel):
    query_id: str
    model: str
    status: RecordStatus = RecordStatus.EVALUATED
    specificity: Optional[AnchorResult] = None
    relevance: Optional[RelevanceScore] = None
    conversationality: Optional[ConversationalityScore] = None
    alignment: Optional[Alignment] = None
    match: Optional[MatchSet] = None
    contradictions: list[ContradictionVerdict] = Field(default_factory=list)
    generated_facts: int = 0
    issues: list[str] = Field(default_factory=list)

    @property
    def is_contradicted(self) -> bool:
        return any(verdict.severity in (Severity.HIGH, Severity.MEDIUM) for verdict in self.contradictions)


class PersonaConfig(DGEvalModel):
    name: str = Field(..., min_length=1)
    region: str = Field(..., min_length=1)
    greeting: str = "Hello!"
    tone: str = "warm, supportive and educational"
    closing: str = "a word of encouragement or an offer to help further"
    min_words: int = Field(default=150, ge=1)
    max_words: int = Field(default=300, ge=1)

    @model_validator(mode="after")
    def validate_word_bounds(self) -> Self:
        if self.min_words > self.max_words:
            raise ValueError(f"min_words ({self.min_words}) exceeds max_words ({self.max_words})")
        return self
