from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional, Union

import jinja2
from jinja2 import meta
from pydantic import BaseModel, ConfigDict, Field

from .constants import ANCHOR_NAMES, Polarity, TemplateId
from .exceptions import MissingBindingError, TemplateNotFoundError
from .utils import canonical_json

TEMPLATE_DIRECTORY = Path(__file__).parent / "templates"
REFORMAT_TEMPLATE = "reformat.j2"

SYSTEM_PROMPT = (
    "You are an agricultural evaluation assistant working for an extension service. "
    "Follow the instructions exactly and reply with a single JSON object, without markdown or commentary."
)


class JudgeOutput(BaseModel):
    model_config = ConfigDict(extra="ignore")


class GeneratedFact(JudgeOutput):
    text: str = Field(..., min_length=1)
    confidence: float = Field(default=0.95, ge=0.0, le=1.0)
    category: Optional[str] = None


class FactGenerationOutput(JudgeOutput):
    facts: list[GeneratedFact] = Field(default_factory=list)


class AnchorFlag(JudgeOutput):
    present: bool = False
    evidence: list[str] = Field(default_factory=list)


class SpecificityOutput(JudgeOutput):
    entity: AnchorFlag
    location: AnchorFlag
    time: AnchorFlag
    quantity: AnchorFlag
    conditional: AnchorFlag
    mechanistic: AnchorFlag
    actionable: AnchorFlag

    @property
    def flags(self) -> list[AnchorFlag]:
        return [getattr(self, name) for name in ANCHOR_NAMES]


class CandidateMatch(JudgeOutput):
    id: str
    confidence: float = Field(..., ge=0.0, le=1.0)
    rationale: str = ""


class FactMatchingOutput(JudgeOutput):
    matches: list[CandidateMatch] = Field(default_factory=list)


class CandidateContradiction(JudgeOutput):
    id: str
    severity: Literal["low"] = "low"
    rationale: str = ""


class ContradictionOutput(JudgeOutput):
    contradictions: list[CandidateContradiction] = Field(default_factory=list)


class RelevanceOutput(JudgeOutput):
    direct_relevance: int = Field(..., ge=1, le=10)
    ground_truth_consistency: int = Field(..., ge=1, le=10)
    practical_implementation: int = Field(..., ge=1, le=10)
    specificity: int = Field(..., ge=1, le=10)
    agricultural_soundness: int = Field(..., ge=1, le=10)
    gaps: list[str] = Field(default_factory=list)
    farmer_applicability: str = ""


class StitchingOutput(JudgeOutput):
    response: str = Field(..., min_length=1)


class ConversationalityOutput(JudgeOutput):
    content_quality: int = Field(..., ge=1, le=5)
    communication_style: int = Field(..., ge=1, le=5)
    practical_advice: int = Field(..., ge=1, le=5)
    safety_credibility: int = Field(..., ge=1, le=5)
    conversation_flow: int = Field(..., ge=1, le=5)
    response_format: int = Field(..., ge=1, le=5)
    rationale: dict[str, str] = Field(default_factory=dict)


class ComponentDecompositionOutput(JudgeOutput):
    subject: str = ""
    attribute: str = ""
    polarity: Polarity = Polarity.UNKNOWN
    timing: Optional[str] = None
    method: Optional[str] = None


class QualityScoringOutput(JudgeOutput):
    confidence: float = Field(..., ge=0.0, le=1.0)
    completeness: float = Field(..., ge=0.0, le=1.0)
    actionability: float = Field(..., ge=0.0, le=1.0)


OUTPUT_MODELS: dict[TemplateId, type[JudgeOutput]] = {
    TemplateId.FACT_GENERATION: FactGenerationOutput,
    TemplateId.SPECIFICITY: SpecificityOutput,
    TemplateId.FACT_MATCHING: FactMatchingOutput,
    TemplateId.CONTRADICTION: ContradictionOutput,
    TemplateId.RELEVANCE: RelevanceOutput,
    TemplateId.STITCHING: StitchingOutput,
    TemplateId.CONVERSATIONALITY: ConversationalityOutput,
    TemplateId.COMPONENT_DECOMPOSITION: ComponentDecompositionOutput,
    TemplateId.QUALITY_SCORING: QualityScoringOutput,
}


def _environment(directory: Path) -> jinja2.Environment:
    return jinja2.Environment(
        loader=jinja2.FileSystemLoader(str(directory)),
        undefined=jinja2.StrictUndefined,
        keep_trailing_newline=True,
        autoescape=False,
    )


class PromptTemplate:
    """A prompt body with named placeholders and the schema its answer must follow."""

    def __init__(self, template_id: TemplateId, source: str, output_model: type[JudgeOutput], directory: Path):
        self.template_id = template_id
        self.source = source
        self.output_model = output_model
        self._environment = _environment(directory)
        self._template = self._environment.from_string(source)

    @property
    def placeholders(self) -> set[str]:
        return meta.find_undeclared_variables(self._environment.parse(self.source))

    @property
    def schema(self) -> str:
        return canonical_json(self.output_model.model_json_schema())

    def render(self, bindings: dict[str, str]) -> str:
        missing = sorted(self.placeholders - set(bindings))
        if missing:
            raise MissingBindingError(name=missing[0])
        return self._template.render(**bindings)


@lru_cache(maxsize=32)
def _load(template_id: TemplateId, directory: Path) -> PromptTemplate:
    path = directory / f"{template_id.value}.j2"
    if not path.is_file():
        raise TemplateNotFoundError(name=template_id.value, message=f"No template '{path.name}' in {directory}")
    return PromptTemplate(
        template_id=template_id,
        source=path.read_text(encoding="utf-8"),
        output_model=OUTPUT_MODELS[template_id],
        directory=directory,
    )


def load_template(template_id: Union[TemplateId, str], directory: Optional[Path] = None) -> PromptTemplate:
    try:
        template_id = TemplateId(template_id)
    except ValueError as exc:
        raise TemplateNotFoundError(name=str(template_id)) from exc
    return _load(template_id, (directory or TEMPLATE_DIRECTORY).resolve())


def render(template: PromptTemplate, bindings: dict[str, str]) -> str:
    return template.render(bindings)


def render_reformat(template: PromptTemplate, raw: str, errors: str) -> str:
    reformat = _environment(TEMPLATE_DIRECTORY).get_template(REFORMAT_TEMPLATE)
    return reformat.render(raw=raw, errors=errors, schema=template.schema)


def build_messages(prompt: str) -> list[dict[str, str]]:
    return [{"role": "system", "content": SYSTEM_PROMPT}, {"role": "user", "content": prompt}]
