from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing_extensions import Self

from .constants import MATCH_THRESHOLD, JudgeMode
from .models import QualityThresholds
from .types import DGEvalLoggers, JudgeBackend
from .utils import is_valid_url


class JudgeConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="DGEVAL_JUDGE_", validate_assignment=True)
    endpoint: str = Field(
        default="https://api.openai.com/v1", description="Base URL of the chat-completion compatible endpoint."
    )
    api_key: Optional[str] = Field(
        default=None, repr=False, description="Bearer token, only read from the DGEVAL_JUDGE_API_KEY variable."
    )
    model: str = Field(default="gpt-4o", description="Model used as the judge.")
    temperature: float = Field(default=0.0, ge=0.0, le=2.0, description="Sampling temperature of the judge.")
    max_tokens: int = Field(default=1024, ge=1, description="Maximum number of tokens generated per request.")
    mode: JudgeMode = Field(default=JudgeMode.LIVE, description="live, record or replay")
    fixtures_directory: Path = Field(
        default=Path("fixtures/judge"), description="Directory holding the recorded judge exchanges."
    )
    max_concurrent_requests: int = Field(default=5, ge=1, description="Max in-flight requests to the judge")
    max_attempts: int = Field(default=4, ge=1, description="Number of attempts for a request before giving up")
    retry_delay: float = Field(default=1.0, ge=0.0, description="Base delay in seconds of the exponential backoff.")
    timeout: int = Field(default=60, ge=1, description="Read timeout in seconds")
    backend: Optional[JudgeBackend] = Field(
        default=None, description="Callable used instead of the HTTP backend, for tests and alternative providers"
    )
    log: Optional[Any] = None

    @field_validator("endpoint")
    @classmethod
    def validate_endpoint(cls, value: str) -> str:
        if is_valid_url(value):
            return value.rstrip("/")

        raise ValueError("The configured endpoint is not a valid url")

    @property
    def logger(self) -> DGEvalLoggers:
        # structlog loggers don't expose the methods of the protocol to pydantic, hence the untyped field
        return self.log  # type: ignore[return-value]

    @property
    def parameters(self) -> dict[str, Any]:
        return {"model": self.model, "temperature": self.temperature, "max_tokens": self.max_tokens}


class EvaluationConfig(BaseModel):
    match_threshold: float = Field(
        default=MATCH_THRESHOLD, ge=MATCH_THRESHOLD, le=1.0, description="Minimum confidence of a fact match"
    )
    quality_thresholds: QualityThresholds = Field(default_factory=QualityThresholds)
    strata_minimum: int = Field(default=5, ge=1, description="Records required before a stratum cell is reported")
    judge_low_severity: bool = Field(default=False, description="Ask the judge for context-dependent contradictions")
    word_bounds: tuple[int, int] = Field(default=(150, 300), description="Soft word bounds of stitched responses")
    checkpoint_path: Optional[Path] = Field(default=None, description="JSON-lines file of finished records")
    quarantine_directory: Optional[Path] = Field(default=None, description="Where unfaithful responses are written")

    @model_validator(mode="after")
    def validate_word_bounds(self) -> Self:
        low, high = self.word_bounds
        if low < 1 or low > high:
            raise ValueError(f"invalid word bounds {self.word_bounds}")
        return self
