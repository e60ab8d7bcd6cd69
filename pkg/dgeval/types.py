from __future__ import annotations

from logging import Logger
from typing import Any, Optional, Protocol, Union, runtime_checkable

from pydantic import BaseModel, ConfigDict, Field

from .utils import content_hash


class JudgeRequest(BaseModel):
    """A fully rendered request to a judge backend."""

    model_config = ConfigDict(frozen=True)

    template_id: str
    bindings: dict[str, str] = Field(default_factory=dict)
    messages: list[dict[str, str]] = Field(default_factory=list)
    model: str
    temperature: float = 0.0
    max_tokens: int = 1024
    attempt: str = Field(default="initial", description="'initial' or 'reformat'")

    @property
    def key_material(self) -> dict[str, Any]:
        return {
            "template_id": self.template_id,
            "bindings": self.bindings,
            "params": {"model": self.model, "temperature": self.temperature, "max_tokens": self.max_tokens},
            "attempt": self.attempt,
        }

    @property
    def key(self) -> str:
        """Content hash identifying the request in the fixture store."""
        return content_hash(self.key_material)

    def to_payload(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "messages": self.messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "response_format": {"type": "json_object"},
        }


@runtime_checkable
class JudgeBackend(Protocol):
    async def __call__(self, request: JudgeRequest) -> str: ...


@runtime_checkable
class DGEvalLogger(Protocol):
    def debug(self, event: Optional[str] = None, *args: Any, **kw: Any) -> Any:
        """Send a debug event"""

    def info(self, event: Optional[str] = None, *args: Any, **kw: Any) -> Any:
        """Send an info event"""

    def warning(self, event: Optional[str] = None, *args: Any, **kw: Any) -> Any:
        """Send a warning event"""

    def error(self, event: Optional[str] = None, *args: Any, **kw: Any) -> Any:
        """Send an error event."""

    def exception(self, event: Optional[str] = None, *args: Any, **kw: Any) -> Any:
        """Send an exception event."""


DGEvalLoggers = Union[DGEvalLogger, Logger]
