from __future__ import annotations

from pathlib import Path
from typing import Protocol, runtime_checkable

import ujson
from pydantic_settings import BaseSettings, SettingsConfigDict

from .types import JudgeRequest
from .utils import generate_fixture_filename


@runtime_checkable
class Recorder(Protocol):
    def record(self, request: JudgeRequest, raw: str) -> None:
        """Record the raw answer of the judge to a request"""


class NoRecorder:
    @staticmethod
    def record(request: JudgeRequest, raw: str) -> None:
        """The NoRecorder just silently returns"""

    @classmethod
    def default(cls) -> NoRecorder:
        return cls()


class JSONRecorder(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="DGEVAL_JSON_RECORDER_")
    directory: str = "."

    def record(self, request: JudgeRequest, raw: str) -> None:
        path = Path(self.directory) / generate_fixture_filename(template_id=request.template_id, key=request.key)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = {
            "key": request.key,
            "request": request.key_material,
            "messages": request.messages,
            "response_content": raw,
        }

        with path.open(mode="w", encoding="utf-8") as fobj:
            ujson.dump(data, fobj, indent=4, sort_keys=True, ensure_ascii=False, escape_forward_slashes=False)
