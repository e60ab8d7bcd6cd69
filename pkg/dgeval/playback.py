from pathlib import Path

import ujson
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ReplayMissError
from .types import JudgeRequest
from .utils import generate_fixture_filename


class JSONPlayback(BaseSettings):
    """Judge backend answering from the files written by the JSONRecorder, without any network I/O."""

    model_config = SettingsConfigDict(env_prefix="DGEVAL_PLAYBACK_")
    directory: str = Field(default=".", description="Directory to read recorded files from")

    async def __call__(self, request: JudgeRequest) -> str:
        return self.read(request)

    def read(self, request: JudgeRequest) -> str:
        path = Path(self.directory) / generate_fixture_filename(template_id=request.template_id, key=request.key)
        if not path.is_file():
            raise ReplayMissError(key=request.key, template_id=request.template_id)

        with path.open(encoding="utf-8") as fobj:
            data = ujson.load(fobj)

        return data["response_content"]
