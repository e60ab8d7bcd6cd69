from __future__ import annotations

import asyncio
import logging
from pathlib import Path
from typing import Any, Optional, Union

import httpx
import pydantic
from pydantic import BaseModel, ConfigDict
from tenacity import AsyncRetrying, RetryCallState, retry_if_exception, stop_after_attempt, wait_exponential

from .config import JudgeConfig
from .constants import JudgeMode, TemplateId
from .exceptions import (
    JudgeError,
    JudgeNotReachableError,
    JudgeNotResponsiveError,
    JudgeSchemaError,
    JudgeServerError,
    JudgeThrottledError,
)
from .playback import JSONPlayback
from .prompts import JudgeOutput, PromptTemplate, build_messages, load_template, render_reformat
from .recorder import JSONRecorder, NoRecorder, Recorder
from .types import DGEvalLoggers, JudgeBackend, JudgeRequest
from .utils import decode_json, directory_hash, extract_json_object

MAX_BACKOFF = 60


class JudgeHandle(BaseModel):
    """Descriptor of the judge a run was produced with."""

    model_config = ConfigDict(frozen=True)

    endpoint: str
    model: str
    temperature: float
    max_tokens: int
    mode: JudgeMode


def is_transient(exc: BaseException) -> bool:
    if isinstance(exc, (JudgeThrottledError, JudgeNotReachableError, JudgeNotResponsiveError)):
        return True
    return isinstance(exc, JudgeServerError) and exc.status_code >= 500


class JudgeClient:
    """The only path to a judge model.

    Renders prompt templates, bounds the number of in-flight requests, retries transient
    failures with an exponential backoff, asks once for a reformatted answer when the output
    doesn't follow the template schema, and records or replays every exchange.
    """

    def __init__(
        self,
        config: Optional[Union[JudgeConfig, dict[str, Any]]] = None,
        recorder: Optional[Recorder] = None,
        templates_directory: Optional[Path] = None,
    ):
        if isinstance(config, JudgeConfig):
            self.config = config
        else:
            config = config or {}
            self.config = JudgeConfig(**config)

        self.log: DGEvalLoggers = self.config.logger or logging.getLogger("dgeval")
        self.templates_directory = templates_directory
        self.semaphore = asyncio.Semaphore(value=self.config.max_concurrent_requests)
        self.request_count = 0

        self._backend: JudgeBackend
        if self.config.mode == JudgeMode.REPLAY:
            self._backend = JSONPlayback(directory=str(self.config.fixtures_directory))
        else:
            self._backend = self.config.backend or self._http_request

        if recorder is not None:
            self.recorder = recorder
        elif self.config.mode == JudgeMode.RECORD:
            self.recorder = JSONRecorder(directory=str(self.config.fixtures_directory))
        else:
            self.recorder = NoRecorder.default()

    @property
    def handle(self) -> JudgeHandle:
        return JudgeHandle(
            endpoint=self.config.endpoint,
            model=self.config.model,
            temperature=self.config.temperature,
            max_tokens=self.config.max_tokens,
            mode=self.config.mode,
        )

    @property
    def fixtures_hash(self) -> Optional[str]:
        if self.config.mode == JudgeMode.LIVE:
            return None
        return directory_hash(self.config.fixtures_directory)

    def template(self, template_id: Union[TemplateId, str]) -> PromptTemplate:
        return load_template(template_id, directory=self.templates_directory)

    async def complete(self, template_id: Union[TemplateId, str], bindings: dict[str, str]) -> Any:
        """Send a rendered template to the judge and return its answer parsed with the template's output model.

        Raises:
            MissingBindingError: a placeholder of the template has no binding
            JudgeSchemaError: the answer didn't follow the schema, even after a reformat request
            ReplayMissError: replay mode and nothing was recorded for this request
            JudgeError: transport failure after the last attempt
        """
        template = self.template(template_id)
        prompt = template.render(bindings)
        messages = build_messages(prompt)

        raw = await self.dispatch(self._build_request(template, bindings, messages, attempt="initial"))
        try:
            return self._parse(template, raw)
        except JudgeSchemaError as exc:
            self.log.warning(
                f"Answer of the judge for {template.template_id.value} doesn't follow the schema, asking to reformat"
            )
            messages = messages + [
                {"role": "assistant", "content": raw},
                {"role": "user", "content": render_reformat(template, raw=raw, errors=str(exc.errors))},
            ]

        raw = await self.dispatch(self._build_request(template, bindings, messages, attempt="reformat"))
        return self._parse(template, raw)

    async def dispatch(self, request: JudgeRequest) -> str:
        async with self.semaphore:
            raw = await self._send(request)

        self.recorder.record(request, raw)
        return raw

    def _build_request(
        self, template: PromptTemplate, bindings: dict[str, str], messages: list[dict[str, str]], attempt: str
    ) -> JudgeRequest:
        return JudgeRequest(
            template_id=template.template_id.value,
            bindings=bindings,
            messages=messages,
            model=self.config.model,
            temperature=self.config.temperature,
            max_tokens=self.config.max_tokens,
            attempt=attempt,
        )

    @staticmethod
    def _parse(template: PromptTemplate, raw: str) -> JudgeOutput:
        try:
            data = extract_json_object(raw)
        except ValueError as exc:
            raise JudgeSchemaError(template_id=template.template_id.value, raw=raw, errors=[str(exc)]) from exc

        try:
            return template.output_model.model_validate(data)
        except pydantic.ValidationError as exc:
            errors = [f"{'.'.join(str(loc) for loc in error['loc'])}: {error['msg']}" for error in exc.errors()]
            raise JudgeSchemaError(template_id=template.template_id.value, raw=raw, errors=errors) from exc

    async def _send(self, request: JudgeRequest) -> str:
        raw = ""
        async for attempt in AsyncRetrying(
            stop=stop_after_attempt(self.config.max_attempts),
            wait=wait_exponential(multiplier=self.config.retry_delay, max=MAX_BACKOFF),
            retry=retry_if_exception(is_transient),
            before_sleep=self._log_retry,
            reraise=True,
        ):
            with attempt:
                self.request_count += 1
                raw = await self._backend(request)
        return raw

    def _log_retry(self, retry_state: RetryCallState) -> None:
        exc = retry_state.outcome.exception() if retry_state.outcome else None
        delay = retry_state.next_action.sleep if retry_state.next_action else 0
        self.log.warning(
            f"{exc}, attempt {retry_state.attempt_number}/{self.config.max_attempts},"
            f" will retry in {delay:.1f} seconds .."
        )

    async def _http_request(self, request: JudgeRequest) -> str:
        url = f"{self.config.endpoint}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"

        async with httpx.AsyncClient() as client:
            try:
                response = await client.post(
                    url=url, json=request.to_payload(), headers=headers, timeout=self.config.timeout
                )
            except httpx.ReadTimeout as exc:
                raise JudgeNotResponsiveError(url=url, timeout=self.config.timeout) from exc
            except (httpx.NetworkError, httpx.TimeoutException) as exc:
                raise JudgeNotReachableError(endpoint=self.config.endpoint) from exc

        if response.status_code == 429:
            raise JudgeThrottledError(url=url)
        if response.status_code >= 400:
            raise JudgeServerError(url=url, status_code=response.status_code)

        data = decode_json(response=response)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise JudgeError(f"Unexpected completion layout from '{url}': {response.text[:200]}") from exc
