from __future__ import annotations

import asyncio
from typing import TYPE_CHECKING

import httpx
import pydantic
import pytest
import ujson

from dgeval.config import JudgeConfig
from dgeval.constants import JudgeMode, TemplateId
from dgeval.exceptions import (
    JudgeNotResponsiveError,
    JudgeSchemaError,
    JudgeServerError,
    JudgeThrottledError,
    ReplayMissError,
)
from dgeval.judge import JudgeClient, is_transient
from dgeval.prompts import FactGenerationOutput
from tests.helpers.judge import SimulatedJudge, make_judge

if TYPE_CHECKING:
    from pytest_httpx import HTTPXMock

ENDPOINT = "http://judge.example/v1"
COMPLETIONS_URL = f"{ENDPOINT}/chat/completions"
ANSWER = {"answer": "Sow wheat in November. Apply 60 kg/ha urea at crown root initiation."}


def completion(content: dict) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": ujson.dumps(content)}}]}


@pytest.fixture
def http_judge() -> JudgeClient:
    return JudgeClient(config=JudgeConfig(endpoint=ENDPOINT, api_key="secret", retry_delay=0, max_attempts=3))


async def test_http_judge_retries_throttled_requests(httpx_mock: HTTPXMock, http_judge: JudgeClient):
    httpx_mock.add_response(method="POST", url=COMPLETIONS_URL, status_code=429)
    httpx_mock.add_response(
        method="POST", url=COMPLETIONS_URL, json=completion({"facts": [{"text": "Sow wheat in November."}]})
    )

    output = await http_judge.complete(TemplateId.FACT_GENERATION, ANSWER)

    assert isinstance(output, FactGenerationOutput)
    assert [fact.text for fact in output.facts] == ["Sow wheat in November."]
    assert http_judge.request_count == 2

    request = httpx_mock.get_requests()[-1]
    assert request.headers["Authorization"] == "Bearer secret"
    payload = ujson.loads(request.content)
    assert payload["temperature"] == 0.0
    assert payload["model"] == "gpt-4o"
    assert payload["messages"][0]["role"] == "system"


async def test_http_judge_gives_up_after_max_attempts(httpx_mock: HTTPXMock, http_judge: JudgeClient):
    for _ in range(3):
        httpx_mock.add_response(method="POST", url=COMPLETIONS_URL, status_code=503)

    with pytest.raises(JudgeServerError) as exc:
        await http_judge.complete(TemplateId.FACT_GENERATION, ANSWER)

    assert exc.value.status_code == 503
    assert http_judge.request_count == 3


async def test_http_judge_client_errors_are_not_retried(httpx_mock: HTTPXMock, http_judge: JudgeClient):
    httpx_mock.add_response(method="POST", url=COMPLETIONS_URL, status_code=401)

    with pytest.raises(JudgeServerError):
        await http_judge.complete(TemplateId.FACT_GENERATION, ANSWER)

    assert http_judge.request_count == 1


async def test_http_judge_timeout(httpx_mock: HTTPXMock):
    judge = JudgeClient(config=JudgeConfig(endpoint=ENDPOINT, retry_delay=0, max_attempts=2, timeout=5))
    for _ in range(2):
        httpx_mock.add_exception(httpx.ReadTimeout("timed out"))

    with pytest.raises(JudgeNotResponsiveError) as exc:
        await judge.complete(TemplateId.FACT_GENERATION, ANSWER)

    assert exc.value.message.endswith("(timeout: 5 sec)")
    assert "Authorization" not in httpx_mock.get_requests()[0].headers


@pytest.mark.parametrize(
    "exc,expected",
    [
        (JudgeThrottledError(url=COMPLETIONS_URL), True),
        (JudgeServerError(url=COMPLETIONS_URL, status_code=502), True),
        (JudgeServerError(url=COMPLETIONS_URL, status_code=400), False),
        (JudgeSchemaError(template_id="fact_generation", raw=""), False),
        (ReplayMissError(key="abc", template_id="fact_generation"), False),
    ],
)
def test_is_transient(exc, expected):
    assert is_transient(exc) is expected


async def test_reformat_request_after_schema_violation():
    backend = SimulatedJudge(
        overrides={"fact_generation": ["Sure! Here are the facts.", {"facts": [{"text": "Sow in June."}]}]}
    )
    judge = make_judge(backend)

    output = await judge.complete(TemplateId.FACT_GENERATION, ANSWER)

    assert [fact.text for fact in output.facts] == ["Sow in June."]
    first, second = backend.requests
    assert first.attempt == "initial"
    assert second.attempt == "reformat"
    assert len(second.messages) == 4
    assert second.messages[2]["content"] == "Sure! Here are the facts."


async def test_schema_error_after_failed_reformat():
    backend = SimulatedJudge(overrides={"relevance": '{"direct_relevance": 14}'})
    judge = make_judge(backend)

    with pytest.raises(JudgeSchemaError) as exc:
        await judge.complete(TemplateId.RELEVANCE, {"query": "q", "response": "r", "golden_facts": "g"})

    assert exc.value.template_id == "relevance"
    assert len(backend.requests) == 2


async def test_answer_wrapped_in_markdown_fence():
    backend = SimulatedJudge(overrides={"fact_generation": '```json\n{"facts": [{"text": "Sow in June."}]}\n```'})

    output = await make_judge(backend).complete(TemplateId.FACT_GENERATION, ANSWER)

    assert output.facts[0].text == "Sow in June."


async def test_record_then_replay(tmp_path):
    backend = SimulatedJudge()
    recording = make_judge(backend, mode=JudgeMode.RECORD, fixtures_directory=tmp_path)
    recorded = await recording.complete(TemplateId.FACT_GENERATION, ANSWER)

    files = list((tmp_path / "fact_generation").glob("*.json"))
    assert len(files) == 1
    stored = ujson.loads(files[0].read_text(encoding="utf-8"))
    assert stored["request"]["params"]["temperature"] == 0.0

    replaying = JudgeClient(config=JudgeConfig(mode=JudgeMode.REPLAY, fixtures_directory=tmp_path))
    replayed = await replaying.complete(TemplateId.FACT_GENERATION, ANSWER)

    assert replayed == recorded
    assert len(backend.requests) == 1
    assert replaying.fixtures_hash == recording.fixtures_hash
    assert replaying.fixtures_hash is not None


async def test_replay_miss(tmp_path):
    judge = JudgeClient(config=JudgeConfig(mode=JudgeMode.REPLAY, fixtures_directory=tmp_path))

    with pytest.raises(ReplayMissError) as exc:
        await judge.complete(TemplateId.FACT_GENERATION, ANSWER)

    assert exc.value.template_id == "fact_generation"


async def test_replay_key_depends_on_bindings(tmp_path):
    recording = make_judge(SimulatedJudge(), mode=JudgeMode.RECORD, fixtures_directory=tmp_path)
    await recording.complete(TemplateId.FACT_GENERATION, ANSWER)

    replaying = JudgeClient(config=JudgeConfig(mode=JudgeMode.REPLAY, fixtures_directory=tmp_path))
    with pytest.raises(ReplayMissError):
        await replaying.complete(TemplateId.FACT_GENERATION, {"answer": "Sow wheat in December."})


async def test_concurrency_is_bounded():
    in_flight = 0
    peak = 0

    async def slow_backend(request):
        nonlocal in_flight, peak
        in_flight += 1
        peak = max(peak, in_flight)
        await asyncio.sleep(0.01)
        in_flight -= 1
        return ujson.dumps({"facts": []})

    judge = make_judge(slow_backend, max_concurrent_requests=2)

    await asyncio.gather(*[judge.complete(TemplateId.FACT_GENERATION, {"answer": str(idx)}) for idx in range(8)])

    assert peak == 2
    assert judge.request_count == 8


def test_live_judge_has_no_fixtures_hash():
    assert make_judge().fixtures_hash is None


def test_handle_describes_the_judge():
    handle = make_judge(model="gpt-4o-mini").handle
    assert handle.model == "gpt-4o-mini"
    assert handle.temperature == 0.0
    assert handle.mode == JudgeMode.LIVE


def test_api_key_comes_from_the_environment(monkeypatch):
    monkeypatch.setenv("DGEVAL_JUDGE_API_KEY", "from-env")
    config = JudgeConfig()
    assert config.api_key == "from-env"
    assert "from-env" not in repr(config)


def test_invalid_endpoint():
    with pytest.raises(pydantic.ValidationError):
        JudgeConfig(endpoint="not a url")
