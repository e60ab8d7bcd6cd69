import asyncio

import pytest

from dgeval.batch import JudgeBatch
from dgeval.exceptions import JudgeThrottledError


async def double(value: int, delay: float = 0.0) -> int:
    await asyncio.sleep(delay)
    return value * 2


async def throttled() -> int:
    raise JudgeThrottledError(url="http://judge.example/v1/chat/completions")


async def test_batch_yields_results_with_their_key():
    batch = JudgeBatch()
    for value in range(5):
        batch.add(value, task=double, key=f"q{value}", delay=(5 - value) / 1000)

    assert batch.num_tasks == 5
    results = {key: result async for key, result in batch.execute()}

    assert results == {f"q{value}": value * 2 for value in range(5)}


async def test_batch_return_exceptions():
    batch = JudgeBatch(return_exceptions=True)
    batch.add(1, task=double, key="ok")
    batch.add(task=throttled, key="failed")

    results = {key: result async for key, result in batch.execute()}

    assert results["ok"] == 2
    assert isinstance(results["failed"], JudgeThrottledError)


async def test_batch_raises_by_default():
    batch = JudgeBatch()
    batch.add(task=throttled, key="failed")

    with pytest.raises(JudgeThrottledError):
        async for _ in batch.execute():
            pass


async def test_batch_bounds_concurrency():
    in_flight = 0
    peak = 0

    async def tracked(value: int) -> int:
        nonlocal in_flight, peak
        in_flight += 1
        peak = max(peak, in_flight)
        await asyncio.sleep(0.01)
        in_flight -= 1
        return value

    batch = JudgeBatch(max_concurrent_execution=3)
    for value in range(10):
        batch.add(value, task=tracked, key=str(value))

    results = sorted([result async for _, result in batch.execute()])

    assert results == list(range(10))
    assert peak == 3


async def test_closing_the_batch_cancels_pending_tasks():
    started = []

    async def slow(value: int) -> int:
        started.append(value)
        await asyncio.sleep(0 if value == 0 else 10)
        return value

    batch = JudgeBatch(max_concurrent_execution=4)
    for value in range(4):
        batch.add(value, task=slow, key=str(value))

    results = batch.execute()
    key, _ = await results.__anext__()
    await results.aclose()

    assert key == "0"
    assert sorted(started) == [0, 1, 2, 3]
