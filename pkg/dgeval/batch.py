import asyncio
from dataclasses import dataclass
from typing import Any, AsyncGenerator, Awaitable, Callable, Optional


@dataclass
class BatchTask:
    task: Callable[..., Awaitable[Any]]
    args: tuple[Any, ...]
    kwargs: dict[str, Any]
    key: Optional[str] = None


async def execute_batch_task_in_pool(
    task: BatchTask, semaphore: asyncio.Semaphore, return_exceptions: bool = False
) -> tuple[Optional[str], Any]:
    async with semaphore:
        try:
            result = await task.task(*task.args, **task.kwargs)

        except Exception as exc:  # pylint: disable=broad-exception-caught
            if return_exceptions:
                return (task.key, exc)
            raise exc

        return (task.key, result)


class JudgeBatch:
    """Run per-record tasks concurrently and yield (key, result) pairs as they complete.

    Completion order is arbitrary, callers join results to their records through the key.
    """

    def __init__(
        self,
        semaphore: Optional[asyncio.Semaphore] = None,
        max_concurrent_execution: int = 5,
        return_exceptions: bool = False,
    ):
        self._tasks: list[BatchTask] = []
        self.semaphore = semaphore or asyncio.Semaphore(value=max_concurrent_execution)
        self.return_exceptions = return_exceptions

    @property
    def num_tasks(self) -> int:
        return len(self._tasks)

    def add(self, *args: Any, task: Callable[..., Awaitable[Any]], key: Optional[str] = None, **kwargs: Any) -> None:
        self._tasks.append(BatchTask(task=task, key=key, args=args, kwargs=kwargs))

    async def execute(self) -> AsyncGenerator[tuple[Optional[str], Any], None]:
        tasks = [
            asyncio.create_task(
                execute_batch_task_in_pool(
                    task=batch_task, semaphore=self.semaphore, return_exceptions=self.return_exceptions
                )
            )
            for batch_task in self._tasks
        ]

        try:
            for completed_task in asyncio.as_completed(tasks):
                key, result = await completed_task
                yield key, result
        finally:
            for pending in tasks:
                if not pending.done():
                    pending.cancel()
