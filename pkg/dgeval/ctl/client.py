import logging
from pathlib import Path
from typing import Optional

from ..constants import JudgeMode
from ..ctl import config
from ..judge import JudgeClient


def initialize_judge(
    mode: Optional[JudgeMode] = None,
    fixtures_directory: Optional[Path] = None,
    max_concurrent_requests: Optional[int] = None,
    timeout: Optional[int] = None,
) -> JudgeClient:
    """Judge client built from the active settings, command line flags take precedence."""
    judge_config = config.SETTINGS.active.judge.to_config(
        mode=mode,
        fixtures_directory=fixtures_directory,
        max_concurrent_requests=max_concurrent_requests,
        timeout=timeout,
        log=logging.getLogger("dgevalctl"),
    )
    return JudgeClient(config=judge_config)
