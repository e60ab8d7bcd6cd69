from __future__ import annotations

import importlib.metadata

from .config import EvaluationConfig, JudgeConfig
from .judge import JudgeClient

__all__ = [
    "EvaluationConfig",
    "JudgeClient",
    "JudgeConfig",
]

try:
    __version__ = importlib.metadata.version("dg-eval")
except importlib.metadata.PackageNotFoundError:
    __version__ = "0.0.0"
