import pytest

from dgeval.ctl import config


@pytest.fixture(autouse=True)
def isolate_environment(monkeypatch):
    """No test may see a real credential or a configuration left by another test."""
    for variable in ("DGEVAL_JUDGE_API_KEY", "DGEVAL_JUDGE_MODE", "DGEVAL_JUDGE_ENDPOINT", "DGEVALCTL_CONFIG"):
        monkeypatch.delenv(variable, raising=False)
    config.SETTINGS.reset()
    yield
    config.SETTINGS.reset()
