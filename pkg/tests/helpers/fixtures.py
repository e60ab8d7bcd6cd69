from pathlib import Path

import ujson


def get_fixtures_dir() -> Path:
    """Get the directory which stores fixtures that are common to multiple unit/integration tests."""
    here = Path(__file__).parent.resolve()
    return here.parent / "fixtures"


def read_fixture(file_name: str, fixture_subdir: str = ".") -> str:
    return (get_fixtures_dir() / fixture_subdir / file_name).read_text(encoding="utf-8")


def load_judge_fixture(name: str) -> dict:
    """Canned judge exchanges stored in tests/fixtures/judge."""
    return ujson.loads(read_fixture(f"{name}.json", "judge"))
