from __future__ import annotations

import hashlib
import json
import re
from decimal import ROUND_HALF_UP, Decimal
from itertools import groupby
from pathlib import Path
from typing import Any, Optional, Union

import httpx
import ujson

from .exceptions import JudgeSchemaError

JSON_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)\n\s*```", re.DOTALL)


def duplicates(input_list: list) -> list:
    """Identify and return all the duplicates in a list."""

    dups = []

    clean_input_list = [item for item in input_list or [] if item is not None]
    for x, y in groupby(sorted(clean_input_list)):
        #  list(y) returns all the occurences of item x
        if len(list(y)) > 1:
            dups.append(x)

    return dups


def canonical_json(data: Any) -> str:
    return ujson.dumps(data, sort_keys=True, ensure_ascii=False, escape_forward_slashes=False)


def content_hash(data: Any) -> str:
    """SHA-256 of the canonical JSON form of a value.

    Keys are sorted so {'a': 1, 'b': 2} hashes like {'b': 2, 'a': 1}.
    """
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def directory_hash(directory: Union[str, Path]) -> Optional[str]:
    """Hash of every file below a directory, by relative path and content."""
    directory = Path(directory)
    if not directory.is_dir():
        return None

    digest = hashlib.sha256()
    for path in sorted(item for item in directory.rglob("*") if item.is_file()):
        digest.update(str(path.relative_to(directory)).encode("utf-8"))
        digest.update(path.read_bytes())
    return digest.hexdigest()


def decode_json(response: httpx.Response) -> dict:
    try:
        return response.json()
    except json.decoder.JSONDecodeError as exc:
        raise JudgeSchemaError(template_id="transport", raw=response.text, errors=[str(exc)]) from exc


def extract_json_object(text: str) -> Any:
    """Extract the JSON object of an LLM answer that may be wrapped in markdown fences or prose."""
    fence_match = JSON_FENCE.search(text)
    if fence_match:
        text = fence_match.group(1)

    try:
        return ujson.loads(text)
    except ValueError:
        pass

    start = text.find("{")
    end = text.rfind("}")
    if start == -1 or end <= start:
        raise ValueError("no JSON object found")
    return ujson.loads(text[start : end + 1])


def round_half_up(value: float, digits: int) -> Decimal:
    quantum = Decimal(1).scaleb(-digits)
    return Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP)


def format_percent(value: Optional[float], placeholder: str = "---") -> str:
    """Format a fraction in [0, 1] as a percentage with one decimal."""
    if value is None:
        return placeholder
    return f"{round_half_up(value * 100, 1)}"


def format_score(value: Optional[float], placeholder: str = "---") -> str:
    if value is None:
        return placeholder
    return f"{round_half_up(value, 2)}"


def write_to_file(path: Path, value: Any) -> bool:
    """Write a given value into a file and return if the operation was successful.

    Missing parent directories are created."""
    if path.is_dir():
        raise FileExistsError(f"{path} is a directory")

    path.parent.mkdir(parents=True, exist_ok=True)
    written = path.write_text(str(value), encoding="utf-8")

    return written is not None


def read_lines(path: Path) -> list[tuple[int, str]]:
    """Return the non-empty lines of a line-delimited file with their 1-based line numbers."""
    lines = path.read_text(encoding="utf-8").splitlines()
    return [(index, line) for index, line in enumerate(lines, start=1) if line.strip()]


def dump_lines(records: list[dict[str, Any]]) -> str:
    return "".join(canonical_json(record) + "\n" for record in records)


def is_valid_url(url: str) -> bool:
    if not isinstance(url, str) or "://" not in url:
        return False

    try:
        parsed = httpx.URL(url)
        return all([parsed.scheme, parsed.netloc])
    except (TypeError, httpx.InvalidURL):
        return False


def generate_fixture_filename(template_id: str, key: str) -> str:
    """Return the path of a recorded judge exchange, relative to the fixtures directory.

    The key is a content hash of the request so two requests only share a file when the
    template, the bindings and the sampling parameters are identical.
    """
    return f"{template_id}/{key}.json"
