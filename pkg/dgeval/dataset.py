from __future__ import annotations

from pathlib import Path
from typing import Any, Optional, TypeVar

import ujson
from pydantic import BaseModel, Field, ValidationError, model_validator
from typing_extensions import Self

from .exceptions import DanglingReferenceError, DatasetValidationError, DuplicateRecordError
from .models import AtomicFact, DGEvalModel, Query
from .utils import duplicates, read_lines

RecordType = TypeVar("RecordType", bound=BaseModel)


class GoldenAnswer(DGEvalModel):
    query_id: str = Field(..., min_length=1)
    answer: str = Field(..., min_length=1)


class ModelOutput(DGEvalModel):
    """Output of one model for one query, either a free-text response or already extracted facts."""

    model: str = Field(..., min_length=1)
    query_id: str = Field(..., min_length=1)
    response: str = ""
    facts: Optional[list[AtomicFact]] = None

    @property
    def key(self) -> str:
        return f"{self.model}/{self.query_id}"


class Dataset(DGEvalModel):
    queries: list[Query] = Field(default_factory=list)
    golden_facts: list[AtomicFact] = Field(default_factory=list)
    golden_answers: list[GoldenAnswer] = Field(default_factory=list)
    outputs: list[ModelOutput] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_references(self) -> Self:
        query_dups = duplicates([query.id for query in self.queries])
        if query_dups:
            raise DuplicateRecordError(identifier="queries", duplicates=query_dups)
        fact_dups = duplicates([fact.id for fact in self.golden_facts])
        if fact_dups:
            raise DuplicateRecordError(identifier="golden facts", duplicates=fact_dups)
        output_dups = duplicates([output.key for output in self.outputs])
        if output_dups:
            raise DuplicateRecordError(identifier="model outputs", duplicates=output_dups)

        known = {query.id for query in self.queries}
        for identifier, references in (
            ("golden facts", [fact.query_id or "" for fact in self.golden_facts]),
            ("golden answers", [answer.query_id for answer in self.golden_answers]),
            ("model outputs", [output.query_id for output in self.outputs]),
        ):
            dangling = sorted({reference for reference in references if reference not in known})
            if dangling:
                raise DanglingReferenceError(identifier=identifier, references=dangling)
        return self

    @property
    def models(self) -> list[str]:
        return sorted({output.model for output in self.outputs})

    def query(self, query_id: str) -> Query:
        for query in self.queries:
            if query.id == query_id:
                return query
        raise KeyError(query_id)

    def golden_for(self, query_id: str) -> list[AtomicFact]:
        return sorted((fact for fact in self.golden_facts if fact.query_id == query_id), key=lambda fact: fact.id)

    def outputs_for(self, model: str) -> dict[str, ModelOutput]:
        return {output.query_id: output for output in self.outputs if output.model == model}


def _format_error(error: dict[str, Any]) -> str:
    location = ".".join(str(item) for item in error["loc"]) or "record"
    return f"{location}: {error['msg']}"


def load_records(path: Path, record_type: type[RecordType]) -> list[RecordType]:
    """Read a JSON-lines file into validated records.

    Every invalid line is reported, with its line number, in a single DatasetValidationError.
    """
    if not path.is_file():
        raise DatasetValidationError(identifier=str(path), problems=["file not found"])

    records: list[RecordType] = []
    problems: list[str] = []
    for lineno, line in read_lines(path):
        try:
            data = ujson.loads(line)
        except ValueError as exc:
            problems.append(f"line {lineno}: invalid JSON ({exc})")
            continue
        if not isinstance(data, dict):
            problems.append(f"line {lineno}: expected a JSON object")
            continue
        try:
            records.append(record_type(**data))
        except ValidationError as exc:
            problems.extend(f"line {lineno}: {_format_error(error)}" for error in exc.errors())

    if problems:
        raise DatasetValidationError(identifier=str(path), problems=problems)
    return records


def load_dataset(
    queries: Path,
    golden_facts: Optional[Path] = None,
    outputs: Optional[Path] = None,
    golden_answers: Optional[Path] = None,
) -> Dataset:
    facts = load_records(golden_facts, AtomicFact) if golden_facts else []
    missing = [fact.id for fact in facts if not fact.query_id]
    if missing:
        raise DatasetValidationError(
            identifier=str(golden_facts), problems=[f"{fact_id}: query_id is required" for fact_id in missing]
        )

    return Dataset(
        queries=load_records(queries, Query),
        golden_facts=facts,
        golden_answers=load_records(golden_answers, GoldenAnswer) if golden_answers else [],
        outputs=load_records(outputs, ModelOutput) if outputs else [],
    )
