from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, ValidationError

from .alignment import compute_prf, find_contradictions, judge_contradictions, match_facts
from .batch import JudgeBatch
from .config import EvaluationConfig
from .constants import RecordStatus
from .dataset import Dataset, ModelOutput
from .exceptions import BatchInterruptedError, ExtractionError, JudgeError, UnknownModelError
from .extraction import extract_atomic_facts
from .judge import JudgeClient, is_transient
from .models import AtomicFact, ContradictionVerdict, EvalRecord, Query
from .normalize import with_components
from .report import Report, ReportProvenance, build_report
from .scoring import detect_anchors, score_conversationality, score_relevance
from .utils import read_lines


class EvaluationResult(BaseModel):
    model: str
    records: list[EvalRecord] = Field(default_factory=list)
    report: Report
    resumed: int = Field(default=0, description="Records read back from the checkpoint")


class Checkpoint:
    """Append-only JSON-lines file of finished records, owned by a single writer."""

    def __init__(self, path: Path, model: str):
        self.path = path
        self.model = model

    def load(self, judge: JudgeClient) -> dict[str, EvalRecord]:
        if not self.path.is_file():
            return {}

        records = {}
        for lineno, line in read_lines(self.path):
            try:
                record = EvalRecord.model_validate_json(line)
            except ValidationError:
                judge.log.warning(f"Ignoring unreadable line {lineno} of checkpoint {self.path}")
                continue
            if record.model == self.model:
                records[record.query_id] = record
        return records

    def append(self, record: EvalRecord) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(record.model_dump_json() + "\n")


def _response_text(output: ModelOutput) -> str:
    if output.response.strip():
        return output.response
    return " ".join(fact.text for fact in sorted(output.facts or [], key=lambda fact: fact.id))


async def _generated_facts(output: ModelOutput, judge: JudgeClient) -> list[AtomicFact]:
    if output.facts is not None:
        return await with_components(sorted(output.facts, key=lambda fact: fact.id), judge)
    prefix = f"{output.query_id}-f"
    return await extract_atomic_facts(output.response, judge, id_prefix=prefix, query_id=output.query_id)


async def _low_severity(
    golden: list[AtomicFact], generated: list[AtomicFact], decided: list[ContradictionVerdict], judge: JudgeClient
) -> list[ContradictionVerdict]:
    decided_pairs = {(verdict.golden_id, verdict.generated_id) for verdict in decided}
    results = await asyncio.gather(*[judge_contradictions(fact, generated, judge) for fact in golden])
    return [
        verdict
        for verdicts in results
        for verdict in verdicts
        if (verdict.golden_id, verdict.generated_id) not in decided_pairs
    ]


async def evaluate_query(
    query: Query, output: ModelOutput, golden: list[AtomicFact], judge: JudgeClient, config: EvaluationConfig
) -> EvalRecord:
    """Run every evaluation level on one model output.

    Failures of a single level are recorded as issues on a partial record. Transport failures
    that survived the retries are raised, the batch can't make progress without the judge.
    """
    record = {"query_id": query.id, "model": output.model}
    if not golden:
        return EvalRecord(**record, status=RecordStatus.EXCLUDED, issues=["no golden facts for this query"])

    golden = await with_components(golden, judge)
    issues: list[str] = []

    def degraded(step: str, exc: JudgeError) -> None:
        if is_transient(exc):
            raise exc
        issues.append(f"{step}: {exc.message}")
        judge.log.warning(f"{output.model}/{query.id}: {step} failed, {exc.message}")

    try:
        generated = await _generated_facts(output, judge)
    except ExtractionError as exc:
        if isinstance(exc.cause, JudgeError) and is_transient(exc.cause):
            raise exc.cause
        judge.log.warning(f"{output.model}/{query.id}: extraction failed, {exc.message}")
        return EvalRecord(**record, status=RecordStatus.UNEVALUATED, issues=[f"extraction: {exc.message}"])

    response = _response_text(output)
    specificity = relevance = conversationality = None
    if response.strip():
        try:
            specificity = await detect_anchors(response, query, judge)
        except JudgeError as exc:
            degraded("specificity", exc)
        try:
            relevance = await score_relevance(query, output.response or generated, golden, judge)
        except JudgeError as exc:
            degraded("relevance", exc)
        if output.response.strip():
            try:
                conversationality = await score_conversationality(query, output.response, judge)
            except JudgeError as exc:
                degraded("conversationality", exc)
    else:
        issues.append("empty response")

    match_set = await match_facts(golden, generated, judge, threshold=config.match_threshold)
    if match_set.partial:
        issues.append("matching: some golden facts could not be scored by the judge")

    contradictions = find_contradictions(golden, generated)
    if config.judge_low_severity and generated:
        try:
            contradictions += await _low_severity(golden, generated, contradictions, judge)
        except JudgeError as exc:
            degraded("low severity contradictions", exc)

    partial = bool(issues) and issues != ["empty response"]
    return EvalRecord(
        **record,
        status=RecordStatus.PARTIAL if partial else RecordStatus.EVALUATED,
        specificity=specificity,
        relevance=relevance,
        conversationality=conversationality,
        alignment=compute_prf(match_set, golden_size=len(golden), generated_size=len(generated)),
        match=match_set,
        contradictions=sorted(contradictions, key=lambda item: (item.golden_id, item.generated_id, item.rule_id)),
        generated_facts=len(generated),
        issues=issues,
    )


def report_provenance(judge: JudgeClient, config: EvaluationConfig) -> ReportProvenance:
    return ReportProvenance(
        judge_model=judge.config.model,
        mode=judge.config.mode,
        temperature=judge.config.temperature,
        fixtures_hash=judge.fixtures_hash,
        match_threshold=config.match_threshold,
        strata_minimum=config.strata_minimum,
    )


async def evaluate(
    dataset: Dataset, model_name: str, judge: JudgeClient, config: Optional[EvaluationConfig] = None
) -> EvaluationResult:
    """Evaluate every query of the dataset for one model and aggregate the records in a report.

    Queries without an output for the model are evaluated as empty responses. When a checkpoint
    path is configured, finished records are appended to it and records already present are
    not evaluated again.

    Raises:
        UnknownModelError: the dataset holds no output for the model
        BatchInterruptedError: the judge stayed unavailable after every retry
    """
    config = config or EvaluationConfig()
    if model_name not in dataset.models:
        raise UnknownModelError(name=model_name, known=dataset.models)

    outputs = dataset.outputs_for(model_name)
    checkpoint = Checkpoint(config.checkpoint_path, model_name) if config.checkpoint_path else None
    done = checkpoint.load(judge) if checkpoint else {}
    if done:
        judge.log.info(f"Resuming {model_name}: {len(done)} record(s) read from {config.checkpoint_path}")

    batch = JudgeBatch(max_concurrent_execution=judge.config.max_concurrent_requests, return_exceptions=True)
    for query in sorted(dataset.queries, key=lambda item: item.id):
        if query.id in done:
            continue
        output = outputs.get(query.id) or ModelOutput(model=model_name, query_id=query.id)
        batch.add(query, output, dataset.golden_for(query.id), judge, config, task=evaluate_query, key=query.id)

    records = dict(done)
    results = batch.execute()
    try:
        async for query_id, result in results:
            if isinstance(result, JudgeError) and is_transient(result):
                judge.log.error(f"Evaluation of {model_name} interrupted on query {query_id}: {result}")
                raise BatchInterruptedError(
                    checkpoint=str(config.checkpoint_path) if config.checkpoint_path else None,
                    completed=len(records),
                    cause=result,
                )
            if isinstance(result, BaseException):
                judge.log.error(f"Evaluation of {model_name} failed on query {query_id}: {result!r}")
                result = EvalRecord(
                    query_id=str(query_id),
                    model=model_name,
                    status=RecordStatus.UNEVALUATED,
                    issues=[f"{type(result).__name__}: {result}"],
                )
            records[result.query_id] = result
            if checkpoint:
                checkpoint.append(result)
    finally:
        await results.aclose()

    ordered = [records[query_id] for query_id in sorted(records)]
    report = build_report(ordered, dataset.queries, report_provenance(judge, config))
    return EvaluationResult(model=model_name, records=ordered, report=report, resumed=len(done))
