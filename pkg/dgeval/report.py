from __future__ import annotations

from collections import Counter, defaultdict
from pathlib import Path
from statistics import fmean
from typing import Optional, Sequence, Union

import jinja2
import pyarrow as pa
from pyarrow import csv
from pydantic import BaseModel, Field

from .alignment import ContradictionSummary, contradiction_report
from .constants import INSUFFICIENT_CELL, JudgeMode, RecordStatus, ReportFormat, SpecificityClass
from .cost import CostBlock
from .exceptions import UnknownReportFormatError
from .models import EvalRecord, Query, f1
from .prompts import TEMPLATE_DIRECTORY
from .statistics import ModelComparison, PreferenceSummary
from .utils import format_percent, format_score, write_to_file

MARKDOWN_TEMPLATE = "report.md.j2"
CSV_COLUMNS = ("section", "model", "crop", "topic", "metric", "value", "count")


class Aggregate(BaseModel):
    value: Optional[float] = None
    count: int = 0


class ModelSummary(BaseModel):
    model: str
    records: int
    recall: Aggregate
    precision: Aggregate
    f1: Aggregate
    relevance: Aggregate = Field(description="Mean of the per-query relevance percentages, as a fraction")
    conversationality: Aggregate
    specific: Aggregate = Field(description="Share of responses classified as specific")
    degenerate: int = 0
    statuses: dict[str, int] = Field(default_factory=dict)


class MatrixCell(BaseModel):
    row: str
    column: str
    value: Optional[float] = None
    count: int = 0


class StratumMatrix(BaseModel):
    """F1 per crop and topic, cells below the strata minimum carry no value.

    Row and column averages pool the records of the whole row or column, they are not means of the cells.
    """

    model: str
    minimum: int
    rows: list[str] = Field(default_factory=list)
    columns: list[str] = Field(default_factory=list)
    cells: list[MatrixCell] = Field(default_factory=list)
    row_averages: dict[str, Aggregate] = Field(default_factory=dict)
    column_averages: dict[str, Aggregate] = Field(default_factory=dict)
    overall: Aggregate = Field(default_factory=Aggregate)

    def cell(self, row: str, column: str) -> MatrixCell:
        for cell in self.cells:
            if cell.row == row and cell.column == column:
                return cell
        return MatrixCell(row=row, column=column)

    @property
    def insufficient(self) -> list[MatrixCell]:
        cells = [self.cell(row, column) for row in self.rows for column in self.columns]
        return [cell for cell in cells if cell.value is None]


class ReportProvenance(BaseModel):
    judge_model: str
    mode: JudgeMode
    temperature: float
    fixtures_hash: Optional[str] = None
    match_threshold: float
    strata_minimum: int


class Report(BaseModel):
    provenance: ReportProvenance
    models: list[ModelSummary] = Field(default_factory=list)
    matrices: list[StratumMatrix] = Field(default_factory=list)
    contradictions: dict[str, ContradictionSummary] = Field(default_factory=dict)
    comparisons: list[ModelComparison] = Field(default_factory=list)
    preferences: list[PreferenceSummary] = Field(default_factory=list)
    cost: Optional[CostBlock] = None
    warnings: list[str] = Field(default_factory=list)

    def summary(self, model: str) -> ModelSummary:
        for summary in self.models:
            if summary.model == model:
                return summary
        raise KeyError(model)

    def matrix(self, model: str) -> StratumMatrix:
        for matrix in self.matrices:
            if matrix.model == model:
                return matrix
        raise KeyError(model)


def _mean(values: Sequence[float]) -> Aggregate:
    return Aggregate(value=fmean(values) if values else None, count=len(values))


def aggregate_alignment(records: Sequence[EvalRecord]) -> tuple[Aggregate, Aggregate, Aggregate]:
    """Mean recall and precision, and the F1 of those means."""
    alignments = [record.alignment for record in records if record.alignment is not None]
    recall = _mean([alignment.recall for alignment in alignments])
    precision = _mean([alignment.precision for alignment in alignments])
    if recall.value is None or precision.value is None:
        return recall, precision, Aggregate()
    return recall, precision, Aggregate(value=f1(recall.value, precision.value), count=recall.count)


def summarize_model(model: str, records: Sequence[EvalRecord]) -> ModelSummary:
    recall, precision, f1_score = aggregate_alignment(records)
    relevance = [record.relevance.percentage / 100 for record in records if record.relevance]
    conversationality = [record.conversationality.overall for record in records if record.conversationality]
    specific = [
        float(record.specificity.classification == SpecificityClass.SPECIFIC)
        for record in records
        if record.specificity
    ]
    statuses = {status.value: 0 for status in RecordStatus}
    statuses.update(Counter(record.status.value for record in records))

    return ModelSummary(
        model=model,
        records=len(records),
        recall=recall,
        precision=precision,
        f1=f1_score,
        relevance=_mean(relevance),
        conversationality=_mean(conversationality),
        specific=_mean(specific),
        degenerate=sum(1 for record in records if record.alignment and record.alignment.degenerate),
        statuses=statuses,
    )


def _f1_cell(records: Sequence[EvalRecord], minimum: int) -> Aggregate:
    _, _, f1_score = aggregate_alignment(records)
    if f1_score.count < minimum:
        return Aggregate(count=f1_score.count)
    return f1_score


def build_matrix(model: str, records: Sequence[EvalRecord], queries: dict[str, Query], minimum: int) -> StratumMatrix:
    rows = sorted({query.crop for query in queries.values()})
    columns = sorted({query.topic for query in queries.values()})

    by_cell: dict[tuple[str, str], list[EvalRecord]] = defaultdict(list)
    for record in records:
        query = queries.get(record.query_id)
        if query is not None:
            by_cell[(query.crop, query.topic)].append(record)

    cells = []
    for row in rows:
        for column in columns:
            aggregate = _f1_cell(by_cell[(row, column)], minimum)
            cells.append(MatrixCell(row=row, column=column, value=aggregate.value, count=aggregate.count))

    return StratumMatrix(
        model=model,
        minimum=minimum,
        rows=rows,
        columns=columns,
        cells=cells,
        row_averages={
            row: _f1_cell([item for column in columns for item in by_cell[(row, column)]], minimum) for row in rows
        },
        column_averages={
            column: _f1_cell([item for row in rows for item in by_cell[(row, column)]], minimum) for column in columns
        },
        overall=_f1_cell([item for items in by_cell.values() for item in items], minimum),
    )


def report_warnings(provenance: ReportProvenance, summaries: Sequence[ModelSummary]) -> list[str]:
    warnings = []
    if provenance.temperature != 0:
        warnings.append(
            f"Judge temperature is {provenance.temperature}, judge-based scores are not reproducible between runs."
        )
    for summary in summaries:
        if summary.model == provenance.judge_model:
            warnings.append(
                f"{summary.model} is both the evaluated model and the judge, judge-based scores may favour it. "
                "Recall, precision and F1 are computed against golden facts and are not affected."
            )
        for status in (RecordStatus.PARTIAL, RecordStatus.UNEVALUATED, RecordStatus.EXCLUDED):
            if summary.statuses.get(status.value):
                warnings.append(f"{summary.model}: {summary.statuses[status.value]} record(s) {status.value}.")
    return warnings


def build_report(
    records: Sequence[EvalRecord],
    queries: Sequence[Query],
    provenance: ReportProvenance,
    comparisons: Sequence[ModelComparison] = (),
    preferences: Sequence[PreferenceSummary] = (),
    cost: Optional[CostBlock] = None,
) -> Report:
    """Aggregate evaluation records into a report.

    Records are grouped by model and sorted by query id first, the input order never matters.
    """
    by_model: dict[str, list[EvalRecord]] = defaultdict(list)
    for record in sorted(records, key=lambda item: (item.model, item.query_id)):
        by_model[record.model].append(record)
    query_index = {query.id: query for query in queries}

    summaries = [summarize_model(model, by_model[model]) for model in sorted(by_model)]
    return Report(
        provenance=provenance,
        models=summaries,
        matrices=[
            build_matrix(model, by_model[model], query_index, provenance.strata_minimum) for model in sorted(by_model)
        ],
        contradictions={model: contradiction_report(by_model[model]) for model in sorted(by_model)},
        comparisons=list(comparisons),
        preferences=list(preferences),
        cost=cost,
        warnings=report_warnings(provenance, summaries),
    )


def _environment() -> jinja2.Environment:
    environment = jinja2.Environment(
        loader=jinja2.FileSystemLoader(TEMPLATE_DIRECTORY),
        undefined=jinja2.StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )
    environment.filters["percent"] = lambda value: format_percent(value, placeholder=INSUFFICIENT_CELL)
    environment.filters["score"] = lambda value: format_score(value, placeholder=INSUFFICIENT_CELL)
    environment.filters["pvalue"] = lambda value: "< 0.001" if value < 0.001 else f"{value:.3f}"
    return environment


def render_markdown(report: Report) -> str:
    return _environment().get_template(MARKDOWN_TEMPLATE).render(report=report)


def _csv_rows(report: Report) -> list[dict[str, str]]:
    rows = []
    for summary in report.models:
        for metric in ("recall", "precision", "f1", "relevance", "specific"):
            aggregate: Aggregate = getattr(summary, metric)
            rows.append(
                {
                    "section": "benchmark",
                    "model": summary.model,
                    "crop": "",
                    "topic": "",
                    "metric": metric,
                    "value": format_percent(aggregate.value, placeholder=INSUFFICIENT_CELL),
                    "count": str(aggregate.count),
                }
            )
        rows.append(
            {
                "section": "benchmark",
                "model": summary.model,
                "crop": "",
                "topic": "",
                "metric": "conversationality",
                "value": format_score(summary.conversationality.value, placeholder=INSUFFICIENT_CELL),
                "count": str(summary.conversationality.count),
            }
        )

    for matrix in report.matrices:
        for cell in matrix.cells:
            rows.append(
                {
                    "section": "strata",
                    "model": matrix.model,
                    "crop": cell.row,
                    "topic": cell.column,
                    "metric": "f1",
                    "value": format_percent(cell.value, placeholder=INSUFFICIENT_CELL),
                    "count": str(cell.count),
                }
            )

    for model, summary in report.contradictions.items():
        rows.append(
            {
                "section": "contradictions",
                "model": model,
                "crop": "",
                "topic": "",
                "metric": "per_response_rate",
                "value": format_percent(summary.per_response_rate),
                "count": str(summary.responses),
            }
        )
    return rows


def render_csv(report: Report) -> str:
    rows = _csv_rows(report)
    table = pa.table({column: pa.array([row[column] for row in rows], type=pa.string()) for column in CSV_COLUMNS})
    sink = pa.BufferOutputStream()
    csv.write_csv(table, sink)
    return sink.getvalue().to_pybytes().decode("utf-8")


def render_report(report: Report, report_format: Union[ReportFormat, str] = ReportFormat.MARKDOWN) -> str:
    try:
        report_format = ReportFormat(report_format)
    except ValueError as exc:
        raise UnknownReportFormatError(name=str(report_format)) from exc

    if report_format == ReportFormat.CSV:
        return render_csv(report)
    if report_format == ReportFormat.JSON:
        return report.model_dump_json(indent=4) + "\n"
    return render_markdown(report)


def write_report(report: Report, path: Path, report_format: Union[ReportFormat, str] = ReportFormat.MARKDOWN) -> Path:
    write_to_file(path, render_report(report, report_format))
    return path
