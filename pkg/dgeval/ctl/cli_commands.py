import logging
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from .. import __version__ as dgeval_version
from ..async_typer import AsyncTyper
from ..constants import JudgeMode, ReportFormat
from ..cost import cost_estimate
from ..dataset import GoldenAnswer, load_dataset, load_records
from ..evaluation import evaluate as evaluate_model
from ..evaluation import report_provenance
from ..exceptions import DatasetValidationError, UnknownModelError
from ..extraction import build_golden_facts
from ..models import AtomicFact, EvalRecord
from ..report import Report, build_report, write_report
from ..split import SPLIT_NAMES, stratified_split
from ..statistics import Preference, compare_models, preference_summary
from ..stitching import stitch as stitch_facts
from ..stitching import verify_faithfulness
from ..utils import dump_lines, format_percent, format_score, write_to_file
from ..yaml import load_persona
from .client import initialize_judge
from .config import SETTINGS
from .parameters import CONFIG_PARAM
from .utils import catch_exception, init_logging

app = AsyncTyper(pretty_exceptions_show_locals=False)

console = Console()


def parse_ratios(value: str) -> tuple[float, float, float]:
    try:
        ratios = tuple(float(item) for item in value.split(","))
    except ValueError as exc:
        raise typer.BadParameter(f"'{value}' is not a comma separated list of numbers") from exc
    if len(ratios) != len(SPLIT_NAMES):
        raise typer.BadParameter(f"expected {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    return ratios  # type: ignore[return-value]


def print_report_summary(report: Report) -> None:
    table = Table(title="Benchmark")
    for column in ("Model", "Records", "Recall (%)", "Precision (%)", "F1 (%)", "Relevance (%)", "Conversationality"):
        table.add_column(column)
    for summary in report.models:
        table.add_row(
            summary.model,
            str(summary.records),
            format_percent(summary.recall.value),
            format_percent(summary.precision.value),
            format_percent(summary.f1.value),
            format_percent(summary.relevance.value),
            format_score(summary.conversationality.value),
        )
    console.print(table)
    for warning in report.warnings:
        console.print(f"[yellow]{warning}")


@app.command(name="extract")
@catch_exception(console=console)
async def extract(
    answers: Path = typer.Argument(..., help="JSON-lines file of golden answers (query_id, answer)"),
    out: Path = typer.Option(Path("golden_facts.jsonl"), help="Where to write the golden facts"),
    review_out: Optional[Path] = typer.Option(None, help="Where to write the contradictions to review"),
    corpus_wide: bool = typer.Option(False, help="Group equivalent facts across every answer"),
    quality: bool = typer.Option(False, help="Drop facts below the quality thresholds"),
    mode: Optional[JudgeMode] = typer.Option(None, help="Override the judge mode of the configuration"),
    debug: bool = False,
    _: str = CONFIG_PARAM,
) -> None:
    """Extract golden facts from golden answers."""
    init_logging(debug=debug)

    records = load_records(answers, GoldenAnswer)
    judge = initialize_judge(mode=mode)
    golden = await build_golden_facts(
        {record.query_id: record.answer for record in records},
        judge,
        corpus_wide=corpus_wide,
        quality=quality,
        thresholds=SETTINGS.active.evaluation.quality_thresholds,
    )

    write_to_file(out, dump_lines([fact.model_dump(mode="json") for fact in golden.facts]))
    if review_out:
        write_to_file(review_out, dump_lines([verdict.model_dump(mode="json") for verdict in golden.review_queue]))

    console.print(
        f"{len(golden.facts)} golden fact(s) from {golden.extracted} extracted fact(s) written to {out}, "
        f"{len(golden.excluded)} excluded, {len(golden.review_queue)} to review"
    )
    for query_id, failure in sorted(golden.failures.items()):
        console.print(f"[yellow]{query_id}: {failure}")


@app.command(name="split")
@catch_exception(console=console)
def split(
    queries: Path = typer.Argument(..., help="JSON-lines file of queries"),
    out_dir: Path = typer.Option(Path("splits"), help="Directory receiving one file per split"),
    golden_facts: Optional[Path] = typer.Option(None, help="Golden facts that follow their query into its split"),
    ratios: str = typer.Option(
        "0.8,0.1,0.1",
        help=(
            "Train, validation and test ratios. The default reproduces the 9572/1197/1197 benchmark counts "
            "rather than the 75/12.5/12.5 percentages, pass 0.75,0.125,0.125 for those."
        ),
    ),
    keys: str = typer.Option("crop,topic", help="Comma separated query fields defining the strata"),
    seed: int = typer.Option(0, help="Seed of the shuffle within each stratum"),
    debug: bool = False,
    _: str = CONFIG_PARAM,
) -> None:
    """Split queries into stratified train, validation and test sets."""
    init_logging(debug=debug)

    dataset = load_dataset(queries=queries, golden_facts=golden_facts)
    result = stratified_split(
        dataset.queries,
        ratios=parse_ratios(ratios),
        keys=[key.strip() for key in keys.split(",") if key.strip()],
        seed=seed,
        log=logging.getLogger("dgevalctl"),
    )

    assignments = result.assignments()
    table = Table(title=f"Splits of {len(dataset.queries)} queries")
    table.add_column("Split")
    table.add_column("Queries")
    table.add_column("Golden facts")
    for name in SPLIT_NAMES:
        members: list = getattr(result, name)
        facts = [fact for fact in dataset.golden_facts if assignments.get(fact.query_id or "") == name]
        write_to_file(out_dir / f"{name}.jsonl", dump_lines([query.model_dump(mode="json") for query in members]))
        if golden_facts:
            write_to_file(
                out_dir / f"{name}_golden_facts.jsonl", dump_lines([fact.model_dump(mode="json") for fact in facts])
            )
        table.add_row(name, str(len(members)), str(len(facts)))
    console.print(table)


@app.command(name="evaluate")
@catch_exception(console=console)
async def evaluate(
    model: str = typer.Option(..., help="Name of the evaluated model, as found in the outputs file"),
    queries: Path = typer.Option(..., help="JSON-lines file of queries"),
    golden_facts: Path = typer.Option(..., help="JSON-lines file of golden facts"),
    outputs: Path = typer.Option(..., help="JSON-lines file of model outputs"),
    out: Path = typer.Option(Path("report.md"), help="Where to write the report"),
    report_format: ReportFormat = typer.Option(ReportFormat.MARKDOWN, "--format", help="Format of the report"),
    records_out: Optional[Path] = typer.Option(None, help="Where to write the evaluation records"),
    checkpoint: Optional[Path] = typer.Option(None, help="JSON-lines checkpoint, evaluation resumes from it"),
    mode: Optional[JudgeMode] = typer.Option(None, help="Override the judge mode of the configuration"),
    fixtures: Optional[Path] = typer.Option(None, help="Override the fixtures directory of the judge"),
    concurrent: Optional[int] = typer.Option(
        None, help="Maximum number of judge requests in flight.", envvar="DGEVALCTL_CONCURRENT_EXECUTION"
    ),
    debug: bool = False,
    _: str = CONFIG_PARAM,
) -> None:
    """Evaluate the outputs of a model against golden facts."""
    init_logging(debug=debug)

    dataset = load_dataset(queries=queries, golden_facts=golden_facts, outputs=outputs)
    judge = initialize_judge(mode=mode, fixtures_directory=fixtures, max_concurrent_requests=concurrent)
    config = SETTINGS.active.evaluation
    if checkpoint:
        config = config.model_copy(update={"checkpoint_path": checkpoint})

    result = await evaluate_model(dataset, model, judge, config)
    write_report(result.report, out, report_format)
    if records_out:
        write_to_file(records_out, dump_lines([record.model_dump(mode="json") for record in result.records]))

    print_report_summary(result.report)
    console.print(f"Report written to {out}, {judge.request_count} judge request(s) sent")


@app.command(name="stitch")
@catch_exception(console=console)
async def stitch(
    facts: Path = typer.Argument(..., help="JSON-lines file of the facts to stitch"),
    persona: Optional[Path] = typer.Option(None, help="Persona file, the configured or the default one otherwise"),
    out: Optional[Path] = typer.Option(None, help="Where to write the response"),
    quarantine: Optional[Path] = typer.Option(None, help="Directory receiving unfaithful responses"),
    mode: Optional[JudgeMode] = typer.Option(None, help="Override the judge mode of the configuration"),
    debug: bool = False,
    _: str = CONFIG_PARAM,
) -> None:
    """Stitch facts into a persona response and verify that it stays faithful to them."""
    init_logging(debug=debug)

    input_facts = load_records(facts, AtomicFact)
    settings = SETTINGS.active
    judge = initialize_judge(mode=mode)
    response = await stitch_facts(
        input_facts, load_persona(persona or settings.persona), judge, word_bounds=settings.evaluation.word_bounds
    )
    result = await verify_faithfulness(
        input_facts,
        response.text,
        judge,
        threshold=settings.evaluation.match_threshold,
        quarantine_directory=quarantine or settings.evaluation.quarantine_directory,
    )

    if out:
        write_to_file(out, response.text + "\n")
    else:
        console.print(response.text)
    for warning in response.warnings:
        console.print(f"[yellow]{warning}")

    console.print(f"Coverage: {format_percent(result.coverage)}%")
    if not result.verified:
        console.print(f"[red]Response could not be verified: {result.error or 'partial matching'}")
        raise typer.Exit(1)
    if not result.faithful:
        for fact in result.extraneous:
            console.print(f"[red]Extraneous: {fact.text}")
        for verdict in result.contradictions:
            console.print(f"[red]Contradiction ({verdict.severity.value}): {verdict.rationale}")
        for quantity in result.missing_quantities:
            console.print(f"[red]Missing quantity: {quantity}")
        raise typer.Exit(1)
    console.print("[green]Response is faithful to its facts")


def _load_eval_records(path: Path) -> list[EvalRecord]:
    return load_records(path, EvalRecord)


@app.command(name="compare")
@catch_exception(console=console)
def compare(
    records_a: Path = typer.Argument(..., help="Evaluation records of the first model"),
    records_b: Path = typer.Argument(..., help="Evaluation records of the second model"),
    preferences: Optional[Path] = typer.Option(None, help="JSON-lines file of pairwise preferences (query_id, winner)"),
    debug: bool = False,
    _: str = CONFIG_PARAM,
) -> None:
    """Compare two models with paired t-tests and, optionally, their pairwise preferences."""
    init_logging(debug=debug)

    first, second = _load_eval_records(records_a), _load_eval_records(records_b)
    if not first or not second:
        raise DatasetValidationError(identifier="records", problems=["both record files need at least one record"])
    comparison = compare_models(first, second)

    table = Table(title=f"{comparison.model_a} vs {comparison.model_b} over {comparison.shared} shared queries")
    for column in ("Metric", "t", "p"):
        table.add_column(column)
    for metric in ("recall", "precision", "f1"):
        test = getattr(comparison, metric)
        if test is None:
            table.add_row(metric, "---", "---")
        else:
            table.add_row(metric, format_score(test.t), f"{test.pvalue:.4f}")
    console.print(table)

    if preferences:
        summary = preference_summary(
            load_records(preferences, Preference), models=(comparison.model_a, comparison.model_b)
        )
        for name in summary.models:
            console.print(f"{name}: {summary.counts[name]} ({summary.percentages[name]}%)")
        console.print(f"Two-sided binomial test p = {summary.pvalue:.3g}")


@app.command(name="report")
@catch_exception(console=console)
def report(
    records: list[Path] = typer.Argument(..., help="Evaluation records, one file per model or combined"),
    queries: Path = typer.Option(..., help="JSON-lines file of queries"),
    out: Path = typer.Option(Path("report.md"), help="Where to write the report"),
    report_format: ReportFormat = typer.Option(ReportFormat.MARKDOWN, "--format", help="Format of the report"),
    compare_to: Optional[str] = typer.Option(None, help="Add paired t-tests of every model against this one"),
    debug: bool = False,
    _: str = CONFIG_PARAM,
) -> None:
    """Render a report from evaluation records."""
    init_logging(debug=debug)

    settings = SETTINGS.active
    dataset = load_dataset(queries=queries)
    all_records = [record for path in records for record in _load_eval_records(path)]
    models = sorted({record.model for record in all_records})

    comparisons = []
    if compare_to:
        if compare_to not in models:
            raise UnknownModelError(name=compare_to, known=models)
        baseline = [record for record in all_records if record.model == compare_to]
        comparisons = [
            compare_models([record for record in all_records if record.model == model], baseline)
            for model in models
            if model != compare_to
        ]

    cost = None
    if settings.pricing:
        cost = cost_estimate(
            settings.pricing, n_queries=len(dataset.queries), reference=settings.reference_model, models=models
        )

    judge = initialize_judge()
    result = build_report(
        all_records,
        dataset.queries,
        report_provenance(judge, settings.evaluation),
        comparisons=comparisons,
        cost=cost,
    )
    write_report(result, out, report_format)
    print_report_summary(result)
    console.print(f"Report written to {out}")


@app.command(name="version")
@catch_exception(console=console)
def version() -> None:
    """Display the version of dg-eval in use."""
    console.print(f"dg-eval: v{dgeval_version}")
