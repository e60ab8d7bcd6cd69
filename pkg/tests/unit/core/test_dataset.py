import pytest

from dgeval.dataset import Dataset, GoldenAnswer, ModelOutput, load_dataset, load_records
from dgeval.exceptions import DanglingReferenceError, DatasetValidationError, DuplicateRecordError
from dgeval.models import AtomicFact, Query
from dgeval.utils import dump_lines

QUERIES = [
    {"id": "q2", "text": "When should I sow wheat?", "crop": "wheat", "topic": "sowing"},
    {"id": "q1", "text": "How much urea for rice?", "crop": "rice", "topic": "nutrient"},
]
GOLDEN_FACTS = [
    {"id": "gf2", "text": "Sow wheat in November.", "query_id": "q2"},
    {"id": "gf1", "text": "Apply 120 kg/ha urea in two splits.", "query_id": "q1"},
    {"id": "gf0", "text": "Apply urea at 21 days after transplanting.", "query_id": "q1"},
]
OUTPUTS = [
    {"model": "gpt-4", "query_id": "q1", "response": "Apply urea."},
    {"model": "farmer-chat", "query_id": "q1", "facts": [{"id": "f1", "text": "Apply 120 kg/ha urea."}]},
]


def write(path, records) -> None:
    path.write_text(dump_lines(records), encoding="utf-8")


def test_load_dataset(tmp_path):
    write(tmp_path / "queries.jsonl", QUERIES)
    write(tmp_path / "golden_facts.jsonl", GOLDEN_FACTS)
    write(tmp_path / "outputs.jsonl", OUTPUTS)

    dataset = load_dataset(
        tmp_path / "queries.jsonl", golden_facts=tmp_path / "golden_facts.jsonl", outputs=tmp_path / "outputs.jsonl"
    )

    assert dataset.models == ["farmer-chat", "gpt-4"]
    assert dataset.query("q2").crop == "wheat"
    assert [fact.id for fact in dataset.golden_for("q1")] == ["gf0", "gf1"]
    assert dataset.outputs_for("farmer-chat")["q1"].facts[0].text == "Apply 120 kg/ha urea."
    assert dataset.outputs_for("gpt-4")["q1"].key == "gpt-4/q1"
    with pytest.raises(KeyError):
        dataset.query("q9")


def test_load_records_reports_every_problem(tmp_path):
    path = tmp_path / "queries.jsonl"
    path.write_text(
        '{"id": "q1", "text": "How much urea?"}\n'
        "\n"
        "{not json\n"
        '["q2"]\n'
        '{"id": "q3"}\n',
        encoding="utf-8",
    )

    with pytest.raises(DatasetValidationError) as exc:
        load_records(path, Query)

    problems = exc.value.problems
    assert len(problems) == 3
    assert problems[0].startswith("line 3: invalid JSON")
    assert problems[1] == "line 4: expected a JSON object"
    assert problems[2].startswith("line 5: text:")
    assert "3 invalid record(s)" in exc.value.message


def test_load_records_missing_file(tmp_path):
    with pytest.raises(DatasetValidationError) as exc:
        load_records(tmp_path / "missing.jsonl", Query)
    assert exc.value.problems == ["file not found"]


def test_golden_facts_need_a_query(tmp_path):
    write(tmp_path / "queries.jsonl", QUERIES)
    write(tmp_path / "golden_facts.jsonl", [{"id": "gf1", "text": "Sow wheat in November."}])

    with pytest.raises(DatasetValidationError) as exc:
        load_dataset(tmp_path / "queries.jsonl", golden_facts=tmp_path / "golden_facts.jsonl")

    assert exc.value.problems == ["gf1: query_id is required"]


@pytest.mark.parametrize(
    "data,identifier,duplicates",
    [
        ({"queries": QUERIES + [QUERIES[0]]}, "queries", ["q2"]),
        ({"queries": QUERIES, "golden_facts": GOLDEN_FACTS + [GOLDEN_FACTS[1]]}, "golden facts", ["gf1"]),
        ({"queries": QUERIES, "outputs": OUTPUTS + [OUTPUTS[0]]}, "model outputs", ["gpt-4/q1"]),
    ],
)
def test_duplicate_records(data, identifier, duplicates):
    with pytest.raises(DuplicateRecordError) as exc:
        Dataset(**data)

    assert exc.value.identifier == identifier
    assert exc.value.duplicates == duplicates


@pytest.mark.parametrize(
    "data,identifier",
    [
        ({"golden_facts": [AtomicFact(id="gf1", text="Sow wheat.", query_id="q7")]}, "golden facts"),
        ({"golden_answers": [GoldenAnswer(query_id="q8", answer="Sow wheat.")]}, "golden answers"),
        ({"outputs": [ModelOutput(model="gpt-4", query_id="q9")]}, "model outputs"),
    ],
)
def test_dangling_references(data, identifier):
    with pytest.raises(DanglingReferenceError) as exc:
        Dataset(queries=[Query(**query) for query in QUERIES], **data)

    assert exc.value.identifier == identifier
    assert len(exc.value.references) == 1
