# pylint: disable=redefined-outer-name
from pathlib import Path
from typing import Any

import pytest
import toml

from dgeval.constants import JudgeMode
from dgeval.dataset import Dataset
from dgeval.evaluation import evaluate
from dgeval.extraction import build_golden_facts
from dgeval.stitching import stitch, verify_faithfulness
from dgeval.yaml import load_persona
from tests.helpers.datasets import BPH_RESPONSE, small_dataset, write_dataset
from tests.helpers.judge import SimulatedJudge, make_judge


def write_config(path: Path, **sections: Any) -> Path:
    path.write_text(toml.dumps(sections), encoding="utf-8")
    return path


@pytest.fixture
def dataset() -> Dataset:
    return small_dataset()


@pytest.fixture
def dataset_files(tmp_path, dataset) -> dict[str, Path]:
    return write_dataset(tmp_path / "data", dataset)


@pytest.fixture
def fixtures_directory(tmp_path) -> Path:
    return tmp_path / "judge"


@pytest.fixture
def recording_judge(fixtures_directory):
    return make_judge(SimulatedJudge(), mode=JudgeMode.RECORD, fixtures_directory=fixtures_directory)


@pytest.fixture
def replay_config(tmp_path, fixtures_directory) -> Path:
    return write_config(
        tmp_path / "dgeval.toml",
        judge={"mode": "replay", "fixtures_directory": str(fixtures_directory), "retry_delay": 0},
        evaluation={"strata_minimum": 1},
    )


@pytest.fixture
async def recorded_evaluation(dataset, recording_judge):
    return await evaluate(dataset, "farmer-chat", recording_judge)


@pytest.fixture
async def recorded_extraction(recording_judge):
    return await build_golden_facts({"q1": BPH_RESPONSE}, recording_judge)


@pytest.fixture
async def recorded_stitching(dataset, recording_judge):
    facts = dataset.golden_for("q1")
    response = await stitch(facts, load_persona(), recording_judge, word_bounds=(150, 300))
    await verify_faithfulness(facts, response.text, recording_judge)
    return response


@pytest.fixture
async def recorded_changed_dosage(dataset, fixtures_directory):
    """Stitching of every golden fact, recorded with a response that raises the pesticide dose tenfold."""
    changed = BPH_RESPONSE.replace("0.5 ml", "5 ml") + " Apply 5–10 kg zinc per hectare."
    backend = SimulatedJudge(overrides={"stitching": {"response": changed}})
    judge = make_judge(backend, mode=JudgeMode.RECORD, fixtures_directory=fixtures_directory)
    response = await stitch(dataset.golden_facts, load_persona(), judge, word_bounds=(150, 300))
    await verify_faithfulness(dataset.golden_facts, response.text, judge)
    return response
