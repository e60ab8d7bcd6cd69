import pytest

from dgeval.models import AtomicFact, Query
from tests.helpers.judge import SimulatedJudge, make_judge

# pylint: disable=redefined-outer-name


@pytest.fixture
def simulated() -> SimulatedJudge:
    return SimulatedJudge()


@pytest.fixture
def judge(simulated):
    return make_judge(simulated)


@pytest.fixture
def bph_query() -> Query:
    return Query(
        id="q-bph",
        text="What should I spray for brown planthopper in my rice field?",
        crop="rice",
        topic="pest",
        language="en",
        region="bihar",
    )


@pytest.fixture
def bph_facts() -> list[AtomicFact]:
    texts = [
        "Spray Imidacloprid 17.8 SL at 0.5 ml per liter of water.",
        "Application should target the base of plants where BPH nymphs cluster.",
        "Spray during cooler hours (early morning or late evening).",
        "Wear protective clothing including gloves and mask during application.",
        "Do not harvest rice within 14 days of pesticide application.",
        "Store pesticides away from children and food items.",
    ]
    return [AtomicFact(id=f"gf{index:03d}", text=text, query_id="q-bph") for index, text in enumerate(texts, start=1)]
