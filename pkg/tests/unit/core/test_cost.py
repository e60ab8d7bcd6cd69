import pytest
from pydantic import ValidationError

from dgeval.cost import CostBlock, ModelPrice, cost_estimate
from dgeval.exceptions import MissingPriceError

PRICING = {
    "gpt-4": ModelPrice(input_price=10.0, output_price=20.0),
    "gpt-4o-mini": ModelPrice(input_price=1.5, output_price=3.0),
    "llama-3-8b": ModelPrice(hourly_rate=2.0, queries_per_hour=1000),
}


def test_cost_relative_to_reference():
    block = cost_estimate(PRICING, n_queries=1000, reference="gpt-4")

    assert [entry.model for entry in block.entries] == ["gpt-4", "gpt-4o-mini", "llama-3-8b"]
    assert block.entry("gpt-4").relative == pytest.approx(1.0)
    assert block.entry("gpt-4").per_query == pytest.approx(0.012)
    assert block.entry("gpt-4").total == pytest.approx(12.0)
    assert block.entry("gpt-4o-mini").relative == pytest.approx(0.15)
    assert block.entry("gpt-4o-mini").hosting == "api"


def test_cost_self_hosted():
    block = cost_estimate(PRICING, n_queries=500, reference="gpt-4", models=["llama-3-8b"])

    entry = block.entry("llama-3-8b")
    assert entry.hosting == "self-hosted"
    assert entry.per_query == pytest.approx(0.002)
    assert entry.total == pytest.approx(1.0)
    assert entry.relative == pytest.approx(0.002 / 0.012)


def test_cost_zero_queries():
    block = cost_estimate(PRICING, n_queries=0, reference="gpt-4o-mini")

    assert all(entry.total == 0 for entry in block.entries)
    assert block.entry("gpt-4o-mini").relative == pytest.approx(1.0)


def test_cost_token_overrides():
    block = cost_estimate(PRICING, n_queries=1, reference="gpt-4", prompt_tokens=1000, response_tokens=0)
    assert block.entry("gpt-4").per_query == pytest.approx(0.01)


def test_cost_json_round_trip():
    block = cost_estimate(PRICING, n_queries=10, reference="gpt-4")
    assert CostBlock.model_validate_json(block.model_dump_json()) == block


@pytest.mark.parametrize("reference,models", [("claude", None), ("gpt-4", ["gpt-4", "mistral"])])
def test_cost_missing_price(reference, models):
    with pytest.raises(MissingPriceError) as exc:
        cost_estimate(PRICING, n_queries=10, reference=reference, models=models)

    assert "No pricing entry" in exc.value.message


def test_cost_entry_lookup_missing():
    block = cost_estimate(PRICING, n_queries=10, reference="gpt-4")
    with pytest.raises(MissingPriceError):
        block.entry("mistral")


@pytest.mark.parametrize(
    "fields",
    [
        {},
        {"input_price": 1.0},
        {"input_price": 1.0, "output_price": 2.0, "hourly_rate": 2.0, "queries_per_hour": 10},
        {"hourly_rate": 2.0, "queries_per_hour": 0},
    ],
)
def test_invalid_price(fields):
    with pytest.raises(ValidationError):
        ModelPrice(**fields)


def test_negative_queries():
    with pytest.raises(ValueError):
        cost_estimate(PRICING, n_queries=-1, reference="gpt-4")
