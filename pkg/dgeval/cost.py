from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field, model_validator
from typing_extensions import Self

from .exceptions import MissingPriceError

PROMPT_TOKENS = 200
RESPONSE_TOKENS = 500
TOKENS_PER_PRICE_UNIT = 1_000_000


class ModelPrice(BaseModel):
    """Price of a model, either per million tokens (API) or per hour of hosting (self-hosted)."""

    input_price: Optional[float] = Field(default=None, ge=0, description="Price per million prompt tokens")
    output_price: Optional[float] = Field(default=None, ge=0, description="Price per million response tokens")
    hourly_rate: Optional[float] = Field(default=None, ge=0, description="Hosting price per hour")
    queries_per_hour: Optional[float] = Field(default=None, gt=0, description="Throughput of the hosted model")

    @model_validator(mode="after")
    def validate_pricing(self) -> Self:
        per_token = self.input_price is not None and self.output_price is not None
        per_hour = self.hourly_rate is not None and self.queries_per_hour is not None
        if per_token == per_hour:
            raise ValueError(
                "a price needs either input_price and output_price, or hourly_rate and queries_per_hour"
            )
        return self

    @property
    def hosting(self) -> str:
        return "api" if self.input_price is not None else "self-hosted"

    def per_query(self, prompt_tokens: int = PROMPT_TOKENS, response_tokens: int = RESPONSE_TOKENS) -> float:
        if self.input_price is not None and self.output_price is not None:
            return (prompt_tokens * self.input_price + response_tokens * self.output_price) / TOKENS_PER_PRICE_UNIT
        assert self.hourly_rate is not None and self.queries_per_hour is not None
        return self.hourly_rate / self.queries_per_hour


class CostEntry(BaseModel):
    model: str
    hosting: str
    per_query: float
    total: float
    relative: Optional[float] = Field(default=None, description="Cost per query relative to the reference model")


class CostBlock(BaseModel):
    reference: str
    queries: int
    prompt_tokens: int = PROMPT_TOKENS
    response_tokens: int = RESPONSE_TOKENS
    entries: list[CostEntry] = Field(default_factory=list)

    def entry(self, model: str) -> CostEntry:
        for entry in self.entries:
            if entry.model == model:
                return entry
        raise MissingPriceError(model=model)


def cost_estimate(
    pricing: dict[str, ModelPrice],
    n_queries: int,
    reference: str,
    models: Optional[list[str]] = None,
    prompt_tokens: int = PROMPT_TOKENS,
    response_tokens: int = RESPONSE_TOKENS,
) -> CostBlock:
    """Absolute cost of answering n_queries per model and the cost relative to a reference model.

    The relative cost compares costs per query, so it stays defined when n_queries is 0.
    """
    if n_queries < 0:
        raise ValueError(f"n_queries must be positive, got {n_queries}")
    if reference not in pricing:
        raise MissingPriceError(model=reference)

    reference_cost = pricing[reference].per_query(prompt_tokens, response_tokens)
    entries = []
    for model in models if models is not None else sorted(pricing):
        if model not in pricing:
            raise MissingPriceError(model=model)
        price = pricing[model]
        per_query = price.per_query(prompt_tokens, response_tokens)
        entries.append(
            CostEntry(
                model=model,
                hosting=price.hosting,
                per_query=per_query,
                total=per_query * n_queries,
                relative=per_query / reference_cost if reference_cost else None,
            )
        )

    return CostBlock(
        reference=reference,
        queries=n_queries,
        prompt_tokens=prompt_tokens,
        response_tokens=response_tokens,
        entries=entries,
    )
