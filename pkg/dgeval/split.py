from __future__ import annotations

import logging
import math
from collections import defaultdict
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from .models import Query
from .types import DGEvalLoggers

# Reproduces the 9572/1197/1197 benchmark counts, the 75/12.5/12.5 percentages give 8975/1496/1495.
DEFAULT_RATIOS = (0.8, 0.1, 0.1)
DEFAULT_KEYS = ("crop", "topic")
OVERFLOW_STRATUM = ("__overflow__",)
SPLIT_NAMES = ("train", "validation", "test")


class SplitResult(BaseModel):
    train: list[Query] = Field(default_factory=list)
    validation: list[Query] = Field(default_factory=list)
    test: list[Query] = Field(default_factory=list)
    strata: dict[str, list[int]] = Field(default_factory=dict, description="Split sizes per stratum")
    warnings: list[str] = Field(default_factory=list)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def assignments(self) -> dict[str, str]:
        return {query.id: name for name in SPLIT_NAMES for query in getattr(self, name)}


def largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    """Integer sizes summing to total, as close as possible to total * ratio.

    Leftover units go to the largest fractional parts, ties to the earlier split.
    """
    exact = [total * ratio for ratio in ratios]
    sizes = [math.floor(value) for value in exact]
    order = sorted(range(len(ratios)), key=lambda index: (-(exact[index] - sizes[index]), index))
    for index in order[: total - sum(sizes)]:
        sizes[index] += 1
    return sizes


def _validate_ratios(ratios: Sequence[float]) -> None:
    if len(ratios) != len(SPLIT_NAMES):
        raise ValueError(f"expected {len(SPLIT_NAMES)} ratios, got {len(ratios)}")
    if any(ratio < 0 for ratio in ratios):
        raise ValueError(f"ratios must be positive, got {list(ratios)}")
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")


def _stratum_key(query: Query, keys: Sequence[str]) -> tuple[str, ...]:
    missing = [key for key in keys if not hasattr(query, key)]
    if missing:
        raise ValueError(f"query '{query.id}' has no field {', '.join(missing)}")
    return tuple(str(getattr(query, key)) for key in keys)


def _allocate(strata: dict[tuple[str, ...], list[Query]], ratios: Sequence[float]) -> dict[tuple[str, ...], list[int]]:
    """Per-stratum split sizes whose totals follow the global largest-remainder targets.

    Every stratum gets the floor of its exact share per split plus at most one extra record per
    split, which keeps each stratum within one record of the global ratios.
    """
    total = sum(len(members) for members in strata.values())
    targets = largest_remainder(total, ratios)

    floors: dict[tuple[str, ...], list[int]] = {}
    remainders: dict[tuple[str, ...], list[float]] = {}
    for key, members in strata.items():
        exact = [len(members) * ratio for ratio in ratios]
        floors[key] = [math.floor(value) for value in exact]
        remainders[key] = [value - floor for value, floor in zip(exact, floors[key])]

    demand = [target - sum(floor[index] for floor in floors.values()) for index, target in enumerate(targets)]
    leftovers = {key: len(members) - sum(floors[key]) for key, members in strata.items()}

    allocation = {key: list(sizes) for key, sizes in floors.items()}
    for key in sorted(strata, key=lambda item: (-leftovers[item], item)):
        candidates = sorted(
            range(len(ratios)),
            key=lambda index: (-(demand[index] > 0), -demand[index], -remainders[key][index], index),
        )
        for index in candidates[: leftovers[key]]:
            allocation[key][index] += 1
            demand[index] -= 1
    return allocation


def stratified_split(
    queries: Sequence[Query],
    ratios: Sequence[float] = DEFAULT_RATIOS,
    keys: Sequence[str] = DEFAULT_KEYS,
    seed: int = 0,
    log: Optional[DGEvalLoggers] = None,
) -> SplitResult:
    """Partition queries into train, validation and test sets stratified by the given keys.

    Splitting happens at the query level, facts follow their query. Strata holding fewer records
    than there are non-empty splits are merged into a single overflow stratum. The result only
    depends on the records and the seed, not on their input order.
    """
    log = log or logging.getLogger("dgeval")
    _validate_ratios(ratios)

    grouped: dict[tuple[str, ...], list[Query]] = defaultdict(list)
    for query in sorted(queries, key=lambda item: item.id):
        grouped[_stratum_key(query, keys)].append(query)

    splits_used = sum(1 for ratio in ratios if ratio > 0)
    warnings = []
    strata: dict[tuple[str, ...], list[Query]] = {}
    for key in sorted(grouped):
        members = grouped[key]
        if len(members) < splits_used:
            strata.setdefault(OVERFLOW_STRATUM, []).extend(members)
            warnings.append(f"stratum {'/'.join(key)} has {len(members)} record(s), merged into the overflow stratum")
        else:
            strata[key] = members
    for warning in warnings:
        log.warning(warning)

    rng = np.random.default_rng(seed)
    allocation = _allocate(strata, ratios)
    parts: list[list[Query]] = [[] for _ in SPLIT_NAMES]
    for key in sorted(strata):
        members = strata[key]
        shuffled = [members[index] for index in rng.permutation(len(members))]
        start = 0
        for index, size in enumerate(allocation[key]):
            parts[index].extend(shuffled[start : start + size])
            start += size

    return SplitResult(
        train=sorted(parts[0], key=lambda item: item.id),
        validation=sorted(parts[1], key=lambda item: item.id),
        test=sorted(parts[2], key=lambda item: item.id),
        strata={"/".join(key): allocation[key] for key in sorted(strata)},
        warnings=warnings,
    )
