from __future__ import annotations

import math
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats
from scipy.special import logsumexp

from .exceptions import UnknownModelError
from .models import DGEvalModel, EvalRecord
from .utils import round_half_up

NULL_PROBABILITY = 0.5
# Relative slack when comparing point probabilities, as R's binom.test does.
RELATIVE_TOLERANCE = 1 + 1e-7


class TTestResult(BaseModel):
    statistic: Optional[float] = Field(..., description="None when the differences are constant and non-zero")
    pvalue: float
    size: int
    zero_variance: bool = False
    mean_difference: float = 0.0

    @property
    def t(self) -> float:
        if self.statistic is None:
            return math.copysign(math.inf, self.mean_difference)
        return self.statistic


class Preference(DGEvalModel):
    query_id: str
    winner: str


class PreferenceSummary(BaseModel):
    models: tuple[str, str]
    counts: dict[str, int]
    percentages: dict[str, float]
    total: int
    pvalue: float


def binomial_two_sided(k: int, n: int) -> float:
    """Exact two-sided binomial test of k successes out of n under p = 0.5.

    Sums every outcome no more likely than k, in log space so large n does not underflow.
    """
    if n < 0 or not 0 <= k <= n:
        raise ValueError(f"expected 0 <= k <= n, got k={k}, n={n}")
    if n == 0:
        return 1.0

    log_masses = stats.binom.logpmf(np.arange(n + 1), n, NULL_PROBABILITY)
    threshold = log_masses[k] + math.log(RELATIVE_TOLERANCE)
    kept = log_masses <= threshold
    if kept.all():
        return 1.0
    return min(1.0, math.exp(logsumexp(log_masses[kept])))


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    if len(a) != len(b):
        raise ValueError(f"paired samples must have the same length, got {len(a)} and {len(b)}")
    if len(a) < 2:
        raise ValueError("a paired t-test needs at least two pairs")

    differences = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if np.all(differences == 0):
        return TTestResult(statistic=0.0, pvalue=1.0, size=len(a))
    if np.all(differences == differences[0]):
        return TTestResult(
            statistic=None, pvalue=0.0, size=len(a), zero_variance=True, mean_difference=float(differences[0])
        )

    result = stats.ttest_rel(a, b)
    return TTestResult(
        statistic=float(result.statistic),
        pvalue=float(result.pvalue),
        size=len(a),
        mean_difference=float(differences.mean()),
    )


def preference_summary(
    preferences: Sequence[Union[Preference, dict]], models: tuple[str, str]
) -> PreferenceSummary:
    """Summarize forced-choice pairwise preferences between two models."""
    parsed = [item if isinstance(item, Preference) else Preference(**item) for item in preferences]
    counts = {model: 0 for model in models}
    for preference in parsed:
        if preference.winner not in counts:
            raise UnknownModelError(name=preference.winner, known=list(models))
        counts[preference.winner] += 1

    total = len(parsed)
    percentages = {
        model: float(round_half_up(count / total * 100, 1)) if total else 0.0 for model, count in counts.items()
    }
    return PreferenceSummary(
        models=models,
        counts=counts,
        percentages=percentages,
        total=total,
        pvalue=binomial_two_sided(counts[models[0]], total),
    )


class ModelComparison(BaseModel):
    """Paired t-tests between two models over the queries both were evaluated on."""

    model_a: str
    model_b: str
    shared: int
    recall: Optional[TTestResult] = None
    precision: Optional[TTestResult] = None
    f1: Optional[TTestResult] = None


def compare_models(records_a: Sequence[EvalRecord], records_b: Sequence[EvalRecord]) -> ModelComparison:
    if not records_a or not records_b:
        raise ValueError("both models need evaluation records to be compared")

    aligned_a = {record.query_id: record.alignment for record in records_a if record.alignment is not None}
    aligned_b = {record.query_id: record.alignment for record in records_b if record.alignment is not None}
    shared = sorted(aligned_a.keys() & aligned_b.keys())
    comparison = ModelComparison(model_a=records_a[0].model, model_b=records_b[0].model, shared=len(shared))
    if len(shared) < 2:
        return comparison

    tests = {
        metric: paired_t_test(
            [getattr(aligned_a[query_id], metric) for query_id in shared],
            [getattr(aligned_b[query_id], metric) for query_id in shared],
        )
        for metric in ("recall", "precision", "f1")
    }
    return comparison.model_copy(update=tests)
