"""Consensus-threshold inference of minority-group membership.

The heuristic: teachers disagree more on rare-group members, so a low
consensus histogram probably belongs to a minority member. Classifying
by a consensus threshold turns any histogram (true or reconstructed)
into a group guess. A synthetic population generator with controllable
consensus separation provides ground truth for desk-scale evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .core import RealHistogram, VoteHistogram, consensus

__all__ = [
    "Group",
    "LabeledHistogram",
    "SynthPopulationSpec",
    "AttributeMetrics",
    "classify_by_consensus",
    "evaluate",
    "generate_population",
]


class Group(Enum):
    MINORITY = "minority"
    MAJORITY = "majority"


@dataclass(frozen=True)
class LabeledHistogram:
    """A histogram with its ground-truth group label."""

    histogram: VoteHistogram | RealHistogram
    group: Group
    id: str


@dataclass(frozen=True)
class SynthPopulationSpec:
    """Parameters of the synthetic two-group population.

    Each member's consensus is drawn from a Gaussian centered on their
    group's mean (minority lower than majority, encoding the
    disagreement hypothesis) with common ``spread``, truncated to the
    feasible range [1/c, 1].
    """

    n_teachers: int = 250
    n_classes: int = 10
    minority_fraction: float = 0.5
    majority_consensus_mean: float = 0.95
    minority_consensus_mean: float = 0.55
    spread: float = 0.03
    seed: int = 0

    def __post_init__(self) -> None:
        c = self.n_classes
        if self.n_teachers < 1 or c < 2:
            raise ValueError("need at least 1 teacher and 2 classes")
        if not 0 < self.minority_fraction < 1:
            raise ValueError("minority fraction must lie in (0, 1)")
        for mean in (self.majority_consensus_mean, self.minority_consensus_mean):
            if not 1.0 / c < mean <= 1.0:
                raise ValueError("consensus means must lie in (1/c, 1]")
        if self.minority_consensus_mean >= self.majority_consensus_mean:
            raise ValueError("minority consensus mean must be the lower one")
        if self.spread <= 0:
            raise ValueError("spread must be positive")


@dataclass(frozen=True)
class AttributeMetrics:
    """Confusion-matrix metrics with Minority as the positive class.

    When no member is predicted Minority the precision is undefined; it
    is reported as 0 with ``degenerate_precision`` set.
    """

    precision: float
    recall: float
    accuracy: float
    true_positives: int
    false_positives: int
    true_negatives: int
    false_negatives: int
    degenerate_precision: bool = False


def classify_by_consensus(
    h: VoteHistogram | RealHistogram, tau: float = 0.75
) -> Group:
    """Majority iff consensus strictly exceeds ``tau``.

    The inequality is strict, so a histogram sitting exactly on the
    threshold is classified Minority.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    return Group.MAJORITY if consensus(h) > tau else Group.MINORITY


def evaluate(
    predictions: Mapping[str, Group], truths: Mapping[str, Group]
) -> AttributeMetrics:
    """Score predictions against ground truth over matching member ids."""
    if set(predictions) != set(truths):
        raise ValueError("prediction and truth id sets differ")
    tp = fp = tn = fn = 0
    for member_id, predicted in predictions.items():
        actual = truths[member_id]
        if predicted is Group.MINORITY:
            if actual is Group.MINORITY:
                tp += 1
            else:
                fp += 1
        else:
            if actual is Group.MAJORITY:
                tn += 1
            else:
                fn += 1
    total = tp + fp + tn + fn
    degenerate = (tp + fp) == 0
    precision = 0.0 if degenerate else tp / (tp + fp)
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    accuracy = (tp + tn) / total if total else 0.0
    return AttributeMetrics(
        precision=precision,
        recall=recall,
        accuracy=accuracy,
        true_positives=tp,
        false_positives=fp,
        true_negatives=tn,
        false_negatives=fn,
        degenerate_precision=degenerate,
    )


def generate_population(
    spec: SynthPopulationSpec, size: int
) -> list[LabeledHistogram]:
    """Draw a labeled population of ``size`` members, deterministically.

    The minority member count is round(minority_fraction * size), not a
    per-member coin flip. Each histogram gets a random top class holding
    round(consensus * N) votes; the remaining votes are spread over the
    other classes by a symmetric multinomial.
    """
    if size < 1:
        raise ValueError("population size must be at least 1")
    rng = np.random.default_rng(spec.seed)
    n_minority = round(spec.minority_fraction * size)
    c = spec.n_classes
    n = spec.n_teachers
    members: list[LabeledHistogram] = []
    for i in range(size):
        group = Group.MINORITY if i < n_minority else Group.MAJORITY
        mean = (
            spec.minority_consensus_mean
            if group is Group.MINORITY
            else spec.majority_consensus_mean
        )
        drawn = float(np.clip(rng.normal(mean, spec.spread), 1.0 / c, 1.0))
        top_class = int(rng.integers(c))
        top_votes = round(drawn * n)
        rest = rng.multinomial(n - top_votes, np.full(c - 1, 1.0 / (c - 1)))
        counts = np.insert(rest, top_class, top_votes)
        members.append(
            LabeledHistogram(
                histogram=VoteHistogram(tuple(int(v) for v in counts)),
                group=group,
                id=f"member-{i:04d}",
            )
        )
    return members
