"""Shared domain types and histogram metrics.

A vote histogram is the per-class tally of teacher votes for one query
instance. Everything downstream (the mechanism, the outcome model, the
reconstruction attack) speaks in these types.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "VoteHistogram",
    "RealHistogram",
    "OutcomeDistribution",
    "ConsensusGroup",
    "consensus",
    "l1_error",
    "shift_to_total",
    "tertile_split",
]


class ConsensusGroup(Enum):
    """Tertile bucket of a histogram's consensus within a dataset."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


@dataclass(frozen=True)
class VoteHistogram:
    """Integer per-class vote counts for a single query instance.

    ``counts[k]`` is the number of teachers that voted for class ``k``.
    The teacher count N is implied by the sum. Instances are immutable
    and hashable so they can key dictionaries (see ``tertile_split``).
    """

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(v) for v in self.counts)
        if len(counts) < 2:
            raise ValueError("histogram needs at least 2 classes")
        if any(v < 0 for v in counts):
            raise ValueError("vote counts must be non-negative")
        if sum(counts) <= 0:
            raise ValueError("histogram must contain at least one vote")
        object.__setattr__(self, "counts", counts)

    @property
    def n_classes(self) -> int:
        return len(self.counts)

    @property
    def n_teachers(self) -> int:
        return sum(self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)


@dataclass(frozen=True)
class RealHistogram:
    """Real-valued vote-count estimate, in units of votes.

    Entries may be negative: the attack's gradient descent is
    unconstrained and only the final shift pins the scale.
    """

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if len(values) < 2:
            raise ValueError("histogram needs at least 2 classes")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RealHistogram":
        return cls(tuple(float(v) for v in np.asarray(arr, dtype=float)))

    @property
    def n_classes(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability vector over classes induced by the noisy argmax.

    ``raw_mass`` records the quadrature mass before renormalization so
    callers can check how much probability the truncated grid captured;
    it is ``None`` when the vector was built directly from frequencies.
    """

    probs: tuple[float, ...]
    raw_mass: float | None = None

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > 1e-6:
            raise ValueError("probabilities must sum to 1 within 1e-6")
        object.__setattr__(self, "probs", probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


def consensus(h: VoteHistogram | RealHistogram) -> float:
    """Largest entry as a fraction of the total vote mass.

    For a vote histogram this is max(counts)/N. Real-valued estimates
    (already shifted to sum N) are accepted so the attribute inference
    can score reconstructed histograms with the same rule.
    """
    values = h.as_array()
    total = values.sum()
    if total <= 0:
        raise ValueError("consensus undefined for non-positive total")
    return float(values.max() / total)


def l1_error(truth: VoteHistogram, estimate: RealHistogram | VoteHistogram) -> float:
    """Normalized L1 distance between truth and estimate.

    Defined as sum_i |H_i - Hhat_i| / (2 sum_i |H_i|). Zero iff the
    estimate matches the truth elementwise; moving d votes between two
    classes costs 2d/(2N) = d/N.
    """
    t = truth.as_array()
    e = estimate.as_array()
    if t.shape != e.shape:
        raise ValueError(f"length mismatch: {t.size} vs {e.size}")
    return float(np.abs(t - e).sum() / (2.0 * np.abs(t).sum()))


def shift_to_total(estimate: RealHistogram, n: int) -> RealHistogram:
    """Add a constant to every entry so the result sums to ``n``.

    Pairwise differences are untouched, so by shift invariance the
    outcome distribution of the shifted estimate is unchanged.
    """
    if n <= 0:
        raise ValueError("target total must be positive")
    v = estimate.as_array()
    return RealHistogram.from_array(v + (n - v.sum()) / v.size)


def tertile_split(
    hists: Sequence[VoteHistogram],
) -> dict[VoteHistogram, ConsensusGroup]:
    """Bucket histograms into Low/Medium/High consensus tertiles.

    Boundaries are the 33.3% and 66.7% quantiles of the consensus values
    in ``hists``. A histogram whose consensus lands exactly on a boundary
    goes to the lower group, which keeps the grouping deterministic and
    independent of input order.
    """
    if not hists:
        raise ValueError("tertile_split needs a non-empty list")
    values = np.array([consensus(h) for h in hists])
    lo = float(np.quantile(values, 0.333))
    hi = float(np.quantile(values, 0.667))
    out: dict[VoteHistogram, ConsensusGroup] = {}
    for h, c in zip(hists, values):
        if c <= lo:
            out[h] = ConsensusGroup.LOW
        elif c <= hi:
            out[h] = ConsensusGroup.MEDIUM
        else:
            out[h] = ConsensusGroup.HIGH
    return out
