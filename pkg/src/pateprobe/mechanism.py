"""The aggregation mechanism under attack: Gaussian noisy argmax.

Each query adds i.i.d. zero-mean Gaussian noise to every histogram bin
and returns the argmax index. ``sample`` draws many such answers with a
reproducible generator so experiments can be replayed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import VoteHistogram

__all__ = ["NoiseSpec", "QuerySample", "aggregate", "sample"]

_CHUNK = 200_000


@dataclass(frozen=True)
class NoiseSpec:
    """Noise scale and seed for the mechanism.

    ``sigma`` is the standard deviation of the per-bin Gaussian noise in
    vote units. ``sigma = 0`` is a deterministic noiseless baseline used
    by edge-case sweeps; ties then resolve to the lowest class index.
    """

    sigma: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError("sigma must be finite and non-negative")


@dataclass(frozen=True)
class QuerySample:
    """Labels returned by ``m`` repeated queries, plus per-class tallies."""

    labels: tuple[int, ...]
    counts: tuple[int, ...]
    m: int

    def __post_init__(self) -> None:
        if self.m != len(self.labels):
            raise ValueError("m must equal the number of labels")
        if sum(self.counts) != self.m:
            raise ValueError("counts must sum to m")


def aggregate(
    h: VoteHistogram, noise: NoiseSpec, rng: np.random.Generator
) -> int:
    """One mechanism answer: argmax of counts plus Gaussian perturbations.

    With ``sigma > 0`` ties occur with probability zero; with
    ``sigma = 0`` the lowest-index maximum is returned.
    """
    scores = h.as_array()
    if noise.sigma > 0:
        scores = scores + rng.normal(0.0, noise.sigma, size=scores.size)
    return int(np.argmax(scores))


def sample(h: VoteHistogram, noise: NoiseSpec, m: int) -> QuerySample:
    """Draw ``m`` independent mechanism answers.

    Deterministic given ``(h, noise.seed, m)``: the generator is a PCG64
    stream seeded from ``noise.seed`` and consumed in fixed-size chunks,
    so the label sequence does not depend on platform scheduling.
    """
    if m < 1:
        raise ValueError("sample count m must be >= 1")
    scores = h.as_array()
    c = scores.size
    if noise.sigma == 0:
        top = int(np.argmax(scores))
        labels = np.full(m, top, dtype=np.int64)
    else:
        rng = np.random.default_rng(noise.seed)
        parts = []
        done = 0
        while done < m:
            k = min(_CHUNK, m - done)
            noisy = scores[None, :] + rng.normal(0.0, noise.sigma, size=(k, c))
            parts.append(np.argmax(noisy, axis=1))
            done += k
        labels = np.concatenate(parts)
    counts = np.bincount(labels, minlength=c)
    return QuerySample(
        labels=tuple(int(v) for v in labels),
        counts=tuple(int(v) for v in counts),
        m=m,
    )
