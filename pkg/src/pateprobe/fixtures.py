"""Bundled evaluation histograms.

Thirty vote histograms (15 per dataset) over 250 teachers and 10
classes, five from each consensus tertile, shipped in the standard
histogram line format.
"""

from __future__ import annotations

from importlib.resources import files

from .core import VoteHistogram
from .io import parse_histogram_line

__all__ = ["FIXTURE_DATASETS", "load_fixtures"]

FIXTURE_DATASETS = ("mnist", "svhn")


def load_fixtures(dataset: str) -> list[VoteHistogram]:
    """The 15 bundled histograms for ``dataset`` (mnist or svhn).

    Ordered by consensus tertile: five high, five median, five low.
    """
    if dataset not in FIXTURE_DATASETS:
        raise ValueError(f"unknown dataset {dataset!r}; pick from {FIXTURE_DATASETS}")
    text = files("pateprobe.data").joinpath(f"{dataset}_histograms.txt").read_text()
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        out.append(parse_histogram_line(line))
    return out
