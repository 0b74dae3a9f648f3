"""Flat-file formats for histograms.

One histogram per line as comma-separated non-negative integers; blank
lines and lines starting with '#' are ignored. The labeled variant
appends ``;minority`` or ``;majority`` after the counts. Parse errors
carry the 1-based line number.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .attribute import Group, LabeledHistogram
from .core import VoteHistogram

__all__ = [
    "parse_histogram_line",
    "read_histograms",
    "write_histograms",
    "read_labeled_histograms",
    "write_labeled_histograms",
]


def parse_histogram_line(line: str) -> VoteHistogram:
    """Parse one comma-separated count line into a histogram."""
    try:
        counts = tuple(int(part.strip()) for part in line.split(","))
    except ValueError as exc:
        raise ValueError(f"not a comma-separated integer list: {line!r}") from exc
    return VoteHistogram(counts)


def _content_lines(path: str | Path) -> Iterable[tuple[int, str]]:
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def read_histograms(path: str | Path) -> list[VoteHistogram]:
    """Read a histogram file; raises with the offending line number."""
    out = []
    for lineno, line in _content_lines(path):
        try:
            out.append(parse_histogram_line(line))
        except ValueError as exc:
            raise ValueError(f"{path}, line {lineno}: {exc}") from exc
    if not out:
        raise ValueError(f"{path}: no histograms found")
    return out


def write_histograms(path: str | Path, hists: Iterable[VoteHistogram]) -> None:
    lines = [",".join(str(v) for v in h.counts) for h in hists]
    Path(path).write_text("\n".join(lines) + "\n")


def read_labeled_histograms(path: str | Path) -> list[LabeledHistogram]:
    """Read the labeled variant: counts, then ``;minority``/``;majority``."""
    out = []
    for lineno, line in _content_lines(path):
        try:
            body, _, tag = line.partition(";")
            if not tag:
                raise ValueError("missing ';minority' or ';majority' tag")
            tag = tag.strip().lower()
            if tag not in ("minority", "majority"):
                raise ValueError(f"unknown group tag {tag!r}")
            hist = parse_histogram_line(body)
        except ValueError as exc:
            raise ValueError(f"{path}, line {lineno}: {exc}") from exc
        out.append(
            LabeledHistogram(
                histogram=hist,
                group=Group.MINORITY if tag == "minority" else Group.MAJORITY,
                id=f"line-{lineno}",
            )
        )
    if not out:
        raise ValueError(f"{path}: no histograms found")
    return out


def write_labeled_histograms(
    path: str | Path, members: Iterable[LabeledHistogram]
) -> None:
    lines = []
    for member in members:
        counts = ",".join(str(int(v)) for v in member.histogram.as_array())
        lines.append(f"{counts};{member.group.value}")
    Path(path).write_text("\n".join(lines) + "\n")
