"""
Timing traces: ingestion, validation and summary statistics.

A trace is the ordered record of convergence times t_1..t_n for a
sequence of queries.  Order matters (the sequential baseline monitor
consumes it in order), so nothing here ever sorts or drops samples.

Standard deviations use the population convention (divide by n).  The
sigma-multiple thresholds built on them are descriptive cut-offs, not
inferential estimates; with the sample convention thresholds would sit
slightly higher.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .errors import EmptyTrace, OutOfRange, ParseError

Column = Union[int, str]


@dataclass(frozen=True, eq=False)
class TimingTrace:
    """Immutable, order-preserving sample of convergence times.

    Parameters
    ----------
    samples : sequence of float
        Non-negative, finite times in ingestion order.
    unit : str
        Opaque unit label (no conversion is ever performed).
    source : str
        Free-text provenance.
    meta : dict
        Extra provenance produced by generators (seed, failed runs, ...).
    """

    samples: np.ndarray
    unit: str = ""
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float).ravel()
        if arr.size == 0:
            raise EmptyTrace("trace must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trace samples must be finite")
        if np.any(arr < 0):
            raise ValueError("trace samples must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    def __iter__(self):
        return iter(self.samples.tolist())

    def __eq__(self, other):
        if not isinstance(other, TimingTrace):
            return NotImplemented
        return (self.unit == other.unit and self.source == other.source
                and np.array_equal(self.samples, other.samples))

    __hash__ = None

    def head(self, n: int) -> "TimingTrace":
        """First ``n`` samples as a new trace."""
        if not 1 <= n <= len(self):
            raise OutOfRange(f"n={n} outside [1, {len(self)}]")
        return TimingTrace(self.samples[:n], self.unit, f"{self.source}[:{n}]")


@dataclass(frozen=True)
class TraceSummary:
    count: int
    mean: float
    std_dev: float
    max: float
    min: float


def _parse_cell(text, row):
    cell = text.strip()
    if cell == "":
        raise ParseError(row, "missing value")
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(row, f"not a number: {cell!r}") from None
    if not math.isfinite(value):
        raise ParseError(row, f"non-finite value: {cell!r}")
    if value < 0:
        raise ParseError(row, f"negative value: {cell!r}")
    return value


def _looks_numeric(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_trace(path, column: Column = 0, unit: str = "") -> TimingTrace:
    """Read one numeric column of a CSV file into a :class:`TimingTrace`.

    The header row is optional and is detected by the designated cell of
    the first non-comment row failing to parse as a number.  Lines whose
    first non-blank character is ``#`` are ignored.  A column given by
    name requires a header.

    Blank or missing cells are errors, never skipped: silently dropping
    rows would bias the tail.  ``ParseError.row`` is the 1-based line
    number in the file.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such trace file: {path}")

    values = []
    index = column if isinstance(column, int) else None
    first = True
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            cells = next(csv.reader([line]))
            if first:
                first = False
                if index is None:
                    names = [c.strip() for c in cells]
                    if column not in names:
                        raise ParseError(lineno, f"column {column!r} not in header {names}")
                    index = names.index(column)
                    continue
                if index >= len(cells):
                    raise ParseError(lineno, f"no column {index}")
                if not _looks_numeric(cells[index].strip()):
                    continue
            if index >= len(cells):
                raise ParseError(lineno, "missing value")
            values.append(_parse_cell(cells[index], lineno))

    if not values:
        raise EmptyTrace(f"{path} contains no samples")
    return TimingTrace(np.array(values), unit=unit, source=str(path))


def write_trace(trace: TimingTrace, path, header: str = "time") -> None:
    """Write a trace as a single-column CSV that :func:`load_trace` reads back exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"{header}\n")
        for x in trace.samples.tolist():
            fh.write(f"{x!r}\n")


def summarize(trace: TimingTrace) -> TraceSummary:
    x = trace.samples
    if x.size == 0:
        raise EmptyTrace("cannot summarize an empty trace")
    mean = float(np.mean(x))
    lo, hi = float(x.min()), float(x.max())
    # float rounding can push the mean of a near-constant trace just outside [min, max]
    mean = min(max(mean, lo), hi)
    return TraceSummary(
        count=int(x.size),
        mean=mean,
        std_dev=float(np.std(x, ddof=0)),
        max=hi,
        min=lo,
    )


def max_prefix(trace: TimingTrace, n: int) -> float:
    """Maximum of the first ``n`` samples (the running worst case M_n)."""
    if not 1 <= n <= len(trace):
        raise OutOfRange(f"n={n} outside [1, {len(trace)}]")
    return float(trace.samples[:n].max())


def as_trace(data: Union[TimingTrace, Iterable[float]], unit: str = "") -> TimingTrace:
    if isinstance(data, TimingTrace):
        return data
    return TimingTrace(np.asarray(list(data), dtype=float), unit=unit)
