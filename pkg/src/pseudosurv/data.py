"""Censored survival datasets: records, classification, CSV input and output.

Two record kinds are supported. Right-censored records carry an observed
time and an event indicator. Interval records carry a bracket [left, right]
that contains the event time, with ``right = inf`` meaning right-censored,
``left = 0`` (with finite right) meaning left-censored, and ``left == right``
meaning an exactly observed event. A `Dataset` holds an ordered sequence of
one record kind plus an optional covariate matrix aligned row by row.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import EmptyInput, MalformedInterval, ParseError

LEFT_CENSORED = "left-censored"
STRICT_INTERVAL = "strictly-interval"
RIGHT_CENSORED = "right-censored"
EXACT = "exact"

INTERVAL_CLASSES = (LEFT_CENSORED, STRICT_INTERVAL, RIGHT_CENSORED, EXACT)

KIND_RIGHT = "right-censored"
KIND_INTERVAL = "interval"


@dataclass(frozen=True)
class RightCensoredRecord:
    """One subject observed under right-censoring.

    Parameters
    ----------
    time : float
        Observed time, the minimum of the event and censoring times.
    status : int
        Event indicator, 1 if the event was observed and 0 if censored.
    """

    time: float
    status: int

    def __post_init__(self):
        if not math.isfinite(self.time):
            raise MalformedInterval(f"time must be finite, got {self.time}")
        if self.time < 0:
            raise MalformedInterval(f"time must be nonnegative, got {self.time}")
        if self.status not in (0, 1):
            raise ParseError(f"status must be 0 or 1, got {self.status!r}")


@dataclass(frozen=True)
class IntervalRecord:
    """One subject observed under mixed interval-censoring.

    The bracket [left, right] contains the event time. The censoring class
    is derived from the endpoints and never stored separately.
    """

    left: float
    right: float

    def __post_init__(self):
        if not math.isfinite(self.left):
            raise MalformedInterval(f"left endpoint must be finite, got {self.left}")
        if self.left < 0:
            raise MalformedInterval(f"left endpoint must be nonnegative, got {self.left}")
        if math.isnan(self.right):
            raise MalformedInterval("right endpoint is NaN")
        if self.right < self.left:
            raise MalformedInterval(
                f"right endpoint {self.right} is smaller than left endpoint {self.left}"
            )
        if self.left == self.right == 0.0:
            # Defined (the density degenerates to the hazard at 0) but unusual
            # enough that silent acceptance would hide data errors.
            warnings.warn("exact observation at time 0", stacklevel=2)

    @property
    def censoring_class(self) -> str:
        """The unique censoring class implied by the endpoints."""
        if math.isinf(self.right):
            return RIGHT_CENSORED
        if self.left == self.right:
            return EXACT
        if self.left == 0.0:
            return LEFT_CENSORED
        return STRICT_INTERVAL


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of records of one kind, with optional covariates.

    Record order is significant: pseudo-observation l must stay aligned with
    covariate row l, so no operation in this package ever reorders records.

    Parameters
    ----------
    kind : str
        Either ``"right-censored"`` or ``"interval"``.
    records : tuple
        Records, all of the kind named by ``kind``.
    covariates : numpy.ndarray or None
        Matrix with one row per record (a design matrix when an intercept
        column was requested at load time).
    covariate_names : tuple of str or None
        Column names for ``covariates``.
    """

    kind: str
    records: tuple
    covariates: np.ndarray | None = None
    covariate_names: tuple | None = None

    def __post_init__(self):
        if self.kind not in (KIND_RIGHT, KIND_INTERVAL):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        want = RightCensoredRecord if self.kind == KIND_RIGHT else IntervalRecord
        for rec in self.records:
            if not isinstance(rec, want):
                raise ValueError(
                    f"record {rec!r} does not match dataset kind {self.kind!r}"
                )
        if self.covariates is not None:
            cov = np.asarray(self.covariates, dtype=float)
            if cov.ndim != 2:
                raise ValueError("covariates must be a 2-D matrix")
            if cov.shape[0] != len(self.records):
                raise ValueError(
                    f"covariate rows ({cov.shape[0]}) must equal record count "
                    f"({len(self.records)})"
                )
            if np.isnan(cov).any():
                raise ValueError("covariates contain missing values")
            object.__setattr__(self, "covariates", cov)
            if self.covariate_names is not None and len(self.covariate_names) != cov.shape[1]:
                raise ValueError("covariate_names length must match covariate columns")

    @property
    def n(self) -> int:
        return len(self.records)

    @cached_property
    def times(self) -> np.ndarray:
        """Observed times, right-censored datasets only."""
        self._require(KIND_RIGHT)
        return np.array([r.time for r in self.records], dtype=float)

    @cached_property
    def status(self) -> np.ndarray:
        """Event indicators, right-censored datasets only."""
        self._require(KIND_RIGHT)
        return np.array([r.status for r in self.records], dtype=int)

    @cached_property
    def left(self) -> np.ndarray:
        """Left endpoints, interval datasets only."""
        self._require(KIND_INTERVAL)
        return np.array([r.left for r in self.records], dtype=float)

    @cached_property
    def right(self) -> np.ndarray:
        """Right endpoints (inf allowed), interval datasets only."""
        self._require(KIND_INTERVAL)
        return np.array([r.right for r in self.records], dtype=float)

    @cached_property
    def classes(self) -> tuple:
        """Censoring class per record, interval datasets only."""
        self._require(KIND_INTERVAL)
        return tuple(r.censoring_class for r in self.records)

    @cached_property
    def class_counts(self) -> Counter:
        """Counts per censoring class (interval) or per status (right-censored)."""
        if self.kind == KIND_INTERVAL:
            counts = Counter({c: 0 for c in INTERVAL_CLASSES})
            counts.update(self.classes)
        else:
            counts = Counter({"event": 0, "censored": 0})
            counts.update("event" if r.status == 1 else "censored" for r in self.records)
        return counts

    def _require(self, kind):
        if self.kind != kind:
            raise ValueError(f"operation requires a {kind} dataset, got {self.kind}")


def right_censored_dataset(times, status, covariates=None, covariate_names=None):
    """Build a right-censored `Dataset` from parallel arrays."""
    records = tuple(
        RightCensoredRecord(float(t), int(s)) for t, s in zip(times, status, strict=True)
    )
    return Dataset(KIND_RIGHT, records, covariates, _as_names(covariate_names))


def interval_dataset(left, right, covariates=None, covariate_names=None):
    """Build an interval `Dataset` from parallel endpoint arrays."""
    records = tuple(
        IntervalRecord(float(a), float(b)) for a, b in zip(left, right, strict=True)
    )
    return Dataset(KIND_INTERVAL, records, covariates, _as_names(covariate_names))


def recode_right_censored_as_interval(dataset: Dataset) -> Dataset:
    """Re-express right-censored data as interval records.

    Events become exact records (t, t); censored observations become
    right-censored intervals (t, inf). Covariates carry over unchanged.
    This is the encoding under which a piecewise-hazard fit can be compared
    against Kaplan-Meier machinery on the same sample.
    """
    dataset._require(KIND_RIGHT)
    left = dataset.times
    right = np.where(dataset.status == 1, dataset.times, np.inf)
    return interval_dataset(left, right, dataset.covariates, dataset.covariate_names)


def load_right_censored_dataset(source) -> Dataset:
    """Load a right-censored dataset from CSV.

    The file must have a header row naming at least ``time,status``; any
    further columns are read as dense real covariates. Row indices in error
    messages are 1-based over data rows.

    Parameters
    ----------
    source : path-like, file-like, or iterable of lines

    Returns
    -------
    Dataset
    """
    header, rows = _read_csv(source)
    _check_header(header, ("time", "status"))
    records = []
    cov_rows = []
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} cells, got {len(row)}", row=i)
        time = _parse_float(row[0], i, "time")
        raw_status = _parse_float(row[1], i, "status")
        if raw_status not in (0.0, 1.0):
            raise ParseError(f"row {i}: status must be 0 or 1, got {row[1]!r}", row=i)
        records.append(RightCensoredRecord(time, int(raw_status)))
        cov_rows.append([_parse_float(c, i, name) for c, name in zip(row[2:], header[2:])])
    return Dataset(
        KIND_RIGHT,
        tuple(records),
        _covariate_matrix(cov_rows, header),
        _as_names(header[2:]) if len(header) > 2 else None,
    )


def load_interval_dataset(source) -> Dataset:
    """Load an interval-censored dataset from CSV.

    The header must name at least ``left,right``. The right endpoint
    accepts ``inf`` in any capitalization, ``+inf``, or an empty cell for
    an infinite endpoint; the emitted form on save is always ``inf``.
    Classification into censoring classes is derived per record.
    """
    header, rows = _read_csv(source)
    _check_header(header, ("left", "right"))
    records = []
    cov_rows = []
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} cells, got {len(row)}", row=i)
        left = _parse_float(row[0], i, "left")
        right = math.inf if row[1].strip() == "" else _parse_float(row[1], i, "right")
        try:
            records.append(IntervalRecord(left, right))
        except MalformedInterval as exc:
            raise MalformedInterval(f"row {i}: {exc}") from exc
        cov_rows.append([_parse_float(c, i, name) for c, name in zip(row[2:], header[2:])])
    return Dataset(
        KIND_INTERVAL,
        tuple(records),
        _covariate_matrix(cov_rows, header),
        _as_names(header[2:]) if len(header) > 2 else None,
    )


def save_dataset(dataset: Dataset, target) -> None:
    """Write a dataset back to CSV in the format the loaders accept.

    Floats are written with shortest round-trip precision, so a
    load/save/load cycle reproduces records and classes exactly.
    """
    close = False
    if isinstance(target, (str, Path)):
        handle = open(target, "w", newline="", encoding="utf-8")
        close = True
    else:
        handle = target
    try:
        writer = csv.writer(handle)
        names = list(dataset.covariate_names or ())
        if dataset.kind == KIND_RIGHT:
            writer.writerow(["time", "status"] + names)
            for rec, cov in _rows_with_covariates(dataset):
                writer.writerow([repr(rec.time), rec.status] + cov)
        else:
            writer.writerow(["left", "right"] + names)
            for rec, cov in _rows_with_covariates(dataset):
                right = "inf" if math.isinf(rec.right) else repr(rec.right)
                writer.writerow([repr(rec.left), right] + cov)
    finally:
        if close:
            handle.close()


def censoring_summary(dataset: Dataset) -> dict:
    """Proportions of records per censoring class.

    For interval datasets the keys are the four censoring classes; for
    right-censored datasets they are ``event`` and ``censored``. The values
    sum to 1.

    Raises
    ------
    EmptyInput
        If the dataset has no records.
    """
    if dataset.n == 0:
        raise EmptyInput("cannot summarize an empty dataset")
    return {k: v / dataset.n for k, v in dataset.class_counts.items()}


def interval_width_summary(dataset: Dataset) -> dict:
    """Mean bracket widths of an interval dataset, under two conventions.

    ``mean_width_strict`` averages right minus left over strictly-interval
    records only; ``mean_width_finite`` averages over every record with a
    finite right endpoint (left-censored, strictly-interval, and exact).
    Published summaries of visit-process designs use sometimes one and
    sometimes the other, so both are reported. A convention with no
    qualifying records yields NaN.
    """
    if dataset.n == 0:
        raise EmptyInput("cannot summarize an empty dataset")
    dataset._require(KIND_INTERVAL)
    widths = dataset.right - dataset.left
    strict = np.array([c == STRICT_INTERVAL for c in dataset.classes])
    finite = np.isfinite(dataset.right)
    return {
        "mean_width_strict": float(widths[strict].mean()) if strict.any() else math.nan,
        "mean_width_finite": float(widths[finite].mean()) if finite.any() else math.nan,
    }


def _read_csv(source):
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    elif hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        rows = list(csv.reader(iter(source)))
    if not rows:
        raise ParseError("missing header row", row=0)
    header = [c.strip() for c in rows[0]]
    return header, rows[1:]


def _check_header(header, expected):
    got = tuple(c.lower() for c in header[: len(expected)])
    if got != expected:
        raise ParseError(
            f"header must start with {','.join(expected)}, got {','.join(header) or '(empty)'}",
            row=0,
        )


def _parse_float(cell, row, name):
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: cannot parse {name}={cell!r} as a number", row=row) from None
    if math.isnan(value):
        raise ParseError(f"row {row}: missing value in column {name}", row=row)
    return value


def _covariate_matrix(cov_rows, header):
    if len(header) <= 2:
        return None
    return np.array(cov_rows, dtype=float)


def _as_names(names):
    if names is None:
        return None
    return tuple(str(x) for x in names)


def _rows_with_covariates(dataset):
    if dataset.covariates is None:
        for rec in dataset.records:
            yield rec, []
    else:
        for rec, row in zip(dataset.records, dataset.covariates):
            yield rec, [repr(float(v)) for v in row]
