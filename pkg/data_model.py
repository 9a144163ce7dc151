"""Consumption matrices, the wide CSV format, and the seasonal calendar.

A missing reading is the masked sentinel of a numpy masked array (``MISSING``);
it never stands in as a number.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Optional, Sequence, Union

import numpy as np  # type: ignore
import pandas as pd  # type: ignore

from exceptions import DataFormatError, InvalidInputError
from ntl_types import Season

logger = logging.getLogger(__name__)

MISSING = np.ma.masked


@dataclass(frozen=True)
class ConsumptionMatrix:
    consumer_ids: tuple[str, ...]
    labels: np.ndarray
    dates: tuple[date, ...]
    values: np.ma.MaskedArray

    def __post_init__(self) -> None:
        data = np.array(np.ma.getdata(self.values), dtype=np.float64, copy=True, ndmin=2)
        mask = np.array(np.ma.getmaskarray(self.values), dtype=bool, copy=True, ndmin=2)
        if data.size == 0 and data.shape[0] == 1 and len(self.consumer_ids) == 0:
            data = data.reshape(0, len(self.dates))
            mask = mask.reshape(0, len(self.dates))
        mask |= np.isnan(data)
        data[mask] = np.nan
        labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)

        object.__setattr__(self, "consumer_ids", tuple(str(c) for c in self.consumer_ids))
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", np.ma.MaskedArray(data, mask=mask, fill_value=np.nan))
        self._validate()

    def _validate(self) -> None:
        rows, cols = self.values.shape
        if not rows == len(self.consumer_ids) == len(self.labels):
            raise DataFormatError(
                f"{rows} value rows, {len(self.consumer_ids)} consumer ids and {len(self.labels)} labels"
            )
        if cols != len(self.dates):
            raise DataFormatError(f"{cols} value columns for {len(self.dates)} dates")
        if np.any((self.labels != 0) & (self.labels != 1)):
            row = int(np.flatnonzero((self.labels != 0) & (self.labels != 1))[0])
            raise DataFormatError("label outside {0,1}", row=row, column="label")
        check_dates(self.dates)
        data = np.ma.getdata(self.values)
        present = ~self.missing
        bad = present & (~np.isfinite(data) | (data < 0))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise DataFormatError(
                f"reading {data[i, j]!r} is not a finite non-negative number", row=int(i),
                column=self.dates[j].isoformat()
            )

    @classmethod
    def from_dense(
            cls, consumer_ids: Sequence[str], labels: Sequence[int], dates: Sequence[date], values: np.ndarray
    ) -> ConsumptionMatrix:
        """Build a matrix from a plain array in which NaN marks a missing reading."""
        values = np.asarray(values, dtype=np.float64)
        return cls(tuple(consumer_ids), np.asarray(labels), tuple(dates), np.ma.masked_invalid(values))

    @property
    def n_consumers(self) -> int:
        return self.values.shape[0]

    @property
    def n_days(self) -> int:
        return self.values.shape[1]

    @property
    def missing(self) -> np.ndarray:
        return np.ma.getmaskarray(self.values)

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    @property
    def is_complete(self) -> bool:
        return not self.missing.any()

    def dense(self) -> np.ndarray:
        """The readings as a plain array; only defined once nothing is missing."""
        if not self.is_complete:
            i, j = np.argwhere(self.missing)[0]
            raise DataFormatError("MISSING cell present", row=int(i), column=self.dates[j].isoformat())
        return np.array(np.ma.getdata(self.values), copy=True)

    def row(self, index: int) -> np.ma.MaskedArray:
        return self.values[index].copy()

    def select_rows(self, rows: Iterable[int]) -> ConsumptionMatrix:
        rows = np.asarray(list(rows), dtype=np.intp)
        return ConsumptionMatrix(
            tuple(self.consumer_ids[i] for i in rows), self.labels[rows], self.dates, self.values[rows]
        )

    def with_values(self, values: Union[np.ndarray, np.ma.MaskedArray]) -> ConsumptionMatrix:
        return ConsumptionMatrix(self.consumer_ids, self.labels, self.dates, values)


def check_dates(dates: Sequence[date]) -> None:
    for previous, current in zip(dates, dates[1:]):
        step = (current - previous).days
        if step <= 0:
            raise DataFormatError("non-monotone dates", column=current.isoformat())
        if step != 1:
            raise DataFormatError("dates not contiguous", column=current.isoformat())


@dataclass(frozen=True)
class CsvSchema:
    id_column: str = "consumer_id"
    label_column: str = "label"
    marker_columns: tuple[str, ...] = ("synthetic",)
    missing_tokens: tuple[str, ...] = ("", "NaN")


def load_csv(path: str, schema: Optional[CsvSchema] = None) -> ConsumptionMatrix:
    """Read a wide consumption file: ``consumer_id,label,<ISO dates...>``."""
    schema = schema or CsvSchema()
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataFormatError("malformed header: empty file")
    except pd.errors.ParserError as exc:
        raise DataFormatError(f"malformed file: {exc}")

    header = [str(name).strip() for name in frame.iloc[0].tolist()]
    if len(header) < 3 or header[0] != schema.id_column or header[1] != schema.label_column:
        raise DataFormatError(
            f"malformed header: expected {schema.id_column},{schema.label_column},<dates>, got {header[:3]}"
        )
    first = 2
    while first < len(header) and header[first] in schema.marker_columns:
        first += 1

    dates = []
    for name in header[first:]:
        try:
            dates.append(date.fromisoformat(name))
        except ValueError:
            raise DataFormatError(f"malformed header: {name!r} is not an ISO-8601 date", column=name)
    if not dates:
        raise DataFormatError("malformed header: no date columns")
    check_dates(dates)

    body = frame.iloc[1:].to_numpy(dtype=object)
    labels = []
    if any(not isinstance(cell, str) for cell in body.flat):
        row = next(i for i, cells in enumerate(body) if any(not isinstance(c, str) for c in cells))
        raise DataFormatError("row is shorter than the header", row=row)
    for i, label in enumerate(body[:, 1]):
        label = label.strip()
        if label not in ("0", "1"):
            raise DataFormatError(f"label {label!r} outside {{0,1}}", row=i, column=schema.label_column)
        labels.append(int(label))

    values = np.full((len(body), len(dates)), np.nan)
    for i, cells in enumerate(body[:, first:]):
        for j, cell in enumerate(cells):
            cell = cell.strip()
            if cell in schema.missing_tokens:
                continue
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataFormatError(f"non-numeric value {cell!r}", row=i, column=header[first + j])
            if not np.isfinite(values[i, j]):
                raise DataFormatError(f"non-finite value {cell!r}", row=i, column=header[first + j])

    matrix = ConsumptionMatrix.from_dense([c.strip() for c in body[:, 0]], labels, dates, values)
    logger.debug("loaded %s: %d consumers x %d days, %d missing", path, matrix.n_consumers, matrix.n_days,
                 matrix.n_missing)
    return matrix


def save_csv(
        matrix: ConsumptionMatrix,
        path: str,
        markers: Optional[dict[str, Sequence[int]]] = None,
        schema: Optional[CsvSchema] = None,
) -> None:
    """Write `matrix` in the wide format; values use the shortest exact decimal form."""
    schema = schema or CsvSchema()
    markers = markers or {}
    data = np.ma.getdata(matrix.values)
    mask = matrix.missing
    cells = [
        ["" if missing else repr(float(value)) for value, missing in zip(row, row_mask)]
        for row, row_mask in zip(data, mask)
    ]
    columns = [d.isoformat() for d in matrix.dates]
    frame = pd.DataFrame(cells, columns=columns, dtype=object)
    for position, (name, flags) in enumerate(markers.items()):
        frame.insert(position, name, [str(int(flag)) for flag in flags])
    frame.insert(0, schema.label_column, [str(int(label)) for label in matrix.labels])
    frame.insert(0, schema.id_column, list(matrix.consumer_ids))
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def season_of(day: date, start_month: int = 12) -> tuple[int, Season]:
    """Map a date to its (year, season) block.

    Blocks are three months long and the first block of a cycle starts in
    `start_month`. The year of a block is the calendar year its first month
    falls in, so 2015-12-15 and 2016-01-15 share the block (2015, WINTER).
    """
    offset = (day.month - start_month) % 12
    season = offset // 3
    block_start_month = (start_month - 1 + 3 * season) % 12 + 1
    year = day.year if day.month >= block_start_month else day.year - 1
    return year, Season(season)


@dataclass(frozen=True)
class SeasonCalendar:
    dates: tuple[date, ...]
    start_month: int = 12
    years: np.ndarray = field(init=False, repr=False)
    seasons: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.start_month <= 12:
            raise InvalidInputError(f"start month {self.start_month} is not a month")
        blocks = [season_of(day, self.start_month) for day in self.dates]
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "years", np.array([y for y, _ in blocks], dtype=np.int64))
        object.__setattr__(self, "seasons", np.array([int(s) for _, s in blocks], dtype=np.int64))

    @classmethod
    def for_matrix(cls, matrix: ConsumptionMatrix, start_month: int = 12) -> SeasonCalendar:
        return cls(matrix.dates, start_month)

    def __len__(self) -> int:
        return len(self.dates)

    def block_of(self, column: int) -> tuple[int, Season]:
        return int(self.years[column]), Season(int(self.seasons[column]))

    def blocks(self) -> list[tuple[int, Season]]:
        """Distinct blocks in time order."""
        seen: dict[tuple[int, Season], None] = {}
        for column in range(len(self.dates)):
            seen.setdefault(self.block_of(column), None)
        return list(seen)

    def search_blocks(self, column: int, search_size: int) -> list[tuple[int, Season]]:
        """The `search_size` blocks of the column's season nearest to it in time.

        Both temporal directions are searched; at equal distance the earlier
        block comes first.
        """
        if search_size < 1:
            raise InvalidInputError("search size must be at least 1")
        year, season = self.block_of(column)
        years = sorted({y for y, s in self.blocks() if s == season}, key=lambda y: (abs(y - year), y))
        return [(y, season) for y in years[:search_size]]

    def block_mask(self, blocks: Iterable[tuple[int, Season]]) -> np.ndarray:
        mask = np.zeros(len(self.dates), dtype=bool)
        for year, season in blocks:
            mask |= (self.years == year) & (self.seasons == int(season))
        return mask

    def season_mask(self, season: Season) -> np.ndarray:
        return self.seasons == int(season)


@dataclass(frozen=True)
class GapDescriptor:
    """A maximal run of missing readings: `length` days starting at column `start`."""

    row: int
    start: int
    length: int

    @property
    def stop(self) -> int:
        return self.start + self.length


def row_gaps(mask: np.ndarray, row: int = 0) -> list[GapDescriptor]:
    padded = np.concatenate(([False], np.asarray(mask, dtype=bool), [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [GapDescriptor(row, int(a), int(b - a)) for a, b in zip(starts, stops)]


def detect_gaps(matrix: ConsumptionMatrix) -> list[GapDescriptor]:
    """All maximal missing runs, sorted by (row, start)."""
    gaps: list[GapDescriptor] = []
    for row, mask in enumerate(matrix.missing):
        if mask.any():
            gaps.extend(row_gaps(mask, row))
    return gaps


@dataclass(frozen=True)
class MinMaxScaling:
    """Per-column min/max record; constant columns map to 0."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> MinMaxScaling:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] == 0:
            raise InvalidInputError("scaling needs a non-empty 2-d matrix")
        if np.isnan(values).any():
            raise DataFormatError("MISSING cell present")
        return cls(values.min(axis=0), values.max(axis=0))

    @property
    def span(self) -> np.ndarray:
        return self.maximum - self.minimum

    def transform(self, values: np.ndarray, clip: bool = False) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.minimum.shape[0]:
            raise InvalidInputError(f"expected {self.minimum.shape[0]} columns, got {values.shape[-1]}")
        span = self.span
        safe = np.where(span > 0, span, 1.0)
        scaled = np.where(span > 0, (values - self.minimum) / safe, 0.0)
        return np.clip(scaled, 0.0, 1.0) if clip else scaled

    def inverse(self, scaled: np.ndarray) -> np.ndarray:
        return np.asarray(scaled, dtype=np.float64) * self.span + self.minimum

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> MinMaxScaling:
        return cls(np.asarray(data["minimum"], dtype=np.float64), np.asarray(data["maximum"], dtype=np.float64))


def minmax_normalize(matrix: Union[ConsumptionMatrix, np.ndarray]) -> tuple[np.ndarray, MinMaxScaling]:
    values = matrix.dense() if isinstance(matrix, ConsumptionMatrix) else np.asarray(matrix, dtype=np.float64)
    scaling = MinMaxScaling.fit(values)
    return scaling.transform(values), scaling


def season_profile(matrix: ConsumptionMatrix, calendar: Optional[SeasonCalendar] = None) -> pd.DataFrame:
    """Mean daily reading per (year, season) block over all consumers."""
    calendar = calendar or SeasonCalendar.for_matrix(matrix)
    records = []
    for year, season in calendar.blocks():
        columns = calendar.block_mask([(year, season)])
        block = matrix.values[:, columns]
        records.append({
            "year": year,
            "season": season.name.lower(),
            "days": int(columns.sum()),
            "mean_kwh": float(block.mean()) if block.count() else float("nan"),
        })
    return pd.DataFrame.from_records(records, columns=["year", "season", "days", "mean_kwh"])
