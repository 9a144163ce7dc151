"""Seasonal DTW-based imputation of long runs of missing readings.

A gap of `T` days is filled from the windows that follow (or precede) the
in-season subsequences most similar to the readings bordering the gap.
Similarity is scored with plain DTW and with DTW on the derivative transform.
"""
from __future__ import annotations

import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np  # type: ignore

from data_model import ConsumptionMatrix, GapDescriptor, SeasonCalendar, detect_gaps, row_gaps
from exceptions import InvalidInputError, NoQueryWindow
from ntl_types import FillMethod, LocalCost, Side

logger = logging.getLogger(__name__)

MIN_QUERY_LENGTH = 3


@dataclass(frozen=True)
class DtwCostMatrix:
    """Accumulated cost grid; the last cell is the DTW distance."""

    costs: np.ndarray

    @property
    def distance(self) -> float:
        return float(self.costs[-1, -1])


@dataclass(frozen=True)
class WindowMatch:
    position: int
    dtw_cost: float
    ddtw_cost: float
    side: Side
    length: int


@dataclass
class ImputationSummary:
    gaps_filled: int = 0
    fallback_counts: Counter = field(default_factory=Counter)
    wall_time_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "gaps_filled": self.gaps_filled,
            "fallback_counts": {method.value: self.fallback_counts.get(method.value, 0) for method in FillMethod},
            "wall_time_ms": self.wall_time_ms,
        }


def derivative_transform(x: Sequence[float]) -> np.ndarray:
    """Derivative estimate at the interior points of `x` (along the last axis)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 3:
        raise InvalidInputError("the derivative transform needs at least 3 values")
    return ((x[..., 1:-1] - x[..., :-2]) + (x[..., 2:] - x[..., :-2]) / 2) / 2


def _prepare(sequences: np.ndarray, local_cost: LocalCost) -> np.ndarray:
    if sequences.shape[-1] == 0:
        raise InvalidInputError("DTW needs non-empty sequences")
    if local_cost is LocalCost.DERIVATIVE:
        return derivative_transform(sequences)
    return sequences


def _accumulate(local: np.ndarray) -> np.ndarray:
    """Run the three-move recurrence over a stack of local-cost grids.

    Cells on one anti-diagonal only depend on the two previous anti-diagonals,
    so each diagonal is filled in a single vectorized step.
    """
    k, n, m = local.shape
    acc = np.full((k, n + 1, m + 1), np.inf)
    acc[:, 0, 0] = 0.0
    for d in range(2, n + m + 1):
        i = np.arange(max(1, d - m), min(n, d - 1) + 1)
        j = d - i
        best = np.minimum(np.minimum(acc[:, i - 1, j - 1], acc[:, i - 1, j]), acc[:, i, j - 1])
        acc[:, i, j] = local[:, i - 1, j - 1] + best
    return acc[:, 1:, 1:]


def accumulated_cost(a: Sequence[float], b: Sequence[float], local_cost: LocalCost = LocalCost.SQUARED) -> DtwCostMatrix:
    a = _prepare(np.asarray(a, dtype=np.float64).reshape(-1), local_cost)
    b = _prepare(np.asarray(b, dtype=np.float64).reshape(-1), local_cost)
    local = (a[:, None] - b[None, :]) ** 2
    return DtwCostMatrix(_accumulate(local[None])[0])


def dtw_cost(a: Sequence[float], b: Sequence[float], local_cost: LocalCost = LocalCost.SQUARED) -> float:
    return accumulated_cost(a, b, local_cost).distance


def dtw_costs(query: Sequence[float], windows: np.ndarray, local_cost: LocalCost = LocalCost.SQUARED) -> np.ndarray:
    """DTW distance between `query` and every row of `windows`."""
    query = _prepare(np.asarray(query, dtype=np.float64).reshape(-1), local_cost)
    windows = np.asarray(windows, dtype=np.float64)
    if len(windows) == 0:
        return np.zeros(0)
    windows = _prepare(windows, local_cost)
    local = (query[None, :, None] - windows[:, None, :]) ** 2
    return _accumulate(local)[:, -1, -1]


def _query_window(values: np.ndarray, missing: np.ndarray, gap: GapDescriptor, side: Side) -> tuple[int, np.ndarray]:
    """Start and values of the complete run bordering the gap, at most `T` long."""
    n = len(values)
    length = 0
    if side is Side.BEFORE:
        while length < gap.length and gap.start - length - 1 >= 0 and not missing[gap.start - length - 1]:
            length += 1
        start = gap.start - length
    else:
        while length < gap.length and gap.stop + length < n and not missing[gap.stop + length]:
            length += 1
        start = gap.stop
    if length < MIN_QUERY_LENGTH:
        raise NoQueryWindow(f"no complete query window {side.name.lower()} gap at column {gap.start}")
    return start, values[start:start + length]


def scan_windows(
        series: np.ma.MaskedArray,
        gap: GapDescriptor,
        cal: SeasonCalendar,
        search_size: int,
        side: Side,
) -> list[WindowMatch]:
    """Score every eligible in-season window against the query on `side`.

    A window is eligible when it and its completion window are complete and lie
    in the allowed seasonal blocks, and it overlaps neither the gap nor the query.
    """
    values = np.asarray(np.ma.getdata(series), dtype=np.float64)
    missing = np.ma.getmaskarray(series)
    if len(cal) != len(values):
        raise InvalidInputError(f"calendar covers {len(cal)} days, series has {len(values)}")
    query_start, query = _query_window(values, missing, gap, side)
    length, span = len(query), len(query) + gap.length

    usable = ~missing & cal.block_mask(cal.search_blocks(gap.start, search_size))
    counts = np.concatenate(([0], np.cumsum(usable)))
    if side is Side.BEFORE:
        positions = np.arange(0, len(values) - span + 1)
        span_starts = positions
    else:
        positions = np.arange(gap.length, len(values) - length + 1)
        span_starts = positions - gap.length
    if len(positions) == 0:
        return []
    ok = counts[span_starts + span] - counts[span_starts] == span
    ends = positions + length
    ok &= ~((positions < gap.stop) & (ends > gap.start))
    ok &= ~((positions < query_start + length) & (ends > query_start))
    positions = positions[ok]
    if len(positions) == 0:
        return []

    windows = values[positions[:, None] + np.arange(length)]
    plain = dtw_costs(query, windows, LocalCost.SQUARED)
    derivative = dtw_costs(query, windows, LocalCost.DERIVATIVE)
    return [
        WindowMatch(int(p), float(c), float(dc), side, length)
        for p, c, dc in zip(positions, plain, derivative)
    ]


def passes_derivative_filter(match: WindowMatch) -> bool:
    # An exact copy (zero plain cost) cannot be beaten by the derivative cost.
    return match.ddtw_cost < match.dtw_cost or match.dtw_cost == 0.0


def find_candidates(
        series: np.ma.MaskedArray,
        gap: GapDescriptor,
        cal: SeasonCalendar,
        search_size: int,
        side: Side,
) -> list[WindowMatch]:
    return [m for m in scan_windows(series, gap, cal, search_size, side) if passes_derivative_filter(m)]


def completion_window(values: np.ndarray, match: WindowMatch, gap_length: int) -> np.ndarray:
    if match.side is Side.BEFORE:
        start = match.position + match.length
        return values[start:start + gap_length]
    return values[match.position - gap_length:match.position]


def _season_mean(values: np.ndarray, missing: np.ndarray, gap: GapDescriptor,
                 cal: SeasonCalendar) -> tuple[np.ndarray, FillMethod]:
    _, season = cal.block_of(gap.start)
    present = ~missing
    same_season = present & cal.season_mask(season)
    if same_season.any():
        return np.full(gap.length, values[same_season].mean()), FillMethod.SEASON_MEAN
    fill = values[present].mean() if present.any() else 0.0
    return np.full(gap.length, fill), FillMethod.ROW_MEAN


def _linear(values: np.ndarray, gap: GapDescriptor) -> Optional[np.ndarray]:
    left = gap.start - 1 if gap.start > 0 else None
    right = gap.stop if gap.stop < len(values) else None
    if left is None and right is None:
        return None
    if left is None:
        return np.full(gap.length, values[right])
    if right is None:
        return np.full(gap.length, values[left])
    steps = np.arange(1, gap.length + 1) / (gap.length + 1)
    return values[left] + steps * (values[right] - values[left])


def fill_gap(
        series: np.ma.MaskedArray,
        gap: GapDescriptor,
        cal: SeasonCalendar,
        search_size: int,
        *,
        min_gap: int = 3,
        two_sided: bool = True,
) -> tuple[np.ndarray, FillMethod]:
    """Fill values for one gap together with the method that produced them."""
    values = np.asarray(np.ma.getdata(series), dtype=np.float64)
    missing = np.ma.getmaskarray(series)

    if gap.length < min_gap:
        fill = _linear(values, gap)
        if fill is not None:
            return np.maximum(fill, 0.0), FillMethod.LINEAR
        fill, method = _season_mean(values, missing, gap, cal)
        return np.maximum(fill, 0.0), method

    sides = (Side.BEFORE, Side.AFTER) if two_sided else (Side.BEFORE,)
    scanned: list[WindowMatch] = []
    completions = []
    for side in sides:
        try:
            matches = scan_windows(series, gap, cal, search_size, side)
        except NoQueryWindow:
            continue
        scanned.extend(matches)
        kept = [m for m in matches if passes_derivative_filter(m)]
        if kept:
            best = min(kept, key=lambda m: (m.ddtw_cost, m.position))
            completions.append(completion_window(values, best, gap.length))

    if completions:
        fill, method = np.mean(completions, axis=0), FillMethod.DTW_MATCH
    elif scanned:
        side_order = {side: i for i, side in enumerate(sides)}
        best = min(scanned, key=lambda m: (m.dtw_cost, side_order[m.side], m.position))
        fill, method = completion_window(values, best, gap.length), FillMethod.MIN_DTW
    else:
        fill, method = _season_mean(values, missing, gap, cal)
    return np.maximum(fill, 0.0), method


def impute_gap(
        series: np.ma.MaskedArray,
        gap: GapDescriptor,
        cal: SeasonCalendar,
        search_size: int,
        *,
        min_gap: int = 3,
        two_sided: bool = True,
) -> np.ndarray:
    return fill_gap(series, gap, cal, search_size, min_gap=min_gap, two_sided=two_sided)[0]


def _impute_row(
        series: np.ma.MaskedArray, cal: SeasonCalendar, search_size: int, min_gap: int, two_sided: bool
) -> tuple[np.ndarray, list[str]]:
    filled = np.array(np.ma.getdata(series), dtype=np.float64, copy=True)
    methods = []
    for gap in row_gaps(np.ma.getmaskarray(series)):
        fill, method = fill_gap(series, gap, cal, search_size, min_gap=min_gap, two_sided=two_sided)
        filled[gap.start:gap.stop] = fill
        methods.append(method.value)
    return filled, methods


def impute_matrix_report(
        matrix: ConsumptionMatrix,
        cal: Optional[SeasonCalendar] = None,
        search_size: int = 1,
        *,
        min_gap: int = 3,
        two_sided: bool = True,
        workers: int = 1,
) -> tuple[ConsumptionMatrix, ImputationSummary]:
    started = time.perf_counter()
    cal = cal or SeasonCalendar.for_matrix(matrix)
    if len(cal) != matrix.n_days:
        raise InvalidInputError(f"calendar covers {len(cal)} days, matrix has {matrix.n_days}")
    if search_size < 1:
        raise InvalidInputError("search size must be at least 1")

    summary = ImputationSummary()
    rows = sorted({gap.row for gap in detect_gaps(matrix)})
    data = np.array(np.ma.getdata(matrix.values), dtype=np.float64, copy=True)
    series = [matrix.row(row) for row in rows]
    args = (cal, search_size, min_gap, two_sided)

    if workers > 1 and len(rows) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_impute_row, series, *[[a] * len(rows) for a in args]))
    else:
        results = [_impute_row(s, *args) for s in series]

    for row, (filled, methods) in zip(rows, results):
        data[row] = filled
        summary.gaps_filled += len(methods)
        summary.fallback_counts.update(methods)

    summary.wall_time_ms = (time.perf_counter() - started) * 1000.0
    logger.info("imputed %d gaps in %d rows (%.0f ms)", summary.gaps_filled, len(rows), summary.wall_time_ms)
    return matrix.with_values(data), summary


def impute_matrix(
        matrix: ConsumptionMatrix,
        cal: Optional[SeasonCalendar] = None,
        search_size: int = 1,
        *,
        min_gap: int = 3,
        two_sided: bool = True,
        workers: int = 1,
) -> ConsumptionMatrix:
    """Fill every missing reading; present readings are returned bit-exact."""
    return impute_matrix_report(
        matrix, cal, search_size, min_gap=min_gap, two_sided=two_sided, workers=workers
    )[0]
