from datetime import date
from itertools import product

import numpy as np
import pytest

import imputation
from data_model import GapDescriptor, SeasonCalendar
from exceptions import InvalidInputError, NoQueryWindow
from imputation import (
    accumulated_cost, derivative_transform, dtw_cost, dtw_costs, fill_gap, find_candidates, impute_gap,
    impute_matrix, impute_matrix_report, scan_windows,
)
from ntl_types import FillMethod, LocalCost, Side
from test_utils.oracles import daily_dates, dtw_by_paths, matrix_from_rows, sequences

NAN = float("nan")
SUMMER = date(2015, 6, 1)


def masked(values, start, length):
    series = np.ma.MaskedArray(np.asarray(values, dtype=np.float64), mask=np.zeros(len(values), dtype=bool))
    series[start:start + length] = np.ma.masked
    return series


def summer_calendar(n):
    return SeasonCalendar(daily_dates(SUMMER, n))


def test_derivative_of_constant():
    assert derivative_transform([5, 5, 5, 5]).tolist() == [0.0, 0.0]


def test_derivative_of_ramp():
    assert derivative_transform([0, 1, 2, 3]).tolist() == [1.0, 1.0]


def test_derivative_of_peak():
    assert derivative_transform([0, 2, 0]).tolist() == [1.0]


@pytest.mark.parametrize("slope, offset", [(0.5, 2.0), (-3.0, 10.0), (7.25, -1.0)])
def test_derivative_of_affine_sequence(slope, offset):
    x = slope * np.arange(12) + offset
    assert np.allclose(derivative_transform(x), slope, atol=1e-12)


def test_derivative_needs_three_values():
    with pytest.raises(InvalidInputError):
        derivative_transform([1, 2])


def test_dtw_identical():
    assert dtw_cost([1, 4, 2, 2], [1, 4, 2, 2]) == 0.0


def test_dtw_two_by_two():
    assert dtw_cost([0, 0], [1, 1]) == 2.0


def test_dtw_singletons():
    assert dtw_cost([3.0], [-1.5]) == 4.5 ** 2


def test_dtw_empty_input():
    with pytest.raises(InvalidInputError):
        dtw_cost([], [1.0])


def test_dtw_matches_path_enumeration():
    short = list(sequences((0, 1, 2), 3))
    for a, b in product(short, short):
        assert dtw_cost(a, b) == dtw_by_paths(a, b)
    rng = np.random.default_rng(0)
    for _ in range(150):
        a = tuple(rng.integers(0, 3, rng.integers(1, 6)))
        b = tuple(rng.integers(0, 3, rng.integers(1, 6)))
        assert dtw_cost(a, b) == dtw_by_paths(a, b)


def test_dtw_is_symmetric_and_zero_on_self():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.random(rng.integers(1, 9)), rng.random(rng.integers(1, 9))
        assert dtw_cost(a, a) == 0.0
        assert dtw_cost(a, b) == pytest.approx(dtw_cost(b, a), abs=1e-12)


def test_derivative_cost_is_dtw_of_derivatives():
    rng = np.random.default_rng(2)
    for _ in range(30):
        a, b = rng.integers(0, 3, rng.integers(3, 7)), rng.integers(0, 3, rng.integers(3, 7))
        expected = dtw_by_paths(derivative_transform(a), derivative_transform(b))
        assert dtw_cost(a, b, LocalCost.DERIVATIVE) == pytest.approx(expected, abs=1e-12)


def test_accumulated_cost_grid():
    grid = accumulated_cost([0, 1], [1, 1, 3]).costs
    assert grid.shape == (2, 3)
    assert grid[0, 0] == 1.0
    assert np.isfinite(grid).all()
    assert accumulated_cost([0, 1], [1, 1, 3]).distance == dtw_cost([0, 1], [1, 1, 3])


def test_batched_costs_match_pairwise():
    rng = np.random.default_rng(3)
    query, windows = rng.random(6), rng.random((9, 6))
    for local_cost in LocalCost:
        batched = dtw_costs(query, windows, local_cost)
        pairwise = [dtw_cost(query, w, local_cost) for w in windows]
        assert np.allclose(batched, pairwise, rtol=0, atol=1e-12)


def test_exact_copy_found_with_zero_cost():
    values = np.random.default_rng(4).uniform(1.0, 2.0, 90)
    values[10:15] = values[55:60]
    series = masked(values, 60, 5)
    gap = GapDescriptor(0, 60, 5)
    matches = find_candidates(series, gap, summer_calendar(90), 1, Side.BEFORE)
    copy = [m for m in matches if m.position == 10]
    assert len(copy) == 1
    assert copy[0].dtw_cost == 0.0
    assert copy[0].length == 5


def test_other_season_is_excluded():
    dates = daily_dates(date(2015, 5, 1), 51)
    values = np.random.default_rng(5).uniform(1.0, 2.0, 51)
    values[5:10] = values[35:40]
    series = masked(values, 40, 5)
    gap = GapDescriptor(0, 40, 5)
    assert find_candidates(series, gap, SeasonCalendar(dates), 1, Side.BEFORE) == []
    april_to_june = SeasonCalendar(dates, start_month=4)
    found = find_candidates(series, gap, april_to_june, 1, Side.BEFORE)
    assert any(m.position == 5 and m.dtw_cost == 0.0 for m in found)


def test_filter_against_direct_costs():
    values = np.random.default_rng(6).uniform(0.0, 1.0, 92)
    series = masked(values, 50, 6)
    gap = GapDescriptor(0, 50, 6)
    cal = summer_calendar(92)
    scanned = scan_windows(series, gap, cal, 1, Side.BEFORE)
    assert scanned
    query = values[44:50]
    for match in scanned:
        window = values[match.position:match.position + 6]
        assert match.dtw_cost == pytest.approx(dtw_cost(query, window), abs=1e-12)
        assert match.ddtw_cost == pytest.approx(dtw_cost(query, window, LocalCost.DERIVATIVE), abs=1e-12)
        assert not (match.position < 56 and match.position + 6 > 44)
    kept = find_candidates(series, gap, cal, 1, Side.BEFORE)
    assert kept == [m for m in scanned if m.ddtw_cost < m.dtw_cost]


def test_filter_rejects_everything_then_min_dtw_fallback():
    values = [1, 0, 1, 0, 1, 0, 1, 0, 1, 0] + [NAN] * 5
    series = np.ma.masked_invalid(np.array(values, dtype=np.float64))
    gap = GapDescriptor(0, 10, 5)
    cal = summer_calendar(15)
    scanned = scan_windows(series, gap, cal, 1, Side.BEFORE)
    assert [(m.position, m.dtw_cost, m.ddtw_cost) for m in scanned] == [(0, 2.0, 2.0)]
    assert find_candidates(series, gap, cal, 1, Side.BEFORE) == []
    fill, method = fill_gap(series, gap, cal, 1)
    assert method is FillMethod.MIN_DTW
    assert fill.tolist() == [0.0, 1.0, 0.0, 1.0, 0.0]


def test_missing_query_window():
    series = masked(np.ones(20), 2, 5)
    with pytest.raises(NoQueryWindow):
        scan_windows(series, GapDescriptor(0, 2, 5), summer_calendar(20), 1, Side.BEFORE)


def test_periodic_series_is_restored():
    period = np.array([1.0, 3.0, 2.0, 5.0, 4.0, 7.0, 6.0])
    truth = np.tile(period, 13)[:90]
    series = masked(truth, 40, 5)
    fill, method = fill_gap(series, GapDescriptor(0, 40, 5), summer_calendar(90), 1)
    assert method is FillMethod.DTW_MATCH
    assert np.max(np.abs(fill - truth[40:45])) < 1e-9


def test_almost_empty_row_uses_season_mean():
    series = np.ma.masked_invalid(np.array([2.0] + [NAN] * 9))
    fill, method = fill_gap(series, GapDescriptor(0, 1, 9), summer_calendar(10), 1)
    assert method is FillMethod.SEASON_MEAN
    assert fill.tolist() == [2.0] * 9


def test_two_sided_average_of_planted_motifs():
    values = np.random.default_rng(7).uniform(1.0, 2.0, 90)
    values[10:15] = values[35:40]
    values[75:80] = values[45:50]
    series = masked(values, 40, 5)
    gap = GapDescriptor(0, 40, 5)
    expected = (values[15:20] + values[70:75]) / 2
    fill = impute_gap(series, gap, summer_calendar(90), 1)
    assert np.allclose(fill, expected, rtol=0, atol=1e-12)
    one_sided = impute_gap(series, gap, summer_calendar(90), 1, two_sided=False)
    assert np.allclose(one_sided, values[15:20], rtol=0, atol=1e-12)


def test_candidate_monkeypatched_filter(monkeypatch):
    values = np.random.default_rng(8).uniform(1.0, 2.0, 60)
    series = masked(values, 30, 5)
    monkeypatch.setattr(imputation, "passes_derivative_filter", lambda match: False)
    _, method = fill_gap(series, GapDescriptor(0, 30, 5), summer_calendar(60), 1)
    assert method is FillMethod.MIN_DTW


def test_short_gaps_are_interpolated():
    fill, method = fill_gap(np.ma.masked_invalid(np.array([1.0, NAN, NAN, 4.0])), GapDescriptor(0, 1, 2),
                            summer_calendar(4), 1)
    assert method is FillMethod.LINEAR
    assert np.allclose(fill, [2.0, 3.0])
    edge, _ = fill_gap(np.ma.masked_invalid(np.array([NAN, NAN, 5.0, 6.0])), GapDescriptor(0, 0, 2),
                       summer_calendar(4), 1)
    assert edge.tolist() == [5.0, 5.0]


def test_narrower_search_gives_subset_of_candidates():
    dates = daily_dates(date(2014, 1, 1), 3 * 365)
    cal = SeasonCalendar(dates)
    values = np.random.default_rng(9).uniform(0.0, 1.0, len(dates))
    start = dates.index(date(2015, 7, 10))
    series = masked(values, start, 6)
    gap = GapDescriptor(0, start, 6)
    for side in Side:
        narrow = {m.position for m in find_candidates(series, gap, cal, 1, side)}
        wide = {m.position for m in find_candidates(series, gap, cal, 4, side)}
        assert narrow <= wide
        assert len(wide) > len(narrow)


def test_matrix_without_gaps_is_unchanged():
    matrix = matrix_from_rows(np.random.default_rng(10).random((3, 30)))
    out, summary = impute_matrix_report(matrix)
    assert np.array_equal(out.dense(), matrix.dense())
    assert summary.gaps_filled == 0


def seasonal_rows(n_rows, rng):
    dates = daily_dates(date(2014, 12, 1), 730)
    cal = SeasonCalendar(dates)
    weekly = np.array([0.0, 2.0, 1.0, 3.0, 0.5, 2.5, 1.5])
    rows = []
    for _ in range(n_rows):
        levels = {block: rng.uniform(2.0, 6.0) for block in cal.blocks()}
        level = np.array([levels[cal.block_of(j)] for j in range(len(dates))])
        rows.append(level + weekly[(np.arange(len(dates)) + rng.integers(7)) % 7] + rng.normal(0, 0.01, len(dates)))
    return dates, cal, np.array(rows)


def test_quarter_masked_matrix_beats_linear_interpolation():
    rng = np.random.default_rng(12)
    dates, cal, truth = seasonal_rows(3, rng)
    mask = np.zeros(truth.shape, dtype=bool)
    block_starts = [j for j in range(len(dates)) if j == 0 or cal.block_of(j) != cal.block_of(j - 1)]
    for start in block_starts:
        if start + 48 <= len(dates):
            mask[:, start + 14:start + 25] = True
            mask[:, start + 36:start + 48] = True
    assert 0.2 < mask.mean() < 0.3
    values = truth.copy()
    values[mask] = NAN
    matrix = matrix_from_rows(values, start=dates[0])

    filled, summary = impute_matrix_report(matrix, cal, 1)
    out = filled.dense()
    assert filled.n_missing == 0
    assert (out >= 0).all()
    assert np.array_equal(out[~mask], truth[~mask])

    linear = values.copy()
    columns = np.arange(len(dates))
    for i in range(len(values)):
        present = ~mask[i]
        linear[i, mask[i]] = np.interp(columns[mask[i]], columns[present], values[i, present])
    rmse = np.sqrt(np.mean((out[mask] - truth[mask]) ** 2))
    baseline = np.sqrt(np.mean((linear[mask] - truth[mask]) ** 2))
    assert rmse < baseline
    assert summary.gaps_filled == len(imputation.detect_gaps(matrix))


def test_single_row_and_row_independence():
    rng = np.random.default_rng(13)
    dates, cal, truth = seasonal_rows(2, rng)
    values = truth.copy()
    values[0, 100:110] = NAN
    values[1, 300:305] = NAN
    both = impute_matrix(matrix_from_rows(values, start=dates[0]), cal)
    alone = impute_matrix(matrix_from_rows(values[:1], start=dates[0]), cal)
    assert np.array_equal(both.dense()[0], alone.dense()[0])


def test_parallel_rows_are_deterministic():
    rng = np.random.default_rng(14)
    dates, cal, truth = seasonal_rows(4, rng)
    values = truth.copy()
    for i in range(4):
        values[i, 40 + 30 * i:52 + 30 * i] = NAN
    matrix = matrix_from_rows(values, start=dates[0])
    serial = impute_matrix(matrix, cal)
    parallel = impute_matrix(matrix, cal, workers=2)
    assert np.array_equal(serial.dense(), parallel.dense())


def test_summary_counts_fallbacks():
    matrix = matrix_from_rows([[2.0] + [NAN] * 9], start=SUMMER)
    out, summary = impute_matrix_report(matrix)
    assert out.dense().tolist() == [[2.0] * 10]
    document = summary.to_dict()
    assert document["gaps_filled"] == 1
    assert document["fallback_counts"]["season_mean"] == 1
    assert document["fallback_counts"]["dtw_match"] == 0
    assert document["wall_time_ms"] >= 0


def test_calendar_length_mismatch():
    matrix = matrix_from_rows([[1.0, NAN, 2.0]])
    with pytest.raises(InvalidInputError):
        impute_matrix(matrix, summer_calendar(5))
