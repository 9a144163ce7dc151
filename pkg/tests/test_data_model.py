from datetime import date, timedelta

import numpy as np
import pytest

from data_model import (
    ConsumptionMatrix, CsvSchema, MinMaxScaling, SeasonCalendar, detect_gaps, load_csv, minmax_normalize,
    save_csv, season_of, season_profile,
)
from exceptions import DataFormatError, InvalidInputError
from ntl_types import Season
from test_utils.oracles import daily_dates, matrix_from_rows, scan_gaps

NAN = float("nan")


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


HEADER = "consumer_id,label,2014-01-01,2014-01-02,2014-01-03,2014-01-04,2014-01-05\n"


def test_load_csv_marks_empty_cell_missing(tmp_path):
    path = write(tmp_path, HEADER + "a,0,1,2,3,4,5\nb,1,1,,3,4,5\nc,0,0.5,NaN,1,1,1\n")
    matrix = load_csv(path)
    assert matrix.values.shape == (3, 5)
    assert matrix.n_missing == 2
    assert matrix.consumer_ids == ("a", "b", "c")
    assert list(matrix.labels) == [0, 1, 0]
    assert matrix.dates[0] == date(2014, 1, 1)


def test_load_csv_single_empty_cell(tmp_path):
    path = write(tmp_path, HEADER + "a,0,1,2,3,4,5\nb,1,1,,3,4,5\nc,0,1,1,1,1,1\n")
    matrix = load_csv(path)
    assert matrix.n_missing == 1
    assert matrix.missing[1, 1]


def test_load_csv_accepts_crlf(tmp_path):
    path = tmp_path / "crlf.csv"
    path.write_bytes((HEADER + "a,0,1,2,3,4,5\n").replace("\n", "\r\n").encode("utf-8"))
    matrix = load_csv(str(path))
    assert matrix.dense()[0].tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]


def test_load_csv_duplicate_date_column(tmp_path):
    path = write(tmp_path, "consumer_id,label,2014-01-01,2014-01-01\na,0,1,2\n")
    with pytest.raises(DataFormatError, match="non-monotone dates"):
        load_csv(path)


def test_load_csv_gap_in_dates(tmp_path):
    path = write(tmp_path, "consumer_id,label,2014-01-01,2014-01-03\na,0,1,2\n")
    with pytest.raises(DataFormatError, match="not contiguous"):
        load_csv(path)


def test_load_csv_names_bad_cell(tmp_path):
    path = write(tmp_path, HEADER + "a,0,1,2,3,4,5\nb,1,1,2,abc,4,5\n")
    with pytest.raises(DataFormatError) as info:
        load_csv(path)
    assert info.value.row == 1
    assert info.value.column == "2014-01-03"
    assert "abc" in str(info.value)


def test_load_csv_bad_label(tmp_path):
    path = write(tmp_path, HEADER + "a,2,1,2,3,4,5\n")
    with pytest.raises(DataFormatError, match="label"):
        load_csv(path)


def test_load_csv_malformed_header(tmp_path):
    path = write(tmp_path, "id,label,2014-01-01\na,0,1\n")
    with pytest.raises(DataFormatError, match="malformed header"):
        load_csv(path)


def test_load_csv_skips_marker_columns(tmp_path):
    path = write(tmp_path, "consumer_id,label,synthetic,2014-01-01,2014-01-02\na,1,1,3,4\n")
    matrix = load_csv(path, CsvSchema())
    assert matrix.n_days == 2
    assert matrix.dense().tolist() == [[3.0, 4.0]]


def test_save_then_load_is_identity(tmp_path):
    rng = np.random.default_rng(3)
    values = rng.gamma(2.0, 1.7, size=(6, 20))
    values[rng.random(values.shape) < 0.2] = NAN
    matrix = matrix_from_rows(values, labels=[0, 1, 0, 0, 1, 0])
    path = str(tmp_path / "round.csv")
    save_csv(matrix, path, markers={"synthetic": [0, 0, 1, 0, 0, 0]})
    loaded = load_csv(path)
    assert loaded.consumer_ids == matrix.consumer_ids
    assert loaded.dates == matrix.dates
    assert np.array_equal(loaded.labels, matrix.labels)
    assert np.array_equal(loaded.missing, matrix.missing)
    present = ~matrix.missing
    assert np.array_equal(np.ma.getdata(loaded.values)[present], np.ma.getdata(matrix.values)[present])


def test_matrix_rejects_negative_reading():
    with pytest.raises(DataFormatError):
        matrix_from_rows([[1.0, -0.5, 2.0]])


def test_matrix_rejects_shape_mismatch():
    with pytest.raises(DataFormatError):
        ConsumptionMatrix.from_dense(["a", "b"], [0], daily_dates(date(2014, 1, 1), 2), np.ones((2, 2)))


def test_dense_refuses_missing():
    with pytest.raises(DataFormatError, match="MISSING"):
        matrix_from_rows([[1.0, NAN]]).dense()


def test_detect_gaps_single_run():
    gaps = detect_gaps(matrix_from_rows([[1.0, NAN, NAN, 2.0]]))
    assert [(g.row, g.start, g.length) for g in gaps] == [(0, 1, 2)]


def test_detect_gaps_complete_row():
    assert detect_gaps(matrix_from_rows([[1.0, 2.0, 3.0]])) == []


def test_detect_gaps_two_runs():
    gaps = detect_gaps(matrix_from_rows([[NAN, 1.0, NAN]]))
    assert [(g.start, g.length) for g in gaps] == [(0, 1), (2, 1)]


def test_detect_gaps_matches_scan():
    rng = np.random.default_rng(11)
    for _ in range(20):
        values = rng.random((5, 40))
        mask = np.zeros(values.shape, dtype=bool)
        for _ in range(rng.integers(0, 8)):
            row, start, length = rng.integers(0, 5), rng.integers(0, 40), rng.integers(1, 6)
            mask[row, start:start + length] = True
        values[mask] = NAN
        gaps = detect_gaps(matrix_from_rows(values))
        expected = [(row, start, length) for row in range(5) for start, length in scan_gaps(mask[row])]
        assert [(g.row, g.start, g.length) for g in gaps] == expected
        covered = np.zeros_like(mask)
        for g in gaps:
            covered[g.row, g.start:g.stop] = True
        assert np.array_equal(covered, mask)


@pytest.mark.parametrize("day, expected", [
    (date(2015, 7, 15), (2015, Season.SUMMER)),
    (date(2014, 3, 1), (2014, Season.SPRING)),
    (date(2014, 2, 28), (2013, Season.WINTER)),
    (date(2015, 11, 30), (2015, Season.AUTUMN)),
])
def test_season_of(day, expected):
    assert season_of(day) == expected


def test_season_of_year_boundary():
    assert season_of(date(2015, 12, 15)) == season_of(date(2016, 1, 15)) == (2015, Season.WINTER)
    assert season_of(date(2015, 2, 15)) == (2014, Season.WINTER)


def test_season_of_custom_start_month():
    assert season_of(date(2015, 4, 10), start_month=4) == (2015, Season.WINTER)
    assert season_of(date(2016, 3, 31), start_month=4) == (2016, Season.AUTUMN)


def test_seasons_partition_a_date_range():
    dates = daily_dates(date(2013, 11, 1), 900)
    calendar = SeasonCalendar(dates)
    masks = [calendar.block_mask([block]) for block in calendar.blocks()]
    assert np.array_equal(np.sum(masks, axis=0), np.ones(len(dates)))
    for year, season in calendar.blocks():
        months = {d.month for d, inside in zip(dates, calendar.block_mask([(year, season)])) if inside}
        assert len(months) <= 3


def test_search_blocks_prefers_nearest_years():
    calendar = SeasonCalendar(daily_dates(date(2014, 1, 1), 3 * 365))
    july_2015 = calendar.dates.index(date(2015, 7, 1))
    assert calendar.search_blocks(july_2015, 1) == [(2015, Season.SUMMER)]
    assert calendar.search_blocks(july_2015, 3) == [
        (2015, Season.SUMMER), (2014, Season.SUMMER), (2016, Season.SUMMER)
    ]
    with pytest.raises(InvalidInputError):
        calendar.search_blocks(july_2015, 0)


def test_minmax_column():
    scaled, scaling = minmax_normalize(np.array([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]))
    assert scaled[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert scaled[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert np.array_equal(scaling.minimum, [2.0, 5.0])


def test_minmax_round_trip():
    values = np.random.default_rng(5).gamma(1.5, 3.0, size=(50, 30))
    scaled, scaling = minmax_normalize(matrix_from_rows(values))
    assert scaled.min() >= 0.0 and scaled.max() <= 1.0
    assert np.max(np.abs(scaling.inverse(scaled) - values)) < 1e-9
    restored = MinMaxScaling.from_dict(scaling.to_dict())
    assert np.array_equal(restored.transform(values), scaled)


def test_minmax_refuses_missing():
    with pytest.raises(DataFormatError):
        minmax_normalize(matrix_from_rows([[1.0, NAN], [2.0, 3.0]]))


def test_minmax_clip_for_unseen_rows():
    scaling = MinMaxScaling.fit(np.array([[0.0], [2.0]]))
    assert scaling.transform(np.array([[4.0], [-1.0]]), clip=True).ravel().tolist() == [1.0, 0.0]


def test_season_profile():
    dates = daily_dates(date(2015, 6, 1), 120)
    values = np.array([[1.0 if d.month < 9 else 3.0 for d in dates]])
    matrix = ConsumptionMatrix.from_dense(["a"], [0], dates, values)
    profile = season_profile(matrix)
    assert profile["season"].tolist() == ["summer", "autumn"]
    assert profile["days"].tolist() == [92, 28]
    assert profile["mean_kwh"].tolist() == [1.0, 3.0]


def test_matrix_is_immutable_copy():
    source = np.ones((1, 3))
    matrix = ConsumptionMatrix.from_dense(["a"], [0], daily_dates(date(2014, 1, 1), 3), source)
    source[0, 0] = 9.0
    assert matrix.dense()[0, 0] == 1.0
    with pytest.raises(Exception):
        matrix.labels = np.zeros(1)
    assert date(2014, 1, 1) + timedelta(days=2) == matrix.dates[-1]
