import json

import pytest

from bnbar.helpers.errors import SeriesFormatError
from bnbar.helpers.series_io import (
    parse_series,
    read_series,
    write_json,
    write_series_csv,
    write_table_csv,
)


def test_parse_headed_and_headerless():
    assert parse_series("t,y\n0,3\n1,0\n2,12\n").tolist() == [3, 0, 12]
    assert parse_series("y,t\n4,0\n5,1\n").tolist() == [4, 5]
    assert parse_series("# comment\n3\n\n7\n").tolist() == [3, 7]
    assert parse_series("t,y,lambda\n0,1,2.5\n").tolist() == [1]


@pytest.mark.parametrize(
    "text, line",
    [
        ("t,y\n0,3\n1,abc\n", 3),
        ("t,y\n0,3\n1,-2\n", 3),
        ("t,y\n0,3\n1\n", 3),
        ("3\n4,5\n", 2),
        ("t,count\n0,3\n", 1),
    ],
)
def test_malformed_series_reports_line(text, line):
    with pytest.raises(SeriesFormatError) as info:
        parse_series(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_empty_series():
    with pytest.raises(SeriesFormatError):
        parse_series("t,y\n")


def test_series_csv_round_trip(tmp_path):
    path = tmp_path / "s.csv"
    write_series_csv(path, [1, 2, 3], [1.5, 2.0, 2.25], config={"seed": 4})
    lines = path.read_text().splitlines()
    assert lines[0] == '# config: {"seed": 4}'
    assert lines[1] == "t,y,lambda"
    assert lines[2] == "0,1,1.5"
    assert read_series(path).tolist() == [1, 2, 3]
    with pytest.raises(ValueError):
        write_series_csv(path, [1, 2], [1.0])


def test_table_and_json(tmp_path):
    write_table_csv(tmp_path / "t.csv", ["a", "b"], [(1, 0.1), (2, 0.25)])
    assert (tmp_path / "t.csv").read_text() == "a,b\n1,0.1\n2,0.25\n"
    write_json(tmp_path / "d.json", {"b": 1, "a": [1, 2]})
    assert json.loads((tmp_path / "d.json").read_text()) == {"a": [1, 2], "b": 1}
