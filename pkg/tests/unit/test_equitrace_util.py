import json
import math

import numpy as np
import pandas as pd
import pytest
from pandas.testing import assert_frame_equal

from equitrace.util.filesystem import (
    create_dir_if_not_exist,
    get_log_file,
    get_outdir,
    get_runid,
)
from equitrace.util.parallel import ordered_map
from equitrace.util.report import read_csv, to_plain, write_csv, write_json
from equitrace.util.yaml_parser import dump_yaml, load_yaml


@pytest.mark.parametrize(
    "value,expected",
    [
        (np.float64(0.5), 0.5),
        (np.int64(3), 3),
        (np.array([[1.0, 2.0]]), [[1.0, 2.0]]),
        ((1, np.float64(2.5)), [1, 2.5]),
        ({1: math.inf, "b": [math.nan]}, {"1": "inf", "b": ["nan"]}),
        (None, None),
        ("text", "text"),
    ],
)
def test_to_plain(value, expected):
    assert to_plain(value) == expected


def test_write_json_is_sorted(tmp_path):
    path = write_json({"b": np.float64(1.0), "a": [np.int64(2)]}, tmp_path / "r.json")
    text = path.read_text()
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [2], "b": 1.0}


def test_write_csv_keeps_full_precision(tmp_path):
    rows = [{"c": 0.1, "value": 1 / 3}, {"c": 0.2, "value": None}]
    path = write_csv(rows, ["c", "value"], tmp_path / "curve.csv")
    lines = path.read_text().split("\n")
    assert lines[0] == "c,value"
    assert lines[1] == "0.10000000000000001,0.33333333333333331"
    assert lines[2] == "0.20000000000000001,"
    expected = pd.DataFrame({"c": [0.1, 0.2], "value": [1 / 3, np.nan]})
    assert_frame_equal(read_csv(path), expected)


def test_write_csv_empty(tmp_path):
    path = write_csv([], ["x_payload", "l"], tmp_path / "orbits.csv")
    assert path.read_text() == "x_payload,l\n"


def test_yaml_round_trip():
    data = {"model": "circle", "orbits": {"l_window": [0.5, 3.5]}, "trace": {"g": "1"}}
    assert load_yaml(dump_yaml(data)) == data


def test_outdir(tmp_path):
    runid = get_runid()
    assert runid.startswith("runid__")
    outdir = create_dir_if_not_exist(get_outdir(tmp_path, "circle", runid))
    assert outdir.is_dir()
    assert outdir == tmp_path / "circle" / runid
    assert get_outdir(tmp_path, None, runid) == tmp_path / "custom" / runid


def test_log_file(tmp_path):
    path = get_log_file(tmp_path / "log")
    assert path.parent.is_dir()
    assert path.name.startswith("equitrace_") and path.suffix == ".log"


@pytest.mark.parametrize("n_jobs", [1, 3])
def test_ordered_map(n_jobs):
    assert ordered_map(lambda v: v * v, range(7), n_jobs) == [0, 1, 4, 9, 16, 25, 36]
