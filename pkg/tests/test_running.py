import math

import numpy as np
import pytest

from bnbar.helpers.running import RunningStats, StatsTable


def test_running_stats_match_numpy():
    xs = np.random.default_rng(3).normal(2.0, 0.5, size=200)
    st = RunningStats(truth=2.1)
    st.extend(xs)
    assert st.n == 200
    assert st.mean == pytest.approx(xs.mean())
    assert st.sd == pytest.approx(xs.std(ddof=0))
    assert st.rmse == pytest.approx(math.sqrt(np.mean((xs - 2.1) ** 2)))
    assert st.rmse ** 2 == pytest.approx(st.sd ** 2 + st.bias ** 2)


def test_empty_stats_are_nan():
    st = RunningStats(truth=1.0)
    assert math.isnan(st.sd) and math.isnan(st.rmse) and math.isnan(st.bias)
    assert math.isnan(RunningStats().rmse)


def test_stats_table():
    table = StatsTable({"phi": 0.5})
    table.update("phi", 0.4)
    table.update("phi", 0.6)
    table.update("tau", 0.2)
    assert len(table) == 2 and "phi" in table
    assert table.get_or_create("phi").bias == pytest.approx(0.0)
    assert table.get_or_create("tau").truth is None
    assert dict(table.items())["phi"].n == 2
