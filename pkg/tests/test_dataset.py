from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daleel.dataset import (
    Dataset,
    DatasetError,
    RunRecord,
    ingest_runs,
    split,
    to_design,
    write_runs,
)
from daleel.regress import LINEAR_BASIS, POLY_BASIS, BasisSpec

HEADER = "timestamp,instance_name,vcpu,ram_gb,price_per_hour,day_of_week,execution_time_s,app_id\n"


def _record(i=0, t=100.0, day=1):
    # 2016-02-01 is a Monday
    return RunRecord(datetime(2016, 2, day, 0, i % 60), "t2.small", 1, 2.0, 0.026, day, t, "vard")


def _dataset(n):
    return Dataset(tuple(_record(i, 100.0 + i, 1 + i % 7) for i in range(n)), "test")


def test_ingest_ten_rows(tmp_path):
    rows = [f"2016-02-0{1 + i % 7}T10:00:00,t2.small,1,2,0.026,{1 + i % 7},{100 + i},vard"
            for i in range(10)]
    p = tmp_path / "runs.csv"
    p.write_text(HEADER + "\n".join(rows) + "\n")
    d = ingest_runs(p)
    assert len(d) == 10
    assert [r.execution_time_s for r in d] == [100.0 + i for i in range(10)]
    assert d[3].day_of_week == 4


def test_day_derived_when_blank(tmp_path):
    p = tmp_path / "runs.csv"
    p.write_text(HEADER + "2016-02-02T10:00:00,t2.small,1,2,0.026,,120.5,vard\n")
    assert ingest_runs(p)[0].day_of_week == 2


def test_zero_time_names_row(tmp_path):
    p = tmp_path / "runs.csv"
    p.write_text(HEADER
                 + "2016-02-01T10:00:00,t2.small,1,2,0.026,1,100,vard\n"
                 + "2016-02-01T11:00:00,t2.small,1,2,0.026,1,0,vard\n")
    with pytest.raises(DatasetError, match="row 2"):
        ingest_runs(p)


def test_weekday_mismatch(tmp_path):
    p = tmp_path / "runs.csv"
    # 2016-02-02 is a Tuesday
    p.write_text(HEADER + "2016-02-02T10:00:00,t2.small,1,2,0.026,5,100,vard\n")
    with pytest.raises(DatasetError, match="does not match"):
        ingest_runs(p)


def test_extra_columns_ignored(tmp_path):
    p = tmp_path / "runs.csv"
    p.write_text("hypervisor," + HEADER.replace("\n", ",storage\n")
                 + "xen,2016-02-01T10:00:00,t2.small,1,2,0.026,1,100,vard,20\n")
    assert len(ingest_runs(p)) == 1


def test_mixed_apps_rejected():
    a = _record()
    b = RunRecord(a.timestamp, "t2.small", 1, 2.0, 0.026, 1, 50.0, "other")
    with pytest.raises(DatasetError, match="several applications"):
        Dataset((a, b))


def test_write_roundtrip(tmp_path, default_runs):
    p = tmp_path / "runs.csv"
    write_runs(default_runs, p)
    back = ingest_runs(p)
    assert back.records == default_runs.records


def test_split_57_43():
    train, test = split(_dataset(100), 0.57, seed=7)
    assert (len(train), len(test)) == (57, 43)


def test_split_minimal():
    train, test = split(_dataset(2), 0.5, seed=0)
    assert (len(train), len(test)) == (1, 1)


def test_split_deterministic():
    d = _dataset(50)
    assert split(d, 0.57, 3) == split(d, 0.57, 3)
    assert split(d, 0.57, 3) != split(d, 0.57, 4)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_bad_fraction(fraction):
    with pytest.raises(DatasetError):
        split(_dataset(10), fraction, 0)


def test_split_too_small():
    with pytest.raises(DatasetError):
        split(_dataset(1), 0.5, 0)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 200), fraction=st.floats(0.01, 0.99), seed=st.integers(0, 2**32 - 1))
def test_split_is_partition(n, fraction, seed):
    d = _dataset(n)
    train, test = split(d, fraction, seed)
    assert len(train) == int(np.floor(fraction * n + 0.5))
    ids = sorted(id(r) for r in train.records + test.records)
    assert ids == sorted(id(r) for r in d.records)


def test_to_design_single_record():
    rec = RunRecord(datetime(2016, 2, 3), "t2.small", 1, 2.0, 0.026, 3, 99.0, "vard")
    X = to_design(Dataset((rec,)), POLY_BASIS)
    assert X.values.tolist() == [[1, 2, 4, 1, 1, 1, 3, 9, 27]]
    assert X.response.tolist() == [99.0]
    assert X.column_labels == ("1", "ram_gb", "ram_gb^2", "vcpu", "vcpu^2", "vcpu^3",
                               "day", "day^2", "day^3")


def test_to_design_linear_columns():
    rec = RunRecord(datetime(2016, 2, 3), "t2.small", 1, 2.0, 0.026, 3, 99.0, "vard")
    X = to_design(Dataset((rec,)), LINEAR_BASIS)
    assert X.values.tolist() == [[1, 2, 1, 3]]
    assert X.column_labels == ("1", "ram_gb", "vcpu", "day")


def test_to_design_empty():
    with pytest.raises(DatasetError):
        to_design(Dataset(()), POLY_BASIS)


@pytest.mark.parametrize("degrees", [(1, 1, 1), (2, 3, 3), (3, 1, 2)])
def test_to_design_shape(default_runs, degrees):
    X = to_design(default_runs, BasisSpec(degrees))
    assert X.values.shape == (len(default_runs), 1 + sum(degrees))
    assert np.all(X.values[:, 0] == 1.0)
