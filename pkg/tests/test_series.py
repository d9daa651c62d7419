import numpy as np
import pytest

from ewtforecast.series import (
    Scaler,
    SplitSpec,
    TimeSeries,
    apply_scaler,
    chronological_split,
    embed,
    fit_scaler,
    invert_scaler,
    load_csv,
)


# ---------------------------------------------------------------- load_csv

def test_load_csv_with_header(tmp_path):
    f = tmp_path / "data.csv"
    f.write_text("load,temp\n1.0,9\n2.0,9\n3.0,9\n")
    ts = load_csv(f, "load", has_header=True)
    assert list(ts.values) == [1.0, 2.0, 3.0]
    assert ts.name == "load"


def test_load_csv_by_index_without_header(tmp_path):
    f = tmp_path / "data.csv"
    f.write_text("5\n6\n7\n")
    ts = load_csv(f, 0, has_header=False)
    assert list(ts.values) == [5.0, 6.0, 7.0]


def test_load_csv_empty_data_section(tmp_path):
    f = tmp_path / "empty.csv"
    f.write_text("load\n")
    with pytest.raises(ValueError, match="empty series"):
        load_csv(f, "load", has_header=True)


def test_load_csv_bad_cell_reports_row_number(tmp_path):
    f = tmp_path / "bad.csv"
    rows = ["1.0"] * 6 + ["abc"] + ["2.0"]
    f.write_text("\n".join(rows) + "\n")
    with pytest.raises(ValueError, match="row 7"):
        load_csv(f, 0)


def test_load_csv_rejects_non_finite(tmp_path):
    f = tmp_path / "inf.csv"
    f.write_text("1.0\ninf\n")
    with pytest.raises(ValueError, match="non-finite"):
        load_csv(f, 0)


def test_load_csv_missing_file():
    with pytest.raises(FileNotFoundError):
        load_csv("/nonexistent/nowhere.csv", 0)


def test_load_csv_missing_column(tmp_path):
    f = tmp_path / "data.csv"
    f.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="missing column"):
        load_csv(f, "c", has_header=True)


# ---------------------------------------------------------------- TimeSeries

def test_timeseries_rejects_nan():
    with pytest.raises(ValueError, match="non-finite"):
        TimeSeries([1.0, np.nan, 2.0])


def test_timeseries_rejects_empty():
    with pytest.raises(ValueError, match="empty"):
        TimeSeries([])


# ---------------------------------------------------------------- split

def test_split_fractions_example():
    ts = TimeSeries(np.arange(10.0))
    train, val, test = chronological_split(ts, SplitSpec(0.6, 0.2))
    assert (len(train), len(val), len(test)) == (6, 2, 2)


def test_split_small_series():
    ts = TimeSeries(np.arange(5.0))
    train, val, test = chronological_split(ts, SplitSpec(0.6, 0.2))
    assert (len(train), len(val), len(test)) == (3, 1, 1)


def test_split_degenerate_errors():
    ts = TimeSeries(np.arange(10.0))
    with pytest.raises(ValueError, match="empty"):
        chronological_split(ts, SplitSpec(0.9, 0.09))


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(0.7, 0.3)
    with pytest.raises(ValueError):
        SplitSpec(0.0, 0.2)


def test_split_segments_cover_input_exactly():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(5, 200))
        tf = float(rng.uniform(0.2, 0.7))
        vf = float(rng.uniform(0.05, 0.25))
        ts = TimeSeries(rng.normal(size=n))
        try:
            train, val, test = chronological_split(ts, SplitSpec(tf, vf))
        except ValueError:
            continue
        joined = np.concatenate([train.values, val.values, test.values])
        assert np.array_equal(joined, ts.values)


# ---------------------------------------------------------------- embed

def test_embed_basic():
    ds = embed(TimeSeries([1.0, 2.0, 3.0, 4.0]), lags=2, horizon=1)
    assert ds.X.tolist() == [[1.0, 2.0], [2.0, 3.0]]
    assert ds.Y.tolist() == [[3.0], [4.0]]
    assert ds.origin_indices.tolist() == [1, 2]


def test_embed_horizon_two():
    ds = embed(TimeSeries([1.0, 2.0, 3.0, 4.0, 5.0]), lags=1, horizon=2)
    assert ds.X.tolist() == [[1.0], [2.0], [3.0]]
    assert ds.Y.tolist() == [[3.0], [4.0], [5.0]]


def test_embed_too_short():
    with pytest.raises(ValueError, match="series too short"):
        embed(TimeSeries([1.0, 2.0, 3.0]), lags=3, horizon=1)


def test_embed_row_count_randomized():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(3, 60))
        lags = int(rng.integers(1, 8))
        horizon = int(rng.integers(1, 4))
        ts = TimeSeries(rng.normal(size=n))
        if n - lags - horizon + 1 < 1:
            with pytest.raises(ValueError):
                embed(ts, lags, horizon)
            continue
        ds = embed(ts, lags, horizon)
        assert ds.n_samples == n - lags - horizon + 1
        assert ds.n_features == lags


# ---------------------------------------------------------------- scalers

def test_zscore_two_point_example():
    s = fit_scaler(np.array([[0.0], [2.0]]), "zscore")
    assert s.center[0] == 1.0 and s.scale[0] == 1.0
    assert apply_scaler(s, np.array([[1.0]]))[0, 0] == 0.0


def test_none_scaler_is_identity():
    rows = np.arange(6.0).reshape(3, 2)
    s = fit_scaler(rows, "none")
    assert np.array_equal(apply_scaler(s, rows), rows)


def test_minmax_example():
    s = fit_scaler(np.array([[0.0], [10.0]]), "minmax")
    assert apply_scaler(s, np.array([[5.0]]))[0, 0] == 0.5


def test_scaler_round_trip_randomized():
    rng = np.random.default_rng(3)
    for kind in ("none", "zscore", "minmax"):
        for _ in range(20):
            rows = rng.normal(scale=rng.uniform(0.1, 50), size=(int(rng.integers(2, 40)), 5))
            s = fit_scaler(rows, kind)
            other = rng.normal(size=(7, 5))
            back = invert_scaler(s, apply_scaler(s, other))
            scale = max(1.0, float(np.abs(rows).max()), float(np.abs(other).max()))
            assert np.abs(back - other).max() <= 1e-12 * scale


def test_scaler_statistics_ignore_validation_rows():
    rng = np.random.default_rng(4)
    full = rng.normal(size=(50, 4))
    n_train = 30
    s1 = fit_scaler(full[:n_train], "zscore")
    # Mangling every validation/test row must leave the fitted statistics alone.
    full[n_train:] = 1e9
    s2 = fit_scaler(full[:n_train], "zscore")
    assert np.array_equal(s1.center, s2.center) and np.array_equal(s1.scale, s2.scale)


def test_zscore_rejects_constant_column():
    with pytest.raises(ValueError, match="constant"):
        fit_scaler(np.ones((5, 2)), "zscore")


def test_minmax_constant_column_round_trips():
    rows = np.column_stack([np.ones(4), np.arange(4.0)])
    s = fit_scaler(rows, "minmax")
    assert np.array_equal(invert_scaler(s, apply_scaler(s, rows)), rows)


def test_apply_scaler_dimension_mismatch():
    s = fit_scaler(np.ones((3, 2)) * np.arange(2), "minmax")
    with pytest.raises(ValueError, match="feature columns"):
        apply_scaler(s, np.ones((3, 5)))


def test_scaler_kind_validation():
    with pytest.raises(ValueError, match="unknown scaler"):
        fit_scaler(np.ones((2, 2)), "robust")
    with pytest.raises(ValueError, match="unknown scaler"):
        Scaler("robust", np.zeros(1), np.ones(1))
