import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from driftlearn.errors import FitError, ImputeError, OrderingError, ShapeError
from driftlearn.preprocess import (
    ImputeRule,
    MinMaxScaler,
    StandardScaler,
    clip_unit_interval,
    fill_missing,
    filter_malfunction,
    scaler_from_record,
)


def hourly(n, start="2021-01-01T00:00"):
    return np.datetime64(start) + np.arange(n) * np.timedelta64(1, "h")


# --- fitting -----------------------------------------------------------------

def test_minmax_fit_and_transform():
    sc = MinMaxScaler.fit([0.0, 5.0, 10.0])
    assert sc.mins[0] == 0.0 and sc.maxs[0] == 10.0
    assert sc.transform([5.0])[0, 0] == pytest.approx(0.5)


def test_standard_fit_constant_column_maps_to_zero():
    sc = StandardScaler.fit([1.0, 1.0, 1.0])
    assert sc.means[0] == 1.0 and sc.variances[0] == 0.0
    assert sc.transform([1.0])[0, 0] == 0.0
    assert sc.transform([42.0])[0, 0] == 0.0


def test_fit_empty_column_errors():
    with pytest.raises(FitError):
        MinMaxScaler.fit(np.zeros((0, 1)))
    with pytest.raises(FitError) as err:
        StandardScaler.fit(np.array([[1.0, np.nan], [2.0, np.nan]]), names=["a", "b"])
    assert "b" in str(err.value)


# --- partial updates ------------------------------------------------------------

def test_minmax_partial_update_extrema():
    sc = MinMaxScaler.fit([0.0, 10.0])
    up = sc.partial_update([20.0])
    assert up.maxs[0] == 20.0 and up.mins[0] == 0.0
    assert up.transform([5.0])[0, 0] == pytest.approx(0.25)
    # interior values leave the parameters unchanged
    same = sc.partial_update([3.0, 7.0])
    assert same.mins[0] == sc.mins[0] and same.maxs[0] == sc.maxs[0]


def test_minmax_feature_count_mismatch():
    sc = MinMaxScaler.fit(np.random.default_rng(0).random((5, 3)))
    with pytest.raises(ShapeError):
        sc.partial_update(np.zeros((2, 4)))


def test_standard_streaming_equals_full_refit():
    # [DERIVED] oracle: refit on the concatenated data
    rng = np.random.default_rng(11)
    data = rng.normal(3.0, 2.5, size=(400, 3))
    half = StandardScaler.fit(data[:200]).partial_update(data[200:])
    full = StandardScaler.fit(data)
    assert np.allclose(half.means, full.means, rtol=1e-9)
    assert np.allclose(half.variances, full.variances, rtol=1e-9)
    assert np.array_equal(half.counts, full.counts)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_minmax_partition_insensitive(seed, cuts):
    rng = np.random.default_rng(seed)
    data = rng.random((30, 2))
    full = MinMaxScaler.fit(data)
    splits = np.sort(rng.integers(1, 30, size=cuts))
    parts = np.split(data, splits)
    sc = MinMaxScaler.fit(parts[0])
    for p in parts[1:]:
        sc = sc.partial_update(p)
    assert np.array_equal(sc.mins, full.mins)
    assert np.array_equal(sc.maxs, full.maxs)


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float64, (12, 2), elements=st.floats(-100, 100)))
def test_transform_inverse_identity(data):
    for cls in (MinMaxScaler, StandardScaler):
        sc = cls.fit(data)
        spans = data.max(axis=0) - data.min(axis=0)
        if np.any(spans == 0):
            continue  # constant columns are the documented degenerate case
        back = sc.inverse_transform(sc.transform(data))
        assert np.allclose(back, data, atol=1e-12 * max(1, np.abs(data).max()))


def test_scaler_records_round_trip():
    sc = StandardScaler.fit(np.random.default_rng(1).random((10, 2)), names=["a", "b"])
    rec = sc.to_record()
    assert rec["version"] == 1
    assert [f["name"] for f in rec["features"]] == ["a", "b"]
    back = scaler_from_record(rec)
    assert np.array_equal(back.means, sc.means)
    assert np.array_equal(back.counts, sc.counts)
    mm = MinMaxScaler.fit([[0.0], [2.0]])
    rec = mm.to_record()
    assert rec["features"][0]["name"] == "x0"  # unnamed features get defaults
    assert np.array_equal(scaler_from_record(rec).maxs, mm.maxs)


# --- missing values ------------------------------------------------------------

def test_interpolate_midpoint():
    out = fill_missing([1.0, np.nan, 3.0], ImputeRule("linear_interpolate"))
    assert np.array_equal(out, [1.0, 2.0, 3.0])


def test_leading_gap_backfills_first_valid():
    out = fill_missing([np.nan, 4.0, 5.0], ImputeRule("forward_fill"))
    assert np.array_equal(out, [4.0, 4.0, 5.0])
    out = fill_missing([np.nan, 4.0, 5.0], ImputeRule("linear_interpolate"))
    assert np.array_equal(out, [4.0, 4.0, 5.0])


def test_all_missing_errors():
    with pytest.raises(ImputeError):
        fill_missing([np.nan, np.nan], ImputeRule("linear_interpolate"))
    with pytest.raises(ImputeError):
        fill_missing([np.nan], ImputeRule("forward_fill"))


def test_drop_row_strategy():
    out = fill_missing([1.0, np.nan, 3.0], ImputeRule("drop_row"))
    assert np.array_equal(out, [1.0, 3.0])


def test_trailing_gap_holds_last_value():
    out = fill_missing([1.0, 2.0, np.nan], ImputeRule("linear_interpolate"))
    assert np.array_equal(out, [1.0, 2.0, 2.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.one_of(st.floats(0, 10), st.none()), min_size=1, max_size=30))
def test_fill_never_alters_observed_values(vals):
    arr = np.array([np.nan if v is None else v for v in vals])
    if np.isnan(arr).all():
        return
    for strategy in ("linear_interpolate", "forward_fill"):
        out = fill_missing(arr, ImputeRule(strategy))
        mask = ~np.isnan(arr)
        assert np.array_equal(out[mask], arr[mask])
        assert not np.isnan(out).any()


# --- malfunction filter ----------------------------------------------------------

def test_25_hour_zero_run_dropped():
    prod = np.concatenate([np.full(5, 0.4), np.zeros(25), np.full(5, 0.7)])
    keep = filter_malfunction(hourly(35), prod)
    assert keep.sum() == 10
    assert not keep[5:30].any()


def test_24_hour_zero_run_kept():
    prod = np.concatenate([np.full(5, 0.4), np.zeros(24), np.full(5, 0.7)])
    keep = filter_malfunction(hourly(34), prod)
    assert keep.all()


def test_no_zero_runs_is_identity():
    prod = np.linspace(0.1, 0.9, 48)
    assert filter_malfunction(hourly(48), prod).all()


def test_unordered_timestamps_error():
    ts = hourly(5)[::-1].copy()
    with pytest.raises(OrderingError):
        filter_malfunction(ts, np.zeros(5))


def test_15_minute_resolution_runs():
    # 97 zero samples at 15 min = 24.25 h > 24 h -> dropped; 96 = 24 h -> kept
    ts = np.datetime64("2021-01-01") + np.arange(120) * np.timedelta64(15, "m")
    prod = np.ones(120)
    prod[10:107] = 0.0
    assert filter_malfunction(ts, prod).sum() == 120 - 97
    prod = np.ones(120)
    prod[10:106] = 0.0
    assert filter_malfunction(ts, prod).all()


def test_clip_unit_interval():
    out = clip_unit_interval([-0.2, 0.5, 1.7])
    assert np.array_equal(out, [0.0, 0.5, 1.0])
